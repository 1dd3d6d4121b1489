"""Harmonic suppression on the K=200, L=24, N=1000 reference system; --offgrid sweeps r_a = 1..4."""

from dataclasses import replace

import numpy as np

from _common import parser, save
from onebit_radar import experiments as E

if __name__ == "__main__":
    p = parser(__doc__, trials=20)
    p.add_argument("--offgrid", action="store_true")
    a = p.parse_args()
    cfg = replace(E.SuppressionConfig(), trials=a.trials)
    if a.offgrid:
        cfg = replace(cfg, targets=E.OFFGRID, r_a=(1, 2, 3, 4))
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    rows = E.run_suppression_scenarios(cfg)
    for r in rows:
        print(r)
    for ra in cfg.r_a:
        med = np.median([r["harmonic_residual_db"] for r in rows if r["r_a"] == ra])
        print(f"r_a={ra}: median harmonic residual {med:.1f} dB re targets")
    save(a.out, "suppression_offgrid" if a.offgrid else "suppression_ongrid", rows)
