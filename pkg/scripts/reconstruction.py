"""DR-GAMP on the two-target fast-time scene (N = 1000, r_a = 2, SNR = -5 dB)."""

from dataclasses import replace

import numpy as np

from _common import parser, save
from onebit_radar import experiments as E

if __name__ == "__main__":
    p = parser(__doc__, trials=10)
    p.add_argument("--full", action="store_true", help="also run GAMP on the whole dictionary")
    a = p.parse_args()
    cfg = replace(E.ReconstructionConfig(), trials=a.trials, full_dictionary=a.full)
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    rows = E.run_reconstruction(cfg)
    for r in rows:
        print(r)
    dr = [r for r in rows if r["mode"] == "dr"]
    print("median NMSE (DR) %.2f dB" % np.median([r["nmse_db"] for r in dr]))
    save(a.out, "reconstruction", rows)
