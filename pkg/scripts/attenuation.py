"""3-order self/cross attenuation vs SNR: closed form, low-SNR form and MC (N = 1e6)."""

from dataclasses import replace

from _common import parser, save
from onebit_radar import experiments as E

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--no-mc", action="store_true", help="closed forms only")
    a = p.parse_args()
    cfg = E.AttenuationConfig()
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    rows = E.run_attenuation_sweep(cfg, mc=not a.no_mc)
    for r in rows:
        print({k: round(v, 2) if isinstance(v, float) else v for k, v in r.items()})
    save(a.out, "attenuation", rows)
