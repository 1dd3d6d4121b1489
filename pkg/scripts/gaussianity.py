"""Normality and whiteness of the one-bit spectrum after excising the harmonic lines."""

from dataclasses import replace

from _common import parser, save
from onebit_radar import experiments as E

if __name__ == "__main__":
    a = parser(__doc__).parse_args()
    rows = []
    for snr, order in ((-15, 3), (-5, 3), (0, 3), (0, 5)):
        cfg = replace(E.GaussianityConfig(), snr_db=snr, excise_order=order)
        if a.seed is not None:
            cfg = replace(cfg, seed=a.seed)
        r = E.run_gaussianity_check(cfg)
        r.pop("autocorr")
        print(r)
        rows.append(r)
    save(a.out, "gaussianity", rows)
