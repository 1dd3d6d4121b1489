"""One-bit SNR loss of a weak tone (SNR1 = -30 dB) as a second tone grows."""

from dataclasses import replace

from _common import parser, save
from onebit_radar import experiments as E

if __name__ == "__main__":
    p = parser(__doc__, trials=100)
    p.add_argument("--num-samples", type=int, default=2**17)
    a = p.parse_args()
    cfg = replace(E.SnrLossConfig(), trials=a.trials, num_samples=a.num_samples)
    if a.seed is not None:
        cfg = replace(cfg, seed=a.seed)
    rows = E.run_snr_loss(cfg)
    for r in rows:
        print(f"SNR2 {r['snr2_db']:6.1f}  loss1 {r['loss1_db']:6.2f} ({r['loss1_theory_db']:6.2f})  "
              f"loss2 {r['loss2_db']:6.2f} ({r['loss2_theory_db']:6.2f})")
    save(a.out, "snr_loss", rows)
