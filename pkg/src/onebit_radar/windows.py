"""Taper windows for the three FFT axes and their loss figures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import windows as _sw

KINDS = ("rect", "chebyshev", "taylor")


@dataclass(frozen=True)
class WindowSpec:
    kind: str = "rect"
    sidelobe_db: float = 60.0  # peak sidelobe level, positive dB below mainlobe
    nbar: int = 4  # Taylor only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported window kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "rect" and self.sidelobe_db <= 0:
            raise ValueError("sidelobe_db must be positive")
        if self.kind == "taylor" and self.nbar < 1:
            raise ValueError("nbar must be >= 1")

    def weights(self, length: int) -> np.ndarray:
        return make_window(self.kind, length, self.sidelobe_db, self.nbar)


def make_window(kind: str, length: int, sidelobe_db: float = 60.0, nbar: int = 4) -> np.ndarray:
    """Real taper of ``length`` samples scaled to unit peak.

    ``length == 1`` is allowed and returns ``[1.0]`` so degenerate cube axes
    pass through untouched.
    """
    if length < 1:
        raise ValueError("window length must be >= 1")
    if kind not in KINDS:
        raise ValueError(f"unsupported window kind {kind!r}")
    if length == 1 or kind == "rect":
        return np.ones(length)
    if kind == "chebyshev":
        with warnings.catch_warnings():
            # scipy warns below 45 dB about noise bandwidth; the level is the caller's choice
            warnings.simplefilter("ignore", UserWarning)
            w = _sw.chebwin(length, at=sidelobe_db, sym=True)
    else:
        w = _sw.taylor(length, nbar=nbar, sll=sidelobe_db, norm=False, sym=True)
    return w / w.max()


def coherent_gain_db(w: np.ndarray) -> float:
    """Peak-signal gain of the taper relative to a rectangular window."""
    w = np.asarray(w, dtype=float)
    return float(20 * np.log10(w.sum() / w.size))


def snr_loss_db(w: np.ndarray) -> float:
    """Output-SNR loss of the taper relative to a rectangular window (>= 0)."""
    w = np.asarray(w, dtype=float)
    return float(-10 * np.log10(w.sum() ** 2 / (w.size * np.sum(w**2))))


def peak_sidelobe_db(w: np.ndarray, pad: int = 64) -> float:
    """Highest sidelobe of the zero-padded transform, dB re the mainlobe peak."""
    w = np.asarray(w, dtype=float)
    spec = np.abs(np.fft.fft(w, pad * w.size))
    spec /= spec[0]
    # walk down the mainlobe to its first null / local minimum
    k = 1
    while k < spec.size // 2 and spec[k] <= spec[k - 1]:
        k += 1
    return float(20 * np.log10(spec[k : spec.size - k + 1].max()))
