"""Average spectrum of hard-limited one- and two-tone signals.

For ``sign(sum_p A_p cos(theta_p) + w)`` with ``w ~ N(0, sigma^2)`` the noise
average is ``sum c_{m1,m2} cos(m1 theta_1) cos(m2 theta_2)``; only odd
``m = m1 + m2`` survive. Coefficients here are complex numbers of the form
``-j^(m+1) * real``, i.e. real with sign ``(-1)^((m-1)/2)``.

For the complex quantizer ``csign`` the term with integer combination ``k``
shows up as a single line at frequency ``k . f`` where the sign of ``k`` is
chosen so that ``sum(k) = 1 (mod 4)``; a cross term (two nonzero entries)
carries half its coefficient into each of its two lines.
"""

from __future__ import annotations

import itertools
import decimal
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .special import (CANCELLATION_LIMIT, MAX_TERMS, REL_STOP, SeriesDivergenceError,
                      double_factorial, hyp_pfq)

SQRT_2_PI = math.sqrt(2 / math.pi)


def _check_odd(m: int) -> None:
    if int(m) != m or m < 1 or m % 2 == 0:
        raise ValueError(f"order must be a positive odd integer, got {m}")


def _phase_factor(m: int) -> complex:
    return -(1j ** (m + 1))


def alpha_m(m: int) -> Fraction:
    _check_odd(m)
    h = (m - 1) // 2
    return Fraction(1, math.factorial(h) * m) / Fraction(2) ** (3 * h)


def self_coeff_p1(m: int, A: float, sigma: float) -> complex:
    """m-order coefficient for a single tone of amplitude ``A``."""
    if int(m) != m or m < 0:
        raise ValueError("order must be a nonnegative integer")
    if A < 0 or sigma <= 0:
        raise ValueError("need A >= 0 and sigma > 0")
    if m % 2 == 0 or A == 0:
        return 0j
    r = A / sigma
    f = hyp_pfq([m / 2], [m + 1], -(r**2) / 2)
    return _phase_factor(m) * SQRT_2_PI * float(alpha_m(m)) * r**m * f


def self_coeff_lowsnr(m: int, A: float, sigma: float) -> complex:
    _check_odd(m)
    return _phase_factor(m) * SQRT_2_PI * float(alpha_m(m)) * (A / sigma) ** m


def cross_coeff_lowsnr(m1: int, m2: int, A1: float, A2: float, sigma: float) -> complex:
    m = m1 + m2
    if m % 2 == 0:
        return 0j
    a = SQRT_2_PI * 2.0 ** (2 - m) * double_factorial(m - 2) / (math.factorial(m1) * math.factorial(m2))
    return _phase_factor(m) * a * (A1 / sigma) ** m1 * (A2 / sigma) ** m2


def _double_series(p: int, q: int, m: int, a: float, b: float) -> float:
    """sum_i (-1)^i (m/2)_i sum_k a^k b^(i-k) / ((i-k)! (i-k+q)! k! (p+1)_k)."""
    half = m / 2
    pieces = []
    biggest = 0.0
    la = math.log(a) if a > 0 else None
    lb = math.log(b) if b > 0 else None
    for i in range(MAX_TERMS):
        if a > 0 and b > 0:
            k = np.arange(i + 1)
            lt = (k * la + (i - k) * lb - gammaln(i - k + 1) - gammaln(i - k + q + 1)
                  - gammaln(k + 1) - (gammaln(p + 1 + k) - gammaln(p + 1)))
        elif a > 0:
            k = np.array([i])
            lt = np.array([i * la - gammaln(q + 1) - gammaln(i + 1) - (gammaln(p + 1 + i) - gammaln(p + 1))])
        elif b > 0:
            k = np.array([0])
            lt = np.array([i * lb - gammaln(i + 1) - gammaln(i + q + 1)])
        else:
            lt = np.array([0.0 if i == 0 else -np.inf])
        lpoch = gammaln(half + i) - gammaln(half)
        vals = np.exp(lt + lpoch) * (-1.0) ** i
        pieces.extend(vals.tolist())
        mag = float(np.abs(vals).sum())
        biggest = max(biggest, mag)
        if not math.isfinite(mag):
            raise SeriesDivergenceError("double series overflow", math.fsum(pieces), i)
        total = math.fsum(pieces)
        if i > 2 and mag <= REL_STOP * abs(total) and mag < biggest:
            break
        if i > 0 and total == 0 and mag == 0:
            break
    else:
        raise SeriesDivergenceError("double series did not converge", math.fsum(pieces), MAX_TERMS)
    total = math.fsum(pieces)
    if biggest > CANCELLATION_LIMIT * abs(total):
        return _double_series_exact(p, q, m, a, b, i + 1, biggest)
    return total


def _double_series_exact(p, q, m, a, b, degree, biggest) -> float:
    digits = 40 + max(0, int(math.log10(max(biggest, 1.0))))
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        da, db = Decimal(a), Decimal(b)
        half = Decimal(m) / 2
        tiny = Decimal(10) ** (-digits)
        poch = Decimal(1)
        pre = Decimal(1) / math.factorial(q)  # 1 / (i! (i+q)!)
        total = Decimal(0)
        i = 0
        while True:
            if i > 0:
                poch *= half + i - 1
                pre /= i * (i + q)
            if db == 0:
                inner = da**i / (math.factorial(i) * math.factorial(q) * _rising(p + 1, i))
            else:
                t = db**i * pre
                inner = t
                for k in range(i):
                    t = t * da * (i - k) * (i - k + q) / (db * (k + 1) * (p + 1 + k))
                    inner += t
            term = poch * inner
            total += term if i % 2 == 0 else -term
            i += 1
            if i > degree and abs(term) <= tiny * abs(total):
                break
            if i > 4 * degree + 200:
                raise SeriesDivergenceError("decimal double series did not settle", float(total), i)
        return float(total)


def _rising(x: int, n: int) -> int:
    r = 1
    for j in range(n):
        r *= x + j
    return r


def self_coeff_p2(m: int, A1: float, A2: float, sigma: float) -> complex:
    """m-order self-generated coefficient of tone 1 in the two-tone setting."""
    if int(m) != m or m < 0:
        raise ValueError("order must be a nonnegative integer")
    if min(A1, A2) < 0 or sigma <= 0:
        raise ValueError("need amplitudes >= 0 and sigma > 0")
    if m % 2 == 0 or A1 == 0:
        return 0j
    a = A1**2 / (2 * sigma**2)
    b = A2**2 / (2 * sigma**2)
    s = _double_series(m, 0, m, a, b)
    pre = (2 / math.pi) * math.exp(math.lgamma(m / 2)) * a ** (m / 2) / math.factorial(m)
    return _phase_factor(m) * pre * s


def cross_coeff(m1: int, m2: int, A1: float, A2: float, sigma: float) -> complex:
    """Coefficient of ``cos(m1 theta_1) cos(m2 theta_2)`` for m1, m2 >= 1.

    Even ``m1 + m2`` returns exactly zero by parity.
    """
    if int(m1) != m1 or int(m2) != m2 or m1 < 1 or m2 < 1:
        raise ValueError("cross orders must be integers >= 1")
    if min(A1, A2) < 0 or sigma <= 0:
        raise ValueError("need amplitudes >= 0 and sigma > 0")
    m = m1 + m2
    if m % 2 == 0 or A1 == 0 or A2 == 0:
        return 0j
    a = A1**2 / (2 * sigma**2)
    b = A2**2 / (2 * sigma**2)
    s = _double_series(m1, m2, m, a, b)
    pre = (4 / math.pi) * math.exp(math.lgamma(m / 2)) * a ** (m1 / 2) * b ** (m2 / 2) / math.factorial(m1)
    return _phase_factor(m) * pre * s


def self_coeff_equal(m: int, A: float, sigma: float) -> complex:
    """Self coefficient for two equal-amplitude tones via 3F3."""
    _check_odd(m)
    r = A / sigma
    f = hyp_pfq([(m + 1) / 2, m / 2 + 1, m / 2], [1, m + 1, m + 1], -2 * r**2)
    return _phase_factor(m) * SQRT_2_PI * float(alpha_m(m)) * r**m * f


def cross_coeff_equal(m1: int, m2: int, A: float, sigma: float) -> complex:
    """Cross coefficient for two equal-amplitude tones via 3F3."""
    m = m1 + m2
    if m % 2 == 0:
        return 0j
    r = A / sigma
    f = hyp_pfq([(m + 1) / 2, m / 2 + 1, m / 2], [m2 + 1, m1 + 1, m + 1], -2 * r**2)
    a = 2.0 ** (2 - m) * double_factorial(m - 2) / (math.factorial(m1) * math.factorial(m2))
    return _phase_factor(m) * SQRT_2_PI * a * r**m * f


# --- line bookkeeping --------------------------------------------------------


@dataclass(frozen=True)
class HarmonicLine:
    k: tuple  # integer combination of the tones
    frequency: float
    avg_amplitude: complex | None = None

    @property
    def order(self) -> int:
        return sum(abs(v) for v in self.k)

    @property
    def order_pair(self) -> tuple:
        return tuple(abs(v) for v in self.k)

    @property
    def kind(self) -> str:
        nz = sum(1 for v in self.k if v)
        if self.order == 1:
            return "fundamental"
        return "self" if nz == 1 else "cross"


def line_combinations(num_tones: int, max_order: int, min_order: int = 1) -> list[tuple]:
    """Integer vectors k with odd sum|k| in [min_order, max_order] and sum(k) = 1 mod 4."""
    if max_order < 1:
        return []
    out = []
    for m in range(min_order, max_order + 1):
        if m % 2 == 0:
            continue
        for k in itertools.product(range(-m, m + 1), repeat=num_tones):
            if sum(abs(v) for v in k) == m and sum(k) % 4 == 1:
                out.append(tuple(k))
    return out


def fold(f: float, fs: float) -> float:
    """Fold into [-fs/2, fs/2)."""
    return float((f + fs / 2) % fs - fs / 2)


def harmonic_frequencies(tones: Sequence[float], max_order: int = 3,
                         sample_rate: float | None = None, min_order: int = 1) -> list[float]:
    if not len(tones):
        return []
    if max_order % 2 == 0:
        raise ValueError("max_order must be odd")
    out = []
    for k in line_combinations(len(tones), max_order, min_order):
        f = float(np.dot(k, tones))
        out.append(fold(f, sample_rate) if sample_rate else f)
    return out


def line_coefficient(k: Sequence[int], amplitudes: Sequence[float], sigma: float) -> complex:
    """Average complex line amplitude of combination ``k`` (one or two tones)."""
    k = tuple(int(v) for v in k)
    m = sum(abs(v) for v in k)
    # only odd orders with sum(k) = 1 mod 4 survive the quadrant symmetry of csign
    if m % 2 == 0 or sum(k) % 4 != 1:
        return 0j
    if len(amplitudes) == 1:
        return self_coeff_p1(abs(k[0]), amplitudes[0], sigma)
    if len(amplitudes) != 2:
        raise ValueError("closed forms cover one or two tones")
    A1, A2 = amplitudes
    m1, m2 = abs(k[0]), abs(k[1])
    if m2 == 0:
        return self_coeff_p2(m1, A1, A2, sigma)
    if m1 == 0:
        return self_coeff_p2(m2, A2, A1, sigma)
    return cross_coeff(m1, m2, A1, A2, sigma) / 2


def harmonic_lines(tones: Sequence[float], max_order: int = 3, sample_rate: float | None = None,
                   amplitudes: Sequence[float] | None = None, sigma: float | None = None,
                   min_order: int = 1) -> list[HarmonicLine]:
    lines = []
    for k in line_combinations(len(tones), max_order, min_order):
        f = float(np.dot(k, tones))
        if sample_rate:
            f = fold(f, sample_rate)
        amp = None
        if amplitudes is not None and sigma is not None and len(tones) <= 2:
            amp = line_coefficient(k, amplitudes, sigma)
        lines.append(HarmonicLine(k, f, amp))
    return lines


def attenuation_db(line: complex, fundamental: complex) -> float:
    return float(20 * np.log10(abs(line) / abs(fundamental)))


# --- Monte Carlo line readout -------------------------------------------------


@dataclass(frozen=True)
class ToneSpec:
    amplitudes: tuple
    freqs: tuple  # cycles per sample
    noise_std: float  # per real/imaginary part
    phases: tuple = ()

    def __post_init__(self):
        if self.noise_std <= 0:
            raise ValueError("noise_std must be > 0")
        if len(self.amplitudes) != len(self.freqs):
            raise ValueError("one frequency per amplitude")
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("amplitudes must be >= 0")
        if not self.phases:
            object.__setattr__(self, "phases", tuple(0.0 for _ in self.freqs))

    @classmethod
    def from_snrs(cls, snrs_db, freqs, noise_std=math.sqrt(0.5), phases=()):
        amps = tuple(math.sqrt(2 * noise_std**2 * 10 ** (s / 10)) for s in snrs_db)
        return cls(amps, tuple(freqs), noise_std, tuple(phases))


@dataclass
class MCSpectrum:
    lines: list
    bins: np.ndarray
    estimate: np.ndarray  # de-rotated complex mean amplitude per line; nan if withheld
    stderr: np.ndarray  # standard error of the real part of each estimate
    collided: list = field(default_factory=list)
    noise_floor: float = float("nan")  # rms complex amplitude at empty bins
    num_samples: int = 0
    num_trials: int = 0

    def by_k(self, k) -> int:
        for i, ln in enumerate(self.lines):
            if ln.k == tuple(k):
                return i
        raise KeyError(k)


def _line_bins(freqs, n):
    return np.mod(np.rint(np.asarray(freqs) * n).astype(np.int64), n)


def mc_spectrum_estimate(tones: ToneSpec, num_samples: int, seed: int, *, max_order: int = 3,
                         num_trials: int = 1, collision_order: int | None = None,
                         num_empty: int = 16, target_rel_se: float | None = None,
                         max_trials: int | None = None) -> MCSpectrum:
    """Monte Carlo average of the csign spectrum read at predicted line bins.

    Each trial draws fresh noise, quantizes, and projects onto the predicted
    line frequencies (rectangular window, exact bin). Lines sharing a bin with
    any other line up to ``collision_order`` are withheld.

    With ``target_rel_se`` set, trials continue past ``num_trials`` (in blocks
    of 16, up to ``max_trials``) until every reported line has a standard
    error below that fraction of its magnitude.
    """
    n = int(num_samples)
    freqs = np.asarray(tones.freqs, dtype=float)
    amps = np.asarray(tones.amplitudes, dtype=float)
    phases = np.asarray(tones.phases, dtype=float)
    lines = harmonic_lines(tuple(freqs), max_order, 1.0,
                           tuple(amps) if len(amps) <= 2 else None, tones.noise_std)
    if not lines:
        raise ValueError("no tones")
    bins = _line_bins([ln.frequency for ln in lines], n)
    co = collision_order if collision_order is not None else max_order + 4
    all_bins = _line_bins(harmonic_frequencies(tuple(freqs), co if co % 2 else co + 1, 1.0), n)
    uniq, counts = np.unique(all_bins, return_counts=True)
    crowded = set(uniq[counts > 1].tolist())
    collided = [i for i, b in enumerate(bins) if b in crowded]

    occupied = set(all_bins.tolist())
    rs = np.random.default_rng([int(seed), 0xE4])
    empty = []
    while len(empty) < num_empty:
        b = int(rs.integers(n))
        if all(min((b - o) % n, (o - b) % n) > 2 for o in occupied) and b not in empty:
            empty.append(b)
    read_bins = np.concatenate([bins, np.asarray(empty, dtype=np.int64)])

    t = np.arange(n)
    u = np.zeros(n, dtype=np.complex128)
    for A, f, ph in zip(amps, freqs, phases):
        u += A * np.exp(1j * (2 * np.pi * f * t + ph))
    # sign(u + sigma z) = +1  <=>  z >= -u / sigma
    thr_re = (-u.real / tones.noise_std).astype(np.float32)
    thr_im = (-u.imag / tones.noise_std).astype(np.float32)
    del u
    # real projection rows: X = (C sr + S si) + j (C si - S sr), exact bins
    ang = (np.outer(read_bins, t) % n) * (2 * np.pi / n)
    cs = np.concatenate([np.cos(ang), np.sin(ang)]).astype(np.float32) / n
    del ang
    nq = read_bins.size

    rot = np.exp(-1j * np.array([np.dot(ln.k, phases) for ln in lines]))
    watch = [i for i in range(bins.size) if i not in collided]
    rng = np.random.default_rng(int(seed))
    rows = []
    sr = np.empty(n, dtype=np.float32)
    si = np.empty(n, dtype=np.float32)
    limit = max(num_trials, max_trials or 0)
    while True:
        np.subtract(2 * (rng.standard_normal(n, dtype=np.float32) >= thr_re), 1, out=sr, casting="unsafe")
        np.subtract(2 * (rng.standard_normal(n, dtype=np.float32) >= thr_im), 1, out=si, casting="unsafe")
        pr = cs @ sr
        pi = cs @ si
        rows.append((pr[:nq] + pi[nq:]) + 1j * (pi[:nq] - pr[nq:]))
        done = len(rows)
        if done >= limit:
            break
        if done >= num_trials and (target_rel_se is None or done % 16 == 0):
            if target_rel_se is None:
                break
            d = np.asarray(rows)[:, : bins.size][:, watch] * rot[watch]
            mean = np.abs(d.mean(axis=0).real)
            se = d.real.std(axis=0, ddof=1) / math.sqrt(done)
            if np.all(se <= target_rel_se * mean):
                break
    acc = np.asarray(rows)
    ntr = acc.shape[0]

    derot = acc[:, : bins.size] * rot[None, :]
    est = derot.mean(axis=0)
    if ntr > 1:
        se = derot.real.std(axis=0, ddof=1) / math.sqrt(ntr)
    else:
        se = np.full(bins.size, math.sqrt(1.0 / n))
    est[collided] = np.nan
    noise = acc[:, bins.size:]
    floor = float(np.sqrt(np.mean(np.abs(noise) ** 2)))
    return MCSpectrum(lines, bins, est, se, collided, floor, n, ntr)


def mc_attenuations(spec: MCSpectrum, pool: bool = True) -> dict:
    """3-order self and cross attenuation of tone 1 (dB re its fundamental).

    With ``pool`` and two equal-amplitude tones, lines that are mirror images
    under swapping the tones are averaged (same closed-form value).
    """
    def pick(ks):
        vals = [spec.estimate[spec.by_k(k)].real for k in ks]
        vals = [v for v in vals if np.isfinite(v)]
        if not vals:
            return float("nan")
        return float(np.mean(vals))

    if pool:
        fund = pick([(1, 0), (0, 1)])
        self3 = pick([(-3, 0), (0, -3)])
        cross = pick([(-1, 2), (-1, -2), (2, -1), (-2, -1)])
    else:
        fund = pick([(1, 0)])
        self3 = pick([(-3, 0)])
        cross = pick([(-1, 2)])
    return {"self": attenuation_db(self3, fund), "cross": attenuation_db(cross, fund)}
