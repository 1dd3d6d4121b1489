"""Monte Carlo harness: attenuation, SNR loss, Gaussianity, reconstruction,
harmonic suppression and the detection comparison against a conventional
high-precision receiver.

Every runner takes a small config dataclass and returns plain rows (lists of
dicts) so the CLI can dump them straight to CSV.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import harmonics as H
from .gamp import (GampControls, detect_final, gamma2_from_gain, gamp_run,
                   reconstruct_and_nmse)
from .pipeline import (GridSpec, OsCfarConfig, cell_values, critical_scale, fft3d,
                       fft3d_magnitude, predetect)
from .scene import (RadarParams, Target, TargetScene, amplitude_from_snr, noiseless_signal,
                    quantize_one_bit, synthesize_cube, trial_rng)
from .windows import WindowSpec

# --- harmonic attenuation ----------------------------------------------------


@dataclass
class AttenuationConfig:
    snrs_db: tuple = (-13, -10, -7, -5, -2, 0, 4, 8)
    num_samples: int = 1_000_000
    # on-bin for N = 1e6 and free of line collisions up to order 9
    freqs: tuple = (0.378901, 0.052347)
    target_rel_se: float = 0.012
    min_trials: int = 16
    max_trials: int = 6000
    seed: int = 2024


def attenuation_closed(snr_db: float) -> dict:
    """Closed-form and low-SNR 3-order attenuations for two equal tones (dB)."""
    s = math.sqrt(0.5)
    A = math.sqrt(2 * s**2 * 10 ** (snr_db / 10))
    c1 = abs(H.self_coeff_p2(1, A, A, s))
    c3 = abs(H.self_coeff_p2(3, A, A, s))
    c21 = abs(H.cross_coeff(1, 2, A, A, s)) / 2
    a1 = abs(H.self_coeff_lowsnr(1, A, s))
    return {
        "self_closed_db": 20 * math.log10(c3 / c1),
        "cross_closed_db": 20 * math.log10(c21 / c1),
        "self_approx_db": 20 * math.log10(abs(H.self_coeff_lowsnr(3, A, s)) / a1),
        "cross_approx_db": 20 * math.log10(abs(H.cross_coeff_lowsnr(1, 2, A, A, s)) / 2 / a1),
    }


def run_attenuation_sweep(cfg: AttenuationConfig, mc: bool = True) -> list[dict]:
    rows = []
    for i, snr in enumerate(cfg.snrs_db):
        row = {"snr_db": float(snr), **attenuation_closed(snr)}
        if mc:
            tones = H.ToneSpec.from_snrs([snr, snr], cfg.freqs)
            est = H.mc_spectrum_estimate(tones, cfg.num_samples, cfg.seed + i, max_order=3,
                                         num_trials=cfg.min_trials, target_rel_se=cfg.target_rel_se,
                                         max_trials=cfg.max_trials)
            if est.collided:
                raise RuntimeError(f"line collision at lines {est.collided}; pick other frequencies")
            att = H.mc_attenuations(est)
            row.update(self_mc_db=att["self"], cross_mc_db=att["cross"], trials=est.num_trials,
                       noise_floor=est.noise_floor)
        rows.append(row)
    return rows


def harmonic_table(snr_db: float, freqs=(0.4, 0.05), max_order: int = 3, mc_samples: int = 0,
                   seed: int = 0, trials: int = 1) -> list[dict]:
    """Per-line closed form (dB re fundamental) with an optional MC column."""
    tones = H.ToneSpec.from_snrs([snr_db, snr_db], freqs)
    lines = H.harmonic_lines(freqs, max_order, 1.0, tones.amplitudes, tones.noise_std)
    fund = abs(H.line_coefficient((1, 0), tones.amplitudes, tones.noise_std))
    est = None
    if mc_samples:
        est = H.mc_spectrum_estimate(tones, mc_samples, seed, max_order=max_order, num_trials=trials,
                                     collision_order=max_order)
    rows = []
    for i, ln in enumerate(lines):
        amp = ln.avg_amplitude
        row = {"order_pair": "(%d,%d)" % ln.order_pair, "k": "(%d,%d)" % ln.k,
               "frequency": ln.frequency, "closed_db": 20 * math.log10(abs(amp) / fund)}
        if est is not None:
            f_mc = abs(est.estimate[est.by_k((1, 0))].real)
            v = est.estimate[i].real
            mc_db = 20 * math.log10(abs(v) / f_mc) if np.isfinite(v) and v != 0 else float("nan")
            row.update(mc_db=mc_db, abs_err_db=abs(mc_db - row["closed_db"]))
        rows.append(row)
    return rows


# --- SNR loss ------------------------------------------------------------------


@dataclass
class SnrLossConfig:
    snr1_db: float = -30.0
    snr2_db: tuple = (-30, -25, -20, -15, -10, -5, -2, 0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20)
    num_samples: int = 65536
    # snapped to the nearest bins; for N = 65536 these are bins 24831 and 3391,
    # clear of each other's harmonics up to high order
    freqs: tuple = (24831 / 65536, 3391 / 65536)
    trials: int = 100
    seed: int = 77
    noise_bins: int = 64


def snr_loss_theory(snr1_db: float, snr2_db: float, grid: int = 512) -> tuple[float, float]:
    """One-bit output-SNR loss of each tone, counting only the random part as noise.

    Loss = SNR * (2 - P_det) / |c_1|^2 with P_det the time-average power of the
    deterministic part ``E[csign(u + w)]`` (a torus average over both phases).
    """
    s = math.sqrt(0.5)
    A1 = math.sqrt(10 ** (snr1_db / 10))
    A2 = math.sqrt(10 ** (snr2_db / 10))
    th = 2 * np.pi * np.arange(grid) / grid
    re = A1 * np.cos(th)[:, None] + A2 * np.cos(th)[None, :]
    im = A1 * np.sin(th)[:, None] + A2 * np.sin(th)[None, :]
    from scipy.special import erf

    pdet = float(np.mean(erf(re / (math.sqrt(2) * s)) ** 2 + erf(im / (math.sqrt(2) * s)) ** 2))
    out = []
    for Aa, Ab in ((A1, A2), (A2, A1)):
        c1 = abs(H.self_coeff_p2(1, Aa, Ab, s))
        snr = Aa**2 / (2 * s**2)
        out.append(10 * math.log10(snr * (2 - pdet) / c1**2))
    return out[0], out[1]


def _empty_bins(n, line_bins, count, rng):
    occupied = set(int(b) for b in line_bins)
    picked = []
    while len(picked) < count:
        b = int(rng.integers(n))
        if all(min((b - o) % n, (o - b) % n) > 1 for o in occupied) and b not in picked:
            picked.append(b)
    return np.asarray(picked)


def run_snr_loss(cfg: SnrLossConfig) -> list[dict]:
    n = cfg.num_samples
    t = np.arange(n)
    sig = math.sqrt(0.5)
    bins = np.mod(np.rint(np.asarray(cfg.freqs) * n).astype(np.int64), n)
    freqs = bins / n
    rows = []
    for j, snr2 in enumerate(cfg.snr2_db):
        A = [math.sqrt(10 ** (cfg.snr1_db / 10)), math.sqrt(10 ** (snr2 / 10))]
        # keep away from every line of order <= 15 when estimating the noise
        lines = H.harmonic_frequencies(tuple(freqs), 15, 1.0)
        lb = np.mod(np.rint(np.asarray(lines) * n).astype(np.int64), n)
        probe = _empty_bins(n, lb, cfg.noise_bins, np.random.default_rng([cfg.seed, j, 1]))
        tb = bins
        acc = {k: [] for k in ("c_t", "o_t", "c_n", "o_n")}
        for tr in range(cfg.trials):
            rng = trial_rng(cfg.seed + 1000 * j, tr)
            ph = rng.uniform(0, 2 * np.pi, 2)
            u = A[0] * np.exp(1j * (2 * np.pi * freqs[0] * t + ph[0])) + \
                A[1] * np.exp(1j * (2 * np.pi * freqs[1] * t + ph[1]))
            x = u + sig * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
            y = np.where(x.real >= 0, 1.0, -1.0) + 1j * np.where(x.imag >= 0, 1.0, -1.0)
            X = np.fft.fft(x) / n
            Y = np.fft.fft(y) / n
            rot = np.exp(-1j * ph)
            acc["c_t"].append(X[tb] * rot)
            acc["o_t"].append(Y[tb] * rot)
            acc["c_n"].append(np.abs(X[probe]) ** 2)
            acc["o_n"].append(np.abs(Y[probe]) ** 2)
        row = {"snr1_db": cfg.snr1_db, "snr2_db": float(snr2)}
        for sysname in ("c", "o"):
            m = np.mean(acc[f"{sysname}_t"], axis=0)
            nv = float(np.mean(acc[f"{sysname}_n"]))
            p = np.maximum(np.abs(m) ** 2 - nv / cfg.trials, 1e-300)
            row[f"snr_{sysname}"] = 10 * np.log10(p / nv)
        th1, th2 = snr_loss_theory(cfg.snr1_db, snr2)
        row.update(loss1_db=float(row["snr_c"][0] - row["snr_o"][0]),
                   loss2_db=float(row["snr_c"][1] - row["snr_o"][1]),
                   loss1_theory_db=th1, loss2_theory_db=th2)
        del row["snr_c"], row["snr_o"]
        rows.append(row)
    return rows


# --- Gaussianity of the quantization noise in frequency ---------------------


@dataclass
class GaussianityConfig:
    snr_db: float = -5.0
    num_samples: int = 1_000_000
    freqs: tuple = (0.4, 0.05)
    excise_order: int = 3  # fundamental and all odd orders up to this are removed
    max_lag: int = 100
    alpha: float = 0.01
    seed: int = 5


def run_gaussianity_check(cfg: GaussianityConfig) -> dict:
    """D'Agostino-Pearson K^2 on re/im of the excised one-bit spectrum, plus
    lag-1..max_lag autocorrelation magnitude of the remaining bins."""
    n = cfg.num_samples
    rng = np.random.default_rng(cfg.seed)
    A = math.sqrt(10 ** (cfg.snr_db / 10))
    t = np.arange(n)
    # tones are snapped to bins so that excision removes whole lines
    freqs = tuple(np.rint(np.asarray(cfg.freqs) * n) / n)
    u = sum(A * np.exp(2j * np.pi * f * t) for f in freqs)
    x = u + math.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    y = np.where(x.real >= 0, 1.0, -1.0) + 1j * np.where(x.imag >= 0, 1.0, -1.0)
    Y = np.fft.fft(y) / math.sqrt(n)
    lines = H.harmonic_frequencies(freqs, cfg.excise_order, 1.0)
    bins = np.unique(np.mod(np.rint(np.asarray(lines) * n).astype(np.int64), n))
    keep = np.ones(n, dtype=bool)
    keep[bins] = False
    v = Y[keep]
    parts = np.concatenate([v.real, v.imag])
    k2 = stats.normaltest(parts)
    c = v - v.mean()
    spec = np.fft.fft(c, 2 * c.size)
    ac = np.fft.ifft(np.abs(spec) ** 2)[: cfg.max_lag + 1]
    ac = np.abs(ac[1:] / ac[0].real)
    return {"snr_db": cfg.snr_db, "excise_order": cfg.excise_order, "excised_bins": int(bins.size),
            "k2_stat": float(k2.statistic), "p_value": float(k2.pvalue),
            "normal": bool(k2.pvalue > cfg.alpha), "max_abs_autocorr": float(ac.max()),
            "autocorr": ac}


# --- DR-GAMP on a fast-time scene ---------------------------------------------


@dataclass
class ReconstructionConfig:
    snrs_db: tuple = (-5.0, -5.0)
    beat_hz: tuple = (-40.1e6, -15.4e6)
    num_samples: int = 1000
    r_a: int = 2
    cfar: OsCfarConfig = field(default_factory=lambda: OsCfarConfig(8, 1, 8.9))
    peak_only: bool = True
    trials: int = 10
    seed: int = 7
    full_dictionary: bool = False


def fast_time_params(n: int) -> RadarParams:
    return RadarParams(num_pulses=1, num_elements=1, num_fast_samples=n)


def run_reconstruction(cfg: ReconstructionConfig) -> list[dict]:
    p = fast_time_params(cfg.num_samples)
    grid = GridSpec.for_params(p, cfg.r_a)
    rows = []
    for tr in range(cfg.trials):
        rng = trial_rng(cfg.seed, tr)
        ph = rng.uniform(0, 2 * np.pi, len(cfg.snrs_db))
        targets = tuple(Target(amplitude_from_snr(s, p.complex_noise_var, a), 0.0, 0.0, f)
                        for s, a, f in zip(cfg.snrs_db, ph, cfg.beat_hz))
        scene = TargetScene(targets, int(rng.integers(2**31)))
        ob = quantize_one_bit(synthesize_cube(scene, p))
        truth = noiseless_signal(scene, p).reshape(-1)
        tcells = [grid.nearest_cell(tuple(np.mod(t.normalized_freqs(p), 1.0))) for t in targets]
        fm = fft3d(ob, grid)
        pds = predetect(fm, cfg.cfar, peak_only=cfg.peak_only)
        for mode in ("dr",) + (("full",) if cfg.full_dictionary else ()):
            if mode == "dr":
                idx = pds.indices
            else:
                idx = np.argwhere(np.ones(grid.sizes, dtype=bool))
            op = grid.operator(idx)
            res = gamp_run(ob.samples.reshape(-1), op, p.noise_std_per_part**2)
            _, nmse = reconstruct_and_nmse(res.x_hat, op, truth)
            amp = np.abs(res.x_hat)
            pos = [_position(idx, c) for c in tcells]
            tamp = [20 * np.log10(amp[i]) if i is not None else float("-inf") for i in pos]
            other = np.delete(amp, [i for i in pos if i is not None])
            spur = 20 * np.log10(other.max()) if other.size and other.max() > 0 else float("-inf")
            rows.append({"trial": tr, "mode": mode, "num_pt": len(idx), "nmse_db": nmse,
                         **{f"target{k + 1}_db": v for k, v in enumerate(tamp)},
                         "max_spurious_db": spur, "iterations": res.iterations,
                         "converged": res.converged, "reached_tol": res.reached_tol})
    return rows


def _position(idx, cell):
    hit = np.flatnonzero(np.all(np.asarray(idx) == np.asarray(cell)[None, :], axis=1))
    return int(hit[0]) if hit.size else None


# --- harmonic suppression on a full cube -------------------------------------

ONGRID = ((2e3, 0.0, -40e6), (7e3, 0.0, -3e6))
OFFGRID = ((2.1e3, 0.0125, -40.015e6), (7.35e3, 0.0354, -3.06e6))


@dataclass
class SuppressionConfig:
    params: RadarParams = field(default_factory=RadarParams.table1)
    targets: tuple = ONGRID
    snrs_db: tuple = (-7.0, -7.0)
    r_a: tuple = (2,)
    alpha_db: float = 10.6
    num_ref: int = 24
    num_guard: int = 2
    scale_cfar: bool = True  # stretch R and G with r_a
    trials: int = 20
    seed: int = 88
    th_db: float = 13.6
    gamp: GampControls = field(default_factory=GampControls)


def cfar_for_grid(sizes, num_ref, num_guard, alpha_db, r_a=1, scale=True):
    """Per-axis configs; extents grow with r_a and are clipped to fit short axes."""
    out = []
    for m in sizes:
        if m == 1:
            out.append(None)
            continue
        R = num_ref * (r_a if scale else 1)
        G = num_guard * (r_a if scale else 1)
        while R + 2 * G >= m and R > 4:
            R -= 2
            G = max(1, min(G, (m - R - 1) // 2))
        out.append(OsCfarConfig(R, G, alpha_db))
    return tuple(out)


def predicted_cells(targets, params: RadarParams, grid: GridSpec, max_order: int = 3):
    """Nearest grid cells of the targets and of their order-3 combinations."""
    nus = np.array([t.normalized_freqs(params) for t in targets])
    tcells = [grid.nearest_cell(tuple(np.mod(v, 1.0))) for v in nus]
    hcells = []
    for k in H.line_combinations(len(targets), max_order, 3):
        hcells.append(grid.nearest_cell(tuple(np.mod(np.dot(k, nus), 1.0))))
    return tcells, hcells


def _near(idx, cell, radius, sizes):
    d = np.abs(np.asarray(idx) - np.asarray(cell)[None, :])
    d = np.minimum(d, np.asarray(sizes)[None, :] - d)
    return np.flatnonzero(np.all(d <= radius, axis=1))


def run_suppression_scenarios(cfg: SuppressionConfig) -> list[dict]:
    p = cfg.params
    w = p.window_weights()
    g2 = gamma2_from_gain(p.shape, cfg.th_db)
    rows = []
    for tr in range(cfg.trials):
        rng = trial_rng(cfg.seed, tr)
        ph = rng.uniform(0, 2 * np.pi, len(cfg.targets))
        targets = tuple(Target(amplitude_from_snr(s, p.complex_noise_var, a), fd, fsp, fr)
                        for s, a, (fd, fsp, fr) in zip(cfg.snrs_db, ph, cfg.targets))
        scene = TargetScene(targets, int(rng.integers(2**31)))
        ob = quantize_one_bit(synthesize_cube(scene, p))
        r = ob.samples.reshape(-1)
        for ra in cfg.r_a:
            grid = GridSpec.for_params(p, ra)
            mag = fft3d_magnitude(ob, grid, w)
            cfgs = cfar_for_grid(grid.sizes, cfg.num_ref, cfg.num_guard, cfg.alpha_db, ra, cfg.scale_cfar)
            pds = predetect(mag, cfgs, grid, values=lambda c: cell_values(ob, grid, c, w))
            del mag
            tcells, hcells = predicted_cells(targets, p, grid)
            radius = 0 if cfg.targets is ONGRID else max(1, ra // 2)
            row = {"trial": tr, "r_a": ra, "num_pt": pds.count}
            if pds.count == 0:
                rows.append({**row, "targets_found": 0, "harmonics_predetected": 0})
                continue
            res = gamp_run(r, pds.operator(), p.noise_std_per_part**2, controls=cfg.gamp)
            amp = np.abs(res.x_hat)
            t_amp = []
            t_pos = set()
            for c in tcells:
                near = _near(pds.indices, c, radius, grid.sizes)
                t_pos.update(near.tolist())
                t_amp.append(amp[near].max() if near.size else 0.0)
            h_pre = 0
            h_amp = []
            for c in hcells:
                near = [i for i in _near(pds.indices, c, radius, grid.sizes).tolist() if i not in t_pos]
                h_pre += bool(near)
                h_amp.append(amp[near].max() if near else 0.0)
            ref = max(t_amp) if max(t_amp) > 0 else 1.0
            hmax = max(h_amp) if h_amp else 0.0
            row.update(
                targets_found=sum(a > 0 for a in t_amp),
                target_db=";".join(f"{20 * np.log10(a):.2f}" if a > 0 else "-inf" for a in t_amp),
                harmonics_predetected=h_pre,
                harmonics_below_gamma2=sum(a < g2 for a in h_amp),
                harmonic_residual_db=20 * np.log10(hmax / ref) if hmax > 0 else -300.0,
                gamma2_db=20 * np.log10(g2),
                iterations=res.iterations, converged=res.converged,
            )
            rows.append(row)
    return rows


# --- detection comparison ---------------------------------------------------


def vc_params(**kw) -> RadarParams:
    """Desk-scale system for the detection comparison (K=100, L=10, N=100)."""
    wins = {"doppler": WindowSpec("chebyshev", 50.0), "spatial": WindowSpec("taylor", 30.0, 4),
            "range": WindowSpec("chebyshev", 50.0)}
    base = dict(num_pulses=100, num_elements=10, num_fast_samples=100, windows=wins)
    base.update(kw)
    return RadarParams.table1(**base)


@dataclass
class DetectionConfig:
    params: RadarParams = field(default_factory=vc_params)
    scenario: int = 1
    snrs_db: tuple = (-38, -36, -34, -32, -30, -28)
    num_targets: int = 10
    strong_snr_db: float = 0.0
    r_a: int = 4
    alpha_db: float = 8.0
    # (doppler, spatial, range) reference counts; order index floor(0.75 R)
    num_ref: tuple = (100, 24, 100)
    num_guard: tuple = (2, 2, 2)
    peak_only: bool = True
    th_db: float = 13.6
    trials: int = 100
    calib_maps: int = 30
    seed: int = 4242
    min_sep_cells: int = 2
    gamp: GampControls = field(default_factory=GampControls)


def _cfgs(cfg: DetectionConfig, alpha_db: float):
    return tuple(OsCfarConfig(R, G, alpha_db) for R, G in zip(cfg.num_ref, cfg.num_guard))


def random_targets(cfg: DetectionConfig, snr_db: float, rng) -> tuple:
    """Uniform off-grid placement, at least ``min_sep_cells`` natural cells apart."""
    p = cfg.params
    K, L, N = p.shape
    out = []
    pos = []
    want = cfg.num_targets + (1 if cfg.scenario == 2 else 0)
    while len(out) < want:
        nu = rng.uniform(0, 1, 3)
        cell = nu * np.array([K, L, N])
        ok = True
        for q in pos:
            d = np.abs(cell - q)
            d = np.minimum(d, np.array([K, L, N]) - d)
            if np.all(d < cfg.min_sep_cells):
                ok = False
                break
        if not ok:
            continue
        pos.append(cell)
        snr = cfg.strong_snr_db if (cfg.scenario == 2 and len(out) == cfg.num_targets) else snr_db
        amp = amplitude_from_snr(snr, p.complex_noise_var, rng.uniform(0, 2 * np.pi))
        fsp = nu[1] - 1.0 if nu[1] >= 0.5 else nu[1]
        out.append(Target(amp, nu[0] * p.prf, fsp, (nu[2] - 1.0) * p.sample_rate_hz))
    return tuple(out)


def conventional_baseline(cube, grid: GridSpec, windows, cfgs, peak_only=True):
    """Windowed 3-D FFT and the same three-axis OS-CFAR, no second stage."""
    mag = fft3d_magnitude(cube, grid, windows)
    return predetect(mag, cfgs, grid, peak_only=peak_only)


def calibrate_alpha(cfg: DetectionConfig, target_fa: float, quantized: bool = False,
                    alphas=None) -> dict:
    """Scale factor whose pure-noise FA rate (per grid cell) is closest to ``target_fa``."""
    p = cfg.params
    grid = GridSpec.for_params(p, cfg.r_a)
    w = p.window_weights()
    crit = []
    for m in range(cfg.calib_maps):
        scene = TargetScene((), int(trial_rng(cfg.seed + 17, m).integers(2**31)))
        cube = synthesize_cube(scene, p)
        if quantized:
            cube = quantize_one_bit(cube)
        mag = fft3d_magnitude(cube, grid, w)
        _, c = critical_scale(mag, _cfgs(cfg, 0.0), cfg.peak_only, floor_db=4.0)
        crit.append(c)
    crit = np.concatenate(crit)
    cells = cfg.calib_maps * grid.num_cells
    alphas = np.arange(4.0, 16.01, 0.1) if alphas is None else np.asarray(alphas)
    rates = np.array([(crit > 10 ** (a / 20)).sum() / cells for a in alphas])
    pick = int(np.argmin(np.abs(np.log10(np.maximum(rates, 1e-30)) - math.log10(target_fa))))
    return {"alpha_db": float(alphas[pick]), "fa_rate": float(rates[pick]), "cells": cells,
            "alphas": alphas, "rates": rates}


def predetect_fa_rate(cfg: DetectionConfig, alpha_db: float | None = None, maps: int | None = None,
                      combine: str = "and") -> dict:
    """Pure-noise predetection FA rate of the one-bit pipeline per grid cell."""
    p = cfg.params
    grid = GridSpec.for_params(p, cfg.r_a)
    w = p.window_weights()
    a = cfg.alpha_db if alpha_db is None else alpha_db
    hits = 0
    n = maps or cfg.calib_maps
    for m in range(n):
        scene = TargetScene((), int(trial_rng(cfg.seed + 31, m).integers(2**31)))
        mag = fft3d_magnitude(quantize_one_bit(synthesize_cube(scene, p)), grid, w)
        hits += predetect(mag, _cfgs(cfg, a), grid, peak_only=cfg.peak_only, combine=combine).count
    cells = n * grid.num_cells
    rate = hits / cells
    return {"alpha_db": a, "hits": hits, "cells": cells, "fa_rate": rate,
            "sigma": math.sqrt(max(rate * (1 - rate), 1e-300) / cells)}


def wilson(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    d = 1 + z**2 / n
    c = (ph + z**2 / (2 * n)) / d
    h = z * math.sqrt(ph * (1 - ph) / n + z**2 / (4 * n * n)) / d
    return (max(0.0, c - h), min(1.0, c + h))


def run_detection_trials(cfg: DetectionConfig, alpha_conv_db: float | None = None,
                         onebit: bool = True) -> list[dict]:
    """Per-SNR Pd of the one-bit DR-GAMP receiver and (optionally) the baseline.

    Scenes depend only on (seed, snr index, trial), so separate calls see the
    same targets and noise."""
    p = cfg.params
    grid = GridSpec.for_params(p, cfg.r_a)
    w = p.window_weights()
    g2 = gamma2_from_gain(p.shape, cfg.th_db)
    rows = []
    for j, snr in enumerate(cfg.snrs_db):
        hits_o = hits_c = total = 0
        fa_o = fa_c = 0
        failures = 0
        for tr in range(cfg.trials):
            rng = trial_rng(cfg.seed + 7919 * (j + 1), tr)
            targets = random_targets(cfg, snr, rng)
            scene = TargetScene(targets, int(rng.integers(2**31)))
            cube = synthesize_cube(scene, p)
            ob = quantize_one_bit(cube)
            tcells = [grid.nearest_cell(tuple(np.mod(t.normalized_freqs(p), 1.0))) for t in targets]
            scored = tcells[: cfg.num_targets]  # the strong target is not scored
            total += len(scored)
            if onebit:
                mag = fft3d_magnitude(ob, grid, w)
                pds = predetect(mag, _cfgs(cfg, cfg.alpha_db), grid, peak_only=cfg.peak_only)
                del mag
            if onebit and pds.count:
                res = gamp_run(ob.samples.reshape(-1), pds.operator(), p.noise_std_per_part**2,
                               controls=cfg.gamp)
                failures += not res.converged
                rep = detect_final(res, g2, pds.indices, tcells, tol_cells=1, grid_sizes=grid.sizes)
                hits_o += sum(rep.hits[: cfg.num_targets])
                fa_o += rep.false_alarms
            if alpha_conv_db is not None:
                det = conventional_baseline(cube, grid, w, _cfgs(cfg, alpha_conv_db), cfg.peak_only)
                claimed = np.zeros(det.count, dtype=bool)
                for k, c in enumerate(tcells):
                    near = _near(det.indices, c, 1, grid.sizes)
                    claimed[near] = True
                    if k < cfg.num_targets:
                        hits_c += bool(near.size)
                fa_c += int((~claimed).sum())
        cells = cfg.trials * grid.num_cells
        row = {"scenario": cfg.scenario, "snr_db": float(snr), "trials": cfg.trials}
        if onebit:
            row.update(pd_onebit=hits_o / total, fa_onebit=fa_o / cells, gamp_nonconverged=failures)
            row["pd_onebit_lo"], row["pd_onebit_hi"] = wilson(hits_o, total)
        if alpha_conv_db is not None:
            row.update(pd_conv=hits_c / total, fa_conv=fa_c / cells, alpha_conv_db=alpha_conv_db)
            row["pd_conv_lo"], row["pd_conv_hi"] = wilson(hits_c, total)
        rows.append(row)
    return rows


def snr_at_pd(snrs, pd, level: float = 0.5) -> float:
    """Linear interpolation of the first crossing of ``level``; nan if none."""
    snrs = np.asarray(snrs, dtype=float)
    pd = np.asarray(pd, dtype=float)
    for i in range(len(pd) - 1):
        if (pd[i] - level) * (pd[i + 1] - level) <= 0 and pd[i] != pd[i + 1]:
            return float(snrs[i] + (level - pd[i]) * (snrs[i + 1] - snrs[i]) / (pd[i + 1] - pd[i]))
    return float("nan")


def run_detection_comparison(cfg: DetectionConfig) -> dict:
    """One-bit Pd curve, its measured FA rate, the baseline calibrated to that
    FA rate by noise MC, and the baseline Pd curve on the same trials."""
    onebit = run_detection_trials(cfg)
    fa = float(np.mean([r["fa_onebit"] for r in onebit]))
    # a zero measured FA rate calibrates to one false alarm over all trials
    target = fa if fa > 0 else 1.0 / (cfg.trials * len(cfg.snrs_db) * GridSpec.for_params(cfg.params, cfg.r_a).num_cells)
    cal = calibrate_alpha(cfg, target)
    conv = run_detection_trials(cfg, cal["alpha_db"], onebit=False)
    rows = [{**a, **b} for a, b in zip(onebit, conv)]
    s_o = snr_at_pd([r["snr_db"] for r in rows], [r["pd_onebit"] for r in rows])
    s_c = snr_at_pd([r["snr_db"] for r in rows], [r["pd_conv"] for r in rows])
    return {"rows": rows, "fa_onebit": fa, "calibration": {k: v for k, v in cal.items() if k not in ("alphas", "rates")},
            "snr50_onebit": s_o, "snr50_conv": s_c, "advantage_db": s_c - s_o}


def config_dict(cfg) -> dict:
    def conv(v):
        if isinstance(v, (np.ndarray,)):
            return v.tolist()
        if isinstance(v, complex):
            return [v.real, v.imag]
        return v

    d = asdict(cfg)
    return {k: conv(v) for k, v in d.items()}
