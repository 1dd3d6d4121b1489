import numpy as np
import pytest

from onebit_radar.pipeline import (GridSpec, OsCfarConfig, cell_values, critical_scale, fft3d, fft3d_magnitude,
                                   os_cfar_1d, physical_freqs, predetect)
from onebit_radar.scene import RadarParams, Target, TargetScene, quantize_one_bit, synthesize_cube
from oracles import os_cfar_brute


def test_os_cfar_matches_brute_force():
    rng = np.random.default_rng(1)
    for R, G, eta in [(24, 2, None), (8, 1, None), (10, 0, 3), (100, 2, 75)]:
        line = rng.rayleigh(size=300)
        cfg = OsCfarConfig(R, G, 6.0, eta)
        assert np.array_equal(os_cfar_1d(line, cfg), os_cfar_brute(line, R, G, cfg.alpha, cfg.order))


def test_os_cfar_order_default_and_errors():
    assert OsCfarConfig(24).order == 18
    assert OsCfarConfig(100).order == 75
    with pytest.raises(ValueError):
        OsCfarConfig(0)
    with pytest.raises(ValueError):
        OsCfarConfig(10, 1, 8.0, 11)
    with pytest.raises(ValueError):
        os_cfar_1d(np.ones(20), OsCfarConfig(24, 2))


def test_os_cfar_detects_isolated_spike_and_wraps():
    line = np.ones(64)
    line[0] = 10.0
    det = os_cfar_1d(line, OsCfarConfig(24, 2, 8.0))
    assert det[0] and det.sum() == 1


def test_os_cfar_false_alarm_rate_iid():
    # exponential power order statistic: P_fa = prod_{i=0}^{eta-1} (R - i) / (R - i + alpha^2)
    rng = np.random.default_rng(0)
    cfg = OsCfarConfig(24, 2, 8.0)
    a2 = cfg.alpha**2
    pfa = np.prod([(24 - i) / (24 - i + a2) for i in range(cfg.order)])
    n = 0
    hits = 0
    for _ in range(40):
        line = np.abs(rng.standard_normal(20000) + 1j * rng.standard_normal(20000))
        hits += os_cfar_1d(line, cfg).sum()
        n += line.size
    sd = np.sqrt(pfa / n)
    assert abs(hits / n - pfa) < 4 * sd


def test_scaled_config():
    c = OsCfarConfig(24, 2, 8.0).scaled(2)
    assert (c.num_ref, c.num_guard, c.order) == (48, 4, 36)


def test_grid_sizes_and_nearest():
    g = GridSpec(2, (200, 24, 1000))
    assert g.sizes == (400, 48, 2000)
    assert GridSpec(4, (1, 1, 1000)).sizes == (1, 1, 4000)
    assert g.nearest_cell((0.0025, 0.0, 0.6)) == (1, 0, 1200)
    assert g.nearest_cell((-0.0025 / 2, 0.999, 0.5 / 2000)) == (399, 0, 0)
    with pytest.raises(ValueError):
        GridSpec(0, (2, 2, 2))


def test_parseval_rect_window():
    rng = np.random.default_rng(2)
    g = GridSpec(1, (8, 4, 16))
    x = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    Y = fft3d(x, g).values
    assert np.sum(np.abs(Y) ** 2) == pytest.approx(x.size * np.sum(np.abs(x) ** 2), rel=1e-12)


def test_magnitude_path_matches_full_fft():
    p = RadarParams.table1(num_pulses=16, num_elements=8, num_fast_samples=32)
    ob = quantize_one_bit(synthesize_cube(TargetScene((), 3), p))
    g = GridSpec(2, p.shape)
    w = p.window_weights()
    full = np.abs(fft3d(ob, g, w).values)
    assert np.allclose(fft3d_magnitude(ob, g, w, chunk=5), full, rtol=2e-5, atol=1e-4)
    idx = np.array([[0, 0, 0], [5, 3, 40]])
    assert np.allclose(np.abs(cell_values(ob, g, idx, w)), full[idx[:, 0], idx[:, 1], idx[:, 2]])


def _target_cube(snr=10.0, seed=0):
    p = RadarParams(num_pulses=32, num_elements=8, num_fast_samples=64)
    t = Target.from_snr(snr, 1.0, 0.4, doppler_hz=8 / 32 * p.prf, spatial_freq=2 / 8,
                        beat_freq_hz=-(40 / 64) * p.sample_rate_hz)
    return p, quantize_one_bit(synthesize_cube(TargetScene((t,), seed), p))


def test_predetect_finds_target_cell():
    p, ob = _target_cube()
    g = GridSpec(1, p.shape)
    cfgs = (OsCfarConfig(16, 1, 10.0), OsCfarConfig(4, 1, 6.0), OsCfarConfig(24, 2, 10.0))
    pds = predetect(fft3d(ob, g), cfgs)
    assert pds.contains((8, 2, 24))
    fd, fsp, fr = physical_freqs(pds.indices[[pds.position((8, 2, 24))]], g, p)
    assert fd[0] == pytest.approx(8 / 32 * p.prf) and fsp[0] == pytest.approx(0.25)
    assert fr[0] == pytest.approx(-(40 / 64) * p.sample_rate_hz)


def test_predetect_monotone_in_alpha():
    p, ob = _target_cube(0.0, 4)
    g = GridSpec(1, p.shape)
    mag = fft3d_magnitude(ob, g)
    sets = []
    for a in (12.0, 9.0, 6.0, 3.0):
        cf = (OsCfarConfig(16, 1, a), OsCfarConfig(4, 1, a), OsCfarConfig(24, 2, a))
        sets.append({tuple(c) for c in predetect(mag, cf, g).indices.tolist()})
    assert all(a <= b for a, b in zip(sets, sets[1:]))


def test_critical_scale_consistent_with_predetect():
    p, ob = _target_cube(-3.0, 5)
    g = GridSpec(1, p.shape)
    mag = fft3d_magnitude(ob, g)
    cfgs = (OsCfarConfig(16, 1, 0.0), OsCfarConfig(4, 1, 0.0), OsCfarConfig(24, 2, 0.0))
    cells, crit = critical_scale(mag, cfgs)
    for a in (3.0, 5.0, 8.0):
        cf = tuple(c.with_alpha(a) for c in cfgs)
        got = {tuple(c) for c in predetect(mag, cf, g).indices.tolist()}
        ref = {tuple(c) for c in cells[crit > 10 ** (a / 20)].tolist()}
        assert got == ref


def test_predetect_infinite_alpha_is_empty():
    p, ob = _target_cube()
    g = GridSpec(1, p.shape)
    assert predetect(fft3d(ob, g), OsCfarConfig(8, 1, float("inf"))).count == 0


def test_degenerate_axes_skip_cfar():
    p = RadarParams(num_pulses=1, num_elements=1, num_fast_samples=256)
    t = Target.from_snr(5.0, 1.0, doppler_hz=0.0, spatial_freq=0.0, beat_freq_hz=-0.25 * p.sample_rate_hz)
    ob = quantize_one_bit(synthesize_cube(TargetScene((t,), 0), p))
    g = GridSpec(2, p.shape)
    pds = predetect(fft3d(ob, g), OsCfarConfig(16, 1, 8.0))
    assert pds.contains((0, 0, 384))
