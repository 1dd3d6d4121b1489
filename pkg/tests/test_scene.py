import math

import numpy as np
import pytest

from onebit_radar.scene import (DataCube, OneBitCube, RadarParams, Target, TargetScene, amplitude_from_snr,
                                csign, noiseless_signal, quantize_one_bit, read_cube, scene_from_snrs,
                                snr_db, synthesize_cube, trial_rng, write_cube)


def small(**kw):
    base = dict(num_pulses=8, num_elements=4, num_fast_samples=16)
    base.update(kw)
    return RadarParams(**base)


def test_table1_defaults():
    p = RadarParams.table1()
    assert p.shape == (200, 24, 1000)
    assert p.sample_rate_hz == 100e6 and p.pulse_interval_s == 2e-5
    assert p.window("doppler").kind == "chebyshev"


@pytest.mark.parametrize("kw", [dict(num_pulses=0), dict(sample_rate_hz=50e6), dict(complex_noise_var=-1),
                                dict(carrier_freq_hz=float("nan")), dict(num_elements=2.5)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_target_range_checks():
    p = small()
    with pytest.raises(ValueError):
        Target(1.0, beat_freq_hz=10.0).check(p)
    with pytest.raises(ValueError):
        Target(1.0, spatial_freq=0.7).check(p)
    with pytest.raises(ValueError):
        Target(1.0, doppler_hz=p.prf).check(p)
    with pytest.raises(ValueError):
        TargetScene((Target(1.0), Target(2.0)))


def test_csign_tie_rule():
    x = np.array([0 + 0j, -0.0 + 1j, -1 - 1j, 2 - 0j])
    assert np.array_equal(csign(x), np.array([1 + 1j, 1 + 1j, -1 - 1j, 1 + 1j], dtype=np.complex64))


def test_noiseless_cube_single_tone():
    p = small()
    t = Target(0.5 + 0.5j, doppler_hz=0.25 * p.prf, spatial_freq=0.25, beat_freq_hz=-0.5 * p.sample_rate_hz)
    s = noiseless_signal(TargetScene((t,)), p)
    k, l, n = 3, 2, 5
    assert s[k, l, n] == pytest.approx(t.amplitude * np.exp(2j * np.pi * (0.25 * k + 0.25 * l - 0.5 * n)))


def test_noise_statistics():
    p = small(num_pulses=64, num_elements=16, num_fast_samples=64, complex_noise_var=2.0)
    x = synthesize_cube(TargetScene((), 5), p).samples
    assert np.var(x.real) == pytest.approx(1.0, rel=0.03)
    assert np.var(x.imag) == pytest.approx(1.0, rel=0.03)
    assert abs(np.mean(x.real * x.imag)) < 0.02


def test_snr_round_trip():
    a = amplitude_from_snr(-7.0, 1.0, 0.3)
    assert snr_db(a, 1.0) == pytest.approx(-7.0)
    assert np.angle(a) == pytest.approx(0.3)


def test_seed_reproducibility():
    p = small()
    sc = scene_from_snrs([0.0], [(1000.0, 0.1, -1e6)], p, seed=9)
    a = synthesize_cube(sc, p).samples
    b = synthesize_cube(sc, p).samples
    assert np.array_equal(a, b)
    r1 = trial_rng(7, 3).standard_normal(4)
    r2 = trial_rng(7, 3).standard_normal(4)
    r3 = trial_rng(7, 4).standard_normal(4)
    assert np.array_equal(r1, r2) and not np.array_equal(r1, r3)


def test_cube_file_round_trip(tmp_path):
    p = small()
    cube = synthesize_cube(TargetScene((), 1), p)
    write_cube(tmp_path / "a.bin", cube)
    back = read_cube(tmp_path / "a.bin")
    assert isinstance(back, DataCube) and np.array_equal(back.samples, cube.samples)
    ob = quantize_one_bit(cube)
    write_cube(tmp_path / "b.bin", ob)
    back = read_cube(tmp_path / "b.bin")
    assert isinstance(back, OneBitCube) and np.array_equal(back.samples, ob.samples)
    assert (tmp_path / "b.bin").stat().st_size == 24 + math.ceil(2 * cube.samples.size / 8)


def test_cube_file_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        read_cube(tmp_path / "x.bin")


def test_quantize_rejects_nonfinite():
    with pytest.raises(ValueError):
        quantize_one_bit(np.array([[[np.nan + 0j]]]))
