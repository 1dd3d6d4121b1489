import math

import numpy as np
import pytest
from scipy.special import ndtr, log_ndtr

from onebit_radar.gamp import (BGPrior, GampControls, NMSE_FLOOR_DB, denoise_input, denoise_output,
                               denoise_output_real, detect_final, em_update, gamma2_from_gain, gamp_run,
                               probit_ratio, reconstruct_and_nmse)
from onebit_radar.pipeline import GridSpec
from oracles import bg_posterior, probit_posterior


def test_probit_ratio_against_scipy_and_tail():
    c = np.linspace(-5.9, 30, 200)
    lam, lpc = probit_ratio(c)
    ref = np.exp(-c**2 / 2 - 0.5 * math.log(2 * math.pi) - log_ndtr(c))
    assert np.allclose(lam, ref, rtol=1e-12)
    assert np.allclose(lpc, ref + c, rtol=1e-10, atol=1e-13)
    # deep tail: lambda ~ -c - 1/c + 2/c^3, lambda + c ~ -1/c
    c = np.array([-8.0, -40.0, -1e4])
    lam, lpc = probit_ratio(c)
    assert np.all(np.isfinite(lam)) and np.all(lpc > 0)
    assert lpc[-1] == pytest.approx(1e-4, rel=1e-6)
    # continuity across the switch
    a, b = probit_ratio(np.array([-6.0 - 1e-9, -6.0 + 1e-9]))
    assert a[0] == pytest.approx(a[1], rel=1e-8) and b[0] == pytest.approx(b[1], rel=1e-7)


def test_output_denoiser_against_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(150):
        p = rng.normal() * 10 ** rng.uniform(-2, 1)
        v = 10 ** rng.uniform(-3, 3)
        s2 = 10 ** rng.uniform(-3, 3)
        y = rng.choice([-1.0, 1.0])
        m, var = probit_posterior(p, v, y, s2)
        mm, vv = denoise_output_real(np.array([p]), v, np.array([y]), s2)
        assert abs(mm[0] - m) <= 1e-8 * max(1.0, abs(m))
        assert abs(vv[0] - var) <= 1e-8 * max(v, 1e-300)


def test_complex_output_denoiser_splits_parts():
    rng = np.random.default_rng(0)
    p = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    r = np.sign(rng.standard_normal(20)) + 1j * np.sign(rng.standard_normal(20))
    m, v = denoise_output(p, 0.8, r, 0.5)
    mr, vr = denoise_output_real(p.real, 0.4, r.real, 0.5)
    mi, vi = denoise_output_real(p.imag, 0.4, r.imag, 0.5)
    assert np.allclose(m, mr + 1j * mi) and np.allclose(v, vr + vi)


def test_input_denoiser_against_quadrature():
    rng = np.random.default_rng(12)
    for _ in range(150):
        rho = 10 ** rng.uniform(-4, -0.01)
        mu = complex(rng.normal(), rng.normal()) * 10 ** rng.uniform(-2, 0.5)
        s2 = 10 ** rng.uniform(-2, 2)
        tau = 10 ** rng.uniform(-2, 1)
        rhat = complex(rng.normal(), rng.normal()) * 10 ** rng.uniform(-1.5, 1)
        m, v, pi = bg_posterior(rhat, tau, rho, mu, s2)
        mm, vv, pp, _, _ = denoise_input(np.array([rhat]), tau, BGPrior(rho, mu, s2))
        scale = max(1.0, abs(m))
        assert abs(mm[0] - m) <= 1e-8 * scale
        assert abs(vv[0] - v) <= 1e-8 * max(1.0, v)
        assert abs(pp[0] - pi) <= 1e-8


def test_input_denoiser_limits():
    r = np.array([0.3 + 0.1j, -2.0 + 1j])
    m, v, pi, _, _ = denoise_input(r, 0.5, BGPrior(0.0, 0j, 1.0))
    assert np.all(m == 0) and np.all(pi == 0)
    m, v, pi, gam, nu = denoise_input(r, 0.5, BGPrior(1.0, 0j, 1.0))
    assert np.allclose(m, r * 1.0 / 1.5) and np.allclose(v, nu)
    with pytest.raises(ValueError):
        denoise_input(r, 0.0, BGPrior(0.5))


def test_em_update_recovers_moments():
    rng = np.random.default_rng(3)
    n = 200_000
    pi = (rng.uniform(size=n) < 0.2).astype(float)
    gam = 1.5 - 0.5j + rng.standard_normal(n) + 1j * rng.standard_normal(n)
    new = em_update(BGPrior(0.5), pi, gam, 0.0)
    assert new.rho == pytest.approx(0.2, abs=0.005)
    assert new.mean == pytest.approx(1.5 - 0.5j, abs=0.02)
    assert new.var == pytest.approx(2.0, rel=0.02)
    assert em_update(BGPrior(0.5), np.zeros(4), np.zeros(4), 1.0).rho == pytest.approx(1e-6)


def test_bg_prior_validation():
    with pytest.raises(ValueError):
        BGPrior(1.5)
    with pytest.raises(ValueError):
        BGPrior(0.5, 0j, 0.0)
    m, v = BGPrior(0.25, 2.0, 1.0).moments()
    assert m == 0.5 and v == pytest.approx(0.25 * 5 - 0.25)


def _sparse_problem(seed, snr_db=5.0):
    rng = np.random.default_rng(seed)
    g = GridSpec(1, (16, 4, 32))
    cells = np.unique(np.stack([rng.integers(0, m, 12) for m in g.sizes], axis=1), axis=0)
    op = g.operator(cells)
    x = np.zeros(op.num_cols, dtype=complex)
    act = rng.choice(op.num_cols, 3, replace=False)
    x[act] = math.sqrt(10 ** (snr_db / 10)) * np.exp(2j * np.pi * rng.uniform(size=3))
    sig = op.forward(x)
    noise = math.sqrt(0.5) * (rng.standard_normal(sig.size) + 1j * rng.standard_normal(sig.size))
    z = sig + noise
    r = np.where(z.real >= 0, 1.0, -1.0) + 1j * np.where(z.imag >= 0, 1.0, -1.0)
    return op, x, sig, r, act


@pytest.mark.parametrize("seed", range(4))
def test_gamp_recovers_sparse_amplitudes(seed):
    op, x, sig, r, act = _sparse_problem(seed, snr_db=-10.0)
    res = gamp_run(r, op, 0.5)
    assert res.reached_tol and not res.diverged
    assert np.allclose(np.abs(res.x_hat[act]), np.abs(x[act]), rtol=0.25)
    off = np.delete(np.abs(res.x_hat), act)
    assert off.max() < 0.2 * np.abs(x[act]).min()
    _, nmse = reconstruct_and_nmse(res.x_hat, op, sig)
    assert nmse < -10


def test_gamp_known_prior_and_controls():
    op, x, sig, r, act = _sparse_problem(7, snr_db=-10.0)
    prior = BGPrior(3 / op.num_cols, 0j, float(np.mean(np.abs(x[act]) ** 2)))
    res = gamp_run(r, op, 0.5, prior=prior, controls=GampControls(max_iter=300))
    assert res.prior == prior
    assert sorted(np.argsort(-np.abs(res.x_hat))[:3].tolist()) == sorted(act.tolist())
    with pytest.raises(ValueError):
        gamp_run(r[:-1], op, 0.5)


def test_gamp_deterministic():
    op, x, sig, r, act = _sparse_problem(2)
    a = gamp_run(r, op, 0.5)
    b = gamp_run(r, op, 0.5)
    assert np.array_equal(a.x_hat, b.x_hat) and a.trace == b.trace


def test_gamma2_rule():
    assert 20 * math.log10(gamma2_from_gain((200, 24, 1000))) == pytest.approx(-53.21, abs=0.01)
    assert 20 * math.log10(gamma2_from_gain((100, 10, 100))) == pytest.approx(-36.4, abs=0.01)


def test_detect_final_labels():
    class R:
        x_hat = np.array([1.0, 0.01, 0.5, 0.2])

    cells = np.array([[0, 0, 0], [1, 1, 1], [5, 0, 9], [7, 7, 7]])
    rep = detect_final(R, 0.1, cells, true_cells=[(0, 0, 1), (5, 0, 9), (3, 3, 3)], tol_cells=1,
                       grid_sizes=(8, 8, 10))
    assert rep.detected.tolist() == [0, 2, 3]
    assert rep.hits == [True, True, False]
    assert rep.false_alarms == 1
    with pytest.raises(ValueError):
        detect_final(R, -1.0)


def test_nmse_floor():
    op, x, sig, r, act = _sparse_problem(0)
    assert reconstruct_and_nmse(x, op, sig)[1] == NMSE_FLOOR_DB
