import numpy as np
import pytest

from onebit_radar.operator import ReducedOperator
from onebit_radar.pipeline import GridSpec
from oracles import dense_dictionary


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_kronecker(seed):
    rng = np.random.default_rng(seed)
    shape = (4, 4, 4)
    nu = rng.uniform(0, 1, (3, 5))
    op = ReducedOperator(*nu, shape)
    A = dense_dictionary(*nu, shape)
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    y = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert np.max(np.abs(op.forward(x) - A @ x)) < 1e-12
    assert np.max(np.abs(op.adjoint(y) - A.conj().T @ y)) < 1e-12
    assert abs(np.vdot(y, op.forward(x)) - np.vdot(op.adjoint(y), x)) < 1e-10


def test_long_axes_phase_accuracy():
    shape = (200, 24, 1000)
    nu = (np.array([0.123456789]), np.array([0.5]), np.array([0.987654321]))
    op = ReducedOperator(*nu, shape)
    assert np.allclose(np.abs(op.R[:, 0]), 1.0)
    assert op.R[999, 0] == pytest.approx(np.exp(2j * np.pi * 999 * 0.987654321), abs=1e-11)


def test_grid_operator_matches_fft():
    rng = np.random.default_rng(0)
    g = GridSpec(2, (4, 3, 8))
    x = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    Y = np.fft.fftn(x, s=g.sizes, axes=(0, 1, 2))
    idx = np.array([[0, 0, 0], [3, 5, 11], [7, 2, 15]])
    assert np.allclose(g.operator(idx).adjoint(x.reshape(-1)), Y[idx[:, 0], idx[:, 1], idx[:, 2]])


def test_empty_support_rejected():
    with pytest.raises(ValueError):
        ReducedOperator([], [], [], (2, 2, 2))
