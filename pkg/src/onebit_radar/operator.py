"""Matrix-free Kronecker dictionary restricted to a set of grid cells.

Column ``i`` is ``a_d(nu_d[i]) (x) a_sp(nu_sp[i]) (x) a_r(nu_r[i])`` with
``a(nu)[n] = exp(j 2 pi nu n)``; frequencies are in cycles per sample. The
flattened index is ``(k * L + l) * N + n``, matching a C-ordered (K, L, N)
cube.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _steer_matrix(nu: np.ndarray, n: int) -> np.ndarray:
    # (n, I); phase reduced mod 1 before scaling to keep it exact-ish for long axes
    ph = np.mod(np.outer(np.arange(n), nu), 1.0)
    return np.exp(2j * np.pi * ph)


@dataclass
class ReducedOperator:
    nu_d: np.ndarray
    nu_sp: np.ndarray
    nu_r: np.ndarray
    shape: tuple  # (K, L, N)

    def __post_init__(self):
        self.nu_d = np.atleast_1d(np.asarray(self.nu_d, dtype=float))
        self.nu_sp = np.atleast_1d(np.asarray(self.nu_sp, dtype=float))
        self.nu_r = np.atleast_1d(np.asarray(self.nu_r, dtype=float))
        if not (self.nu_d.size == self.nu_sp.size == self.nu_r.size):
            raise ValueError("frequency lists must have equal length")
        if self.nu_d.size == 0:
            raise ValueError("empty support: nothing to recover")
        K, L, N = (int(v) for v in self.shape)
        self.shape = (K, L, N)
        self.D = _steer_matrix(self.nu_d, K)
        self.S = _steer_matrix(self.nu_sp, L)
        self.R = _steer_matrix(self.nu_r, N)

    @property
    def num_rows(self) -> int:
        K, L, N = self.shape
        return K * L * N

    @property
    def num_cols(self) -> int:
        return self.nu_d.size

    @property
    def column_norm(self) -> float:
        return float(np.sqrt(self.num_rows))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """A x as a (K*L*N,) vector."""
        K, L, N = self.shape
        x = np.asarray(x, dtype=complex)
        B = (self.D[:, None, :] * self.S[None, :, :]) * x  # (K, L, I)
        return (B.reshape(K * L, -1) @ self.R.T).reshape(-1)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """A^H y for y of length K*L*N (or shaped like the cube)."""
        K, L, N = self.shape
        Y = np.asarray(y).reshape(K * L, N)
        T = (Y @ self.R.conj()).reshape(K, L, -1)  # (K, L, I)
        DS = self.D.conj()[:, None, :] * self.S.conj()[None, :, :]
        return np.einsum("kli,kli->i", DS, T)

    def dense(self) -> np.ndarray:
        """Explicit matrix; small instances only."""
        cols = [np.kron(np.kron(self.D[:, i], self.S[:, i]), self.R[:, i]) for i in range(self.num_cols)]
        return np.stack(cols, axis=1)


def make_reduced_operator(nu_d, nu_sp, nu_r, shape) -> ReducedOperator:
    return ReducedOperator(nu_d, nu_sp, nu_r, tuple(shape))
