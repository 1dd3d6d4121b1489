"""Stage one: windowed 3-D FFT, three-axis OS-CFAR predetection, overgridding.

The map convention is ``y(c) = a(c)^H (w * r)`` i.e. a forward DFT of the
windowed cube, so a target with normalized frequency ``nu`` peaks at bin
``round(nu * C) mod C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operator import ReducedOperator
from .scene import DataCube, OneBitCube, RadarParams

AXES = ("doppler", "spatial", "range")


@dataclass(frozen=True)
class GridSpec:
    r_a: int = 1
    shape: tuple = (1, 1, 1)  # (K, L, N)

    def __post_init__(self):
        if int(self.r_a) != self.r_a or self.r_a < 1:
            raise ValueError(f"overgridding factor r_a must be an integer >= 1, got {self.r_a}")
        if len(self.shape) != 3 or any(int(v) < 1 for v in self.shape):
            raise ValueError("shape must be three positive sizes")

    @classmethod
    def for_params(cls, params: RadarParams, r_a: int = 1) -> "GridSpec":
        return cls(int(r_a), params.shape)

    @property
    def sizes(self) -> tuple[int, int, int]:
        """(M_d, M_sp, M_r); the FFT sizes equal the grid sizes.

        A degenerate axis (length 1) stays at one cell: overgridding it would
        only duplicate dictionary columns.
        """
        return tuple(int(self.r_a * v) if v > 1 else 1 for v in self.shape)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.sizes))

    def normalized(self, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cycles per sample of grid cells ``idx`` (array (..., 3))."""
        idx = np.asarray(idx)
        Md, Msp, Mr = self.sizes
        return idx[..., 0] / Md, idx[..., 1] / Msp, idx[..., 2] / Mr

    def nearest_cell(self, nu: tuple) -> tuple[int, int, int]:
        """Nearest grid cell to normalized frequencies, ties toward -inf."""
        out = []
        for v, M in zip(nu, self.sizes):
            out.append(int(math.ceil(v * M - 0.5)) % M)
        return tuple(out)

    def operator(self, idx) -> ReducedOperator:
        nd, nsp, nr = self.normalized(np.atleast_2d(idx))
        return ReducedOperator(nd, nsp, nr, self.shape)


def physical_freqs(idx, grid: GridSpec, params: RadarParams):
    """(f_d Hz in [0, PRF), f_sp in [-0.5, 0.5), f_r Hz in [-f_s, 0))."""
    nd, nsp, nr = grid.normalized(idx)
    fd = nd * params.prf
    fsp = np.mod(nsp + 0.5, 1.0) - 0.5
    fr = (np.mod(nr, 1.0) - 1.0) * params.sample_rate_hz
    return fd, fsp, fr


@dataclass(eq=False)
class FreqMap3D:
    values: np.ndarray  # complex (M_d, M_sp, M_r)
    grid: GridSpec

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def range_doppler_slice(self, c_sp: int) -> np.ndarray:
        return self.values[:, c_sp, :]


def _window_cube(x: np.ndarray, windows) -> np.ndarray:
    if windows is None:
        return x
    wd, wsp, wr = (np.asarray(w, dtype=float) for w in windows)
    return x * (wd[:, None, None] * wsp[None, :, None] * wr[None, None, :])


def _samples(cube) -> np.ndarray:
    return cube.samples if isinstance(cube, (DataCube, OneBitCube)) else np.asarray(cube)


def fft3d(cube, grid: GridSpec, windows=None) -> FreqMap3D:
    x = _samples(cube)
    if tuple(x.shape) != tuple(grid.shape):
        raise ValueError(f"cube shape {x.shape} does not match grid {grid.shape}")
    if windows is not None:
        for w, n in zip(windows, x.shape):
            if len(w) != n:
                raise ValueError("window length does not match cube axis")
    y = np.fft.fftn(_window_cube(x, windows), s=grid.sizes, axes=(0, 1, 2))
    return FreqMap3D(y, grid)


def fft3d_magnitude(cube, grid: GridSpec, windows=None, chunk: int = 64) -> np.ndarray:
    """|3-D FFT| as float32, built axis by axis to bound peak memory."""
    x = _samples(cube)
    if tuple(x.shape) != tuple(grid.shape):
        raise ValueError(f"cube shape {x.shape} does not match grid {grid.shape}")
    Md, Msp, Mr = grid.sizes
    y = np.fft.fft(_window_cube(x, windows).astype(np.complex64), n=Mr, axis=2).astype(np.complex64)
    y = np.fft.fft(y, n=Msp, axis=1).astype(np.complex64)
    out = np.empty((Md, Msp, Mr), dtype=np.float32)
    for j in range(0, Mr, chunk):
        out[:, :, j:j + chunk] = np.abs(np.fft.fft(y[:, :, j:j + chunk], n=Md, axis=0))
    return out


def cell_values(cube, grid: GridSpec, idx, windows=None) -> np.ndarray:
    """Exact map values y(c) at a few cells, without forming the map."""
    x = _window_cube(_samples(cube), windows)
    return grid.operator(idx).adjoint(x.reshape(-1))


# --- OS-CFAR ---------------------------------------------------------------


@dataclass(frozen=True)
class OsCfarConfig:
    num_ref: int = 24  # R, split R//2 before and R - R//2 after the guards
    num_guard: int = 2  # G per side
    alpha_db: float = 8.0  # scale factor, amplitude dB
    eta: int | None = None  # order index, default floor(0.75 R)

    def __post_init__(self):
        if self.num_ref < 1 or self.num_guard < 0:
            raise ValueError("need R >= 1 and G >= 0")
        e = self.order
        if not 1 <= e <= self.num_ref:
            raise ValueError(f"order index {e} outside [1, R={self.num_ref}]")

    @property
    def order(self) -> int:
        return int(self.eta) if self.eta is not None else int(math.floor(0.75 * self.num_ref))

    @property
    def alpha(self) -> float:
        return 10 ** (self.alpha_db / 20)

    def offsets(self) -> np.ndarray:
        left = self.num_ref // 2
        right = self.num_ref - left
        g = self.num_guard
        return np.concatenate([np.arange(-g - left, -g), np.arange(g + 1, g + 1 + right)])

    def check_length(self, n: int) -> None:
        if self.num_ref + 2 * self.num_guard >= n:
            raise ValueError(f"R + 2G = {self.num_ref + 2 * self.num_guard} must be below axis length {n}")

    def with_alpha(self, alpha_db: float) -> "OsCfarConfig":
        return OsCfarConfig(self.num_ref, self.num_guard, alpha_db, self.eta)

    def scaled(self, r_a: int) -> "OsCfarConfig":
        """Reference and guard extents stretched for an r_a-times finer grid."""
        R = self.num_ref * r_a
        eta = None if self.eta is None else self.eta * r_a
        return OsCfarConfig(R, self.num_guard * r_a, self.alpha_db, eta)


def _local_peak(mag: np.ndarray, axis: int) -> np.ndarray:
    return (mag >= np.roll(mag, 1, axis=axis)) & (mag >= np.roll(mag, -1, axis=axis))


def os_cfar_1d(line: np.ndarray, cfg: OsCfarConfig, peak_only: bool = False) -> np.ndarray:
    """Detections along a circular 1-D magnitude line."""
    line = np.asarray(line, dtype=float)
    n = line.size
    cfg.check_length(n)
    ref = line[(np.arange(n)[:, None] + cfg.offsets()[None, :]) % n]
    x_eta = np.partition(ref, cfg.order - 1, axis=1)[:, cfg.order - 1]
    det = line > cfg.alpha * x_eta
    if peak_only:
        det &= _local_peak(line, 0)
    return det


def _axis_ratio(mag: np.ndarray, cells: np.ndarray, axis: int, cfg: OsCfarConfig,
                chunk: int = 1 << 18) -> np.ndarray:
    """|y| / x_eta along ``axis`` for cells (n, 3)."""
    n = mag.shape[axis]
    off = cfg.offsets()
    out = np.empty(len(cells))
    for s in range(0, len(cells), chunk):
        c = cells[s:s + chunk]
        idx = [np.repeat(c[:, a:a + 1], off.size, axis=1) for a in range(3)]
        idx[axis] = (c[:, axis:axis + 1] + off[None, :]) % n
        ref = mag[idx[0], idx[1], idx[2]]
        x_eta = np.partition(ref, cfg.order - 1, axis=1)[:, cfg.order - 1].astype(float)
        cut = mag[c[:, 0], c[:, 1], c[:, 2]].astype(float)
        with np.errstate(divide="ignore"):
            out[s:s + chunk] = np.where(x_eta > 0, cut / np.where(x_eta > 0, x_eta, 1), np.inf)
    return out


def candidate_cells(mag: np.ndarray, peak_only: bool) -> np.ndarray:
    keep = np.ones(mag.shape, dtype=bool)
    if peak_only:
        for a in range(3):
            if mag.shape[a] > 1:
                keep &= _local_peak(mag, a)
    return np.argwhere(keep)


def critical_scale(mag: np.ndarray, cfgs, peak_only: bool = True, combine: str = "and",
                   floor_db: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per candidate cell, the largest alpha (amplitude) at which it is still detected.

    A cell is detected at scale ``alpha`` iff ``alpha < critical``. With
    ``floor_db`` set, cells whose critical scale is provably below it are
    dropped early (AND rule only).
    """
    cfgs = _active(_three(cfgs), mag.shape)
    for a, c in enumerate(cfgs):
        if c is not None:
            c.check_length(mag.shape[a])
    cells = candidate_cells(mag, peak_only)
    crit = np.full(len(cells), np.inf) if combine == "and" else np.zeros(len(cells))
    lo = None if floor_db is None else 10 ** (floor_db / 20)
    for a, c in enumerate(cfgs):
        if c is None:
            continue
        r = _axis_ratio(mag, cells, a, c)
        if combine == "and":
            crit = np.minimum(crit, r)
            if lo is not None:
                keep = crit > lo
                cells, crit = cells[keep], crit[keep]
        elif combine == "or":
            crit = np.maximum(crit, r)
        else:
            raise ValueError(f"unknown combination rule {combine!r}")
    return cells, crit


def _active(cfgs, shape):
    """Axes of length 1 (degenerate cubes) carry no CFAR test."""
    return tuple(None if n == 1 else c for c, n in zip(cfgs, shape))


def _three(cfgs):
    if isinstance(cfgs, OsCfarConfig):
        return (cfgs, cfgs, cfgs)
    cfgs = tuple(cfgs)
    if len(cfgs) != 3:
        raise ValueError("need one CFAR config per axis")
    return cfgs


@dataclass
class PreDetectionSet:
    indices: np.ndarray  # (I_pd, 3) int grid cells
    values: np.ndarray  # complex map values at those cells
    grid: GridSpec
    magnitudes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if self.magnitudes is None:
            self.magnitudes = np.abs(self.values)
        if len({tuple(r) for r in self.indices.tolist()}) != len(self.indices):
            raise ValueError("duplicate predetected cells")

    @property
    def count(self) -> int:
        return len(self.indices)

    def operator(self) -> ReducedOperator:
        return self.grid.operator(self.indices)

    def contains(self, cell) -> bool:
        return bool(np.any(np.all(self.indices == np.asarray(cell)[None, :], axis=1)))

    def position(self, cell) -> int | None:
        hit = np.flatnonzero(np.all(self.indices == np.asarray(cell)[None, :], axis=1))
        return int(hit[0]) if hit.size else None


def predetect(fmap: FreqMap3D | np.ndarray, cfgs, grid: GridSpec | None = None, *,
              combine: str = "and", peak_only: bool = True, values=None) -> PreDetectionSet:
    """Cells passing the 1-D OS-CFAR test along the three axes.

    ``fmap`` is a FreqMap3D or a bare magnitude array (then ``grid`` is
    required and ``values`` may supply complex amplitudes via a callable
    ``values(indices)``).
    """
    if isinstance(fmap, FreqMap3D):
        mag, grid = fmap.magnitude, fmap.grid
    else:
        mag = np.asarray(fmap)
        if grid is None:
            raise ValueError("grid required with a bare magnitude map")
    cfgs = _three(cfgs)
    if any(c is not None and np.isinf(c.alpha_db) and c.alpha_db > 0 for c in cfgs):
        return PreDetectionSet(np.zeros((0, 3), dtype=np.int64), np.zeros(0), grid)
    act = [c for c in _active(cfgs, mag.shape) if c is not None]
    cells, crit = critical_scale(mag, cfgs, peak_only, combine,
                                 floor_db=min(c.alpha_db for c in act) if combine == "and" and act else None)
    # the critical scale mixes axes; apply each axis's own alpha
    if len({c.alpha_db for c in act}) <= 1:
        keep = crit > (act[0].alpha if act else 0.0)
    else:
        keep = np.ones(len(cells), dtype=bool) if combine == "and" else np.zeros(len(cells), dtype=bool)
        for a, c in enumerate(_active(cfgs, mag.shape)):
            if c is None:
                continue
            ok = _axis_ratio(mag, cells, a, c) > c.alpha
            keep = keep & ok if combine == "and" else keep | ok
    cells = cells[keep]
    if isinstance(fmap, FreqMap3D):
        vals = fmap.values[cells[:, 0], cells[:, 1], cells[:, 2]]
    elif values is not None:
        vals = values(cells) if len(cells) else np.zeros(0, dtype=complex)
    else:
        vals = mag[cells[:, 0], cells[:, 1], cells[:, 2]].astype(complex)
    return PreDetectionSet(cells, vals, grid, mag[cells[:, 0], cells[:, 1], cells[:, 2]].astype(float))


def integration_gain_db(shape) -> float:
    return float(10 * np.log10(np.prod(shape)))
