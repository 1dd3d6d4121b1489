"""Discretized beat-signal data cube and the one-bit quantizer.

Cube layout is ``(K, L, N)`` = (pulse, element, fast-time sample), C order,
so flattening gives the slow-time-major vector the Kronecker dictionary
``a_d (x) a_sp (x) a_r`` acts on.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .windows import WindowSpec

DOMAINS = ("doppler", "spatial", "range")


def _default_windows() -> dict:
    return {d: WindowSpec("rect") for d in DOMAINS}


@dataclass(frozen=True)
class RadarParams:
    carrier_freq_hz: float = 24e9
    fm_slope_hz_per_s: float = 1e13
    pulse_interval_s: float = 2e-5
    bandwidth_hz: float = 100e6
    sample_rate_hz: float = 100e6
    num_pulses: int = 200
    num_elements: int = 24
    element_spacing_m: float = 0.00625
    num_fast_samples: int = 1000
    complex_noise_var: float = 1.0  # 2 * sigma_w^2
    windows: dict = field(default_factory=_default_windows)

    def __post_init__(self):
        self.validate()

    @classmethod
    def table1(cls, **overrides) -> "RadarParams":
        """Typical 24 GHz system: 200 pulses, 24 elements, 1000 fast-time samples."""
        kw = dict(
            windows={
                "doppler": WindowSpec("chebyshev", 60.0),
                "spatial": WindowSpec("taylor", 30.0, 4),
                "range": WindowSpec("chebyshev", 60.0),
            }
        )
        kw.update(overrides)
        return cls(**kw)

    def validate(self) -> None:
        for name in ("carrier_freq_hz", "fm_slope_hz_per_s", "pulse_interval_s",
                     "bandwidth_hz", "sample_rate_hz", "element_spacing_m"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")
        for name in ("num_pulses", "num_elements", "num_fast_samples"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v}")
        if not (np.isfinite(self.complex_noise_var) and self.complex_noise_var > 0):
            raise ValueError("complex_noise_var must be > 0")
        if not math.isclose(self.sample_rate_hz, self.bandwidth_hz, rel_tol=1e-12):
            raise ValueError("sample_rate_hz must equal bandwidth_hz (Nyquist sampling)")
        unknown = set(self.windows) - set(DOMAINS)
        if unknown:
            raise ValueError(f"unknown window domains {sorted(unknown)}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (int(self.num_pulses), int(self.num_elements), int(self.num_fast_samples))

    @property
    def prf(self) -> float:
        return 1.0 / self.pulse_interval_s

    @property
    def noise_std_per_part(self) -> float:
        return math.sqrt(self.complex_noise_var / 2)

    @property
    def wavelength_m(self) -> float:
        return 299_792_458.0 / self.carrier_freq_hz

    def window(self, domain: str) -> WindowSpec:
        return self.windows.get(domain, WindowSpec("rect"))

    def window_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        K, L, N = self.shape
        return (self.window("doppler").weights(K),
                self.window("spatial").weights(L),
                self.window("range").weights(N))


@dataclass(frozen=True)
class Target:
    amplitude: complex
    doppler_hz: float = 0.0
    spatial_freq: float = 0.0  # cycles per element
    beat_freq_hz: float = 0.0

    @classmethod
    def from_snr(cls, snr_db: float, noise_var: float, phase: float = 0.0, **freqs) -> "Target":
        return cls(amplitude=amplitude_from_snr(snr_db, noise_var, phase), **freqs)

    def normalized_freqs(self, params: RadarParams) -> tuple[float, float, float]:
        """Cycles per sample along (pulse, element, fast-time)."""
        return (self.doppler_hz * params.pulse_interval_s,
                self.spatial_freq,
                self.beat_freq_hz / params.sample_rate_hz)

    def check(self, params: RadarParams) -> None:
        if not np.isfinite(self.amplitude):
            raise ValueError("target amplitude must be finite")
        br = params.bandwidth_hz
        if not (-br <= self.beat_freq_hz <= 0):
            raise ValueError(f"beat frequency {self.beat_freq_hz} Hz outside [-B_r, 0]")
        if abs(self.spatial_freq) > 0.5:
            raise ValueError(f"spatial frequency {self.spatial_freq} outside [-0.5, 0.5]")
        if not (0 <= self.doppler_hz < params.prf):
            raise ValueError(f"Doppler {self.doppler_hz} Hz outside [0, PRF)")


@dataclass(frozen=True)
class TargetScene:
    targets: tuple = ()
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")
        seen = set()
        for t in self.targets:
            key = (t.doppler_hz, t.spatial_freq, t.beat_freq_hz)
            if key in seen:
                raise ValueError(f"duplicate target frequency triple {key}")
            seen.add(key)

    def check(self, params: RadarParams) -> None:
        for t in self.targets:
            t.check(params)


@dataclass(eq=False)
class DataCube:
    samples: np.ndarray  # complex (K, L, N)

    @property
    def shape(self):
        return self.samples.shape


@dataclass(eq=False)
class OneBitCube:
    samples: np.ndarray  # complex64 with parts in {-1, +1}

    @property
    def shape(self):
        return self.samples.shape


def trial_rng(master_seed: int, trial: int = 0) -> np.random.Generator:
    """Independent stream for ``trial`` under ``master_seed``.

    Streams depend only on the pair, so trials can be run in any order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(trial)]))


def steering(nu: float, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * nu * np.arange(n))


def noiseless_signal(scene: TargetScene, params: RadarParams, dtype=np.complex128) -> np.ndarray:
    K, L, N = params.shape
    out = np.zeros((K, L, N), dtype=dtype)
    for t in scene.targets:
        nd, nsp, nr = t.normalized_freqs(params)
        dsp = t.amplitude * np.outer(steering(nd, K), steering(nsp, L))
        out += (dsp[:, :, None] * steering(nr, N)[None, None, :]).astype(dtype, copy=False)
    return out


def synthesize_cube(scene: TargetScene, params: RadarParams) -> DataCube:
    """Multi-target beat signal plus circular white Gaussian noise."""
    params.validate()
    scene.check(params)
    rng = np.random.default_rng(scene.rng_seed)
    K, L, N = params.shape
    s = noiseless_signal(scene, params)
    sd = params.noise_std_per_part
    s += sd * rng.standard_normal((K, L, N))
    s += 1j * sd * rng.standard_normal((K, L, N))
    return DataCube(s)


def csign(x: np.ndarray) -> np.ndarray:
    """sign(Re) + j sign(Im) with sign(0) := +1."""
    re = np.where(x.real >= 0, 1.0, -1.0).astype(np.float32)
    im = np.where(x.imag >= 0, 1.0, -1.0).astype(np.float32)
    out = np.empty(x.shape, dtype=np.complex64)
    out.real = re
    out.imag = im
    return out


def quantize_one_bit(cube: DataCube | np.ndarray) -> OneBitCube:
    x = cube.samples if isinstance(cube, (DataCube, OneBitCube)) else np.asarray(cube)
    if not np.all(np.isfinite(x)):
        raise ValueError("cube contains non-finite samples")
    return OneBitCube(csign(x))


def amplitude_from_snr(snr_db: float, noise_var: float, phase: float = 0.0) -> complex:
    return complex(math.sqrt(noise_var * 10 ** (snr_db / 10)) * np.exp(1j * phase))


def snr_db(amplitude: complex, noise_var: float) -> float:
    if noise_var <= 0:
        raise ValueError("noise variance must be > 0")
    p = abs(amplitude) ** 2
    if p == 0:
        return float("-inf")
    return 10 * math.log10(p / noise_var)


def snr_of_target(target: Target, params: RadarParams) -> float:
    return snr_db(target.amplitude, params.complex_noise_var)


# --- flat binary cube files -------------------------------------------------
#
# header (little-endian, 24 bytes):
#   magic  b"OBRC" | version u16 | kind u16 (0 analog, 1 one-bit) | K u32 | L u32 | N u32 | pad u32
# analog payload: K*L*N pairs of float64 (re, im), C order over (k, l, n)
# one-bit payload: two bits per sample, sample i -> bit 2i (re) and bit 2i+1 (im)
#   of the little-endian bit stream (bit 0 = LSB of byte 0); 1 encodes +1, 0 encodes -1

MAGIC = b"OBRC"
VERSION = 1
_HEADER = struct.Struct("<4sHHIIII")


def write_cube(path, cube: DataCube | OneBitCube) -> None:
    x = cube.samples
    if x.ndim != 3:
        raise ValueError("cube must be 3-D")
    K, L, N = x.shape
    kind = 1 if isinstance(cube, OneBitCube) else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, kind, K, L, N, 0))
        if kind == 0:
            inter = np.empty(x.size * 2, dtype="<f8")
            inter[0::2] = x.real.ravel()
            inter[1::2] = x.imag.ravel()
            fh.write(inter.tobytes())
        else:
            bits = np.empty(x.size * 2, dtype=np.uint8)
            bits[0::2] = x.real.ravel() > 0
            bits[1::2] = x.imag.ravel() > 0
            fh.write(np.packbits(bits, bitorder="little").tobytes())


def read_cube(path) -> DataCube | OneBitCube:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for cube header")
    magic, version, kind, K, L, N, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("bad magic; not a cube file")
    if version != VERSION:
        raise ValueError(f"unsupported cube file version {version}")
    body = raw[_HEADER.size:]
    count = K * L * N
    if kind == 0:
        inter = np.frombuffer(body, dtype="<f8", count=2 * count)
        return DataCube((inter[0::2] + 1j * inter[1::2]).reshape(K, L, N))
    if kind == 1:
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8), bitorder="little", count=2 * count)
        out = np.empty(count, dtype=np.complex64)
        out.real = np.where(bits[0::2], 1.0, -1.0)
        out.imag = np.where(bits[1::2], 1.0, -1.0)
        return OneBitCube(out.reshape(K, L, N))
    raise ValueError(f"unknown cube kind {kind}")


def scene_from_snrs(snrs_db: Sequence[float], freqs: Sequence[tuple], params: RadarParams,
                    phases: Sequence[float] | None = None, seed: int = 0) -> TargetScene:
    """Scene from per-target SNRs and (doppler_hz, spatial_freq, beat_freq_hz) triples."""
    phases = phases if phases is not None else [0.0] * len(snrs_db)
    targets = [Target.from_snr(s, params.complex_noise_var, ph, doppler_hz=fd, spatial_freq=fsp,
                               beat_freq_hz=fr)
               for s, (fd, fsp, fr), ph in zip(snrs_db, freqs, phases)]
    return TargetScene(tuple(targets), seed)
