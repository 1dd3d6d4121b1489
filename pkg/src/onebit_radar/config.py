"""Flat key=value configuration with ``[section]`` headers.

Example::

    [radar]
    paper-default = table1      # or vc, fast-time; other keys then override
    [scene]
    target = -7, 2000, 0, -40e6  # snr_db, doppler_hz, spatial_freq, beat_hz
    [grid]
    r_a = 2
    [cfar]
    num_ref = 24                 # one value or three (doppler, spatial, range)
    alpha_db = 10.6

Unknown sections and keys are errors, reported with the line number. A
``[radar]`` section without ``paper-default`` must list every field.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .gamp import GampControls
from .pipeline import OsCfarConfig
from .scene import RadarParams, Target
from .windows import KINDS, WindowSpec


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + msg)


RADAR_FIELDS = ("carrier_freq_hz", "fm_slope_hz_per_s", "pulse_interval_s", "bandwidth_hz",
                "sample_rate_hz", "num_pulses", "num_elements", "element_spacing_m",
                "num_fast_samples", "complex_noise_var")
INT_FIELDS = {"num_pulses", "num_elements", "num_fast_samples"}


def _preset(name: str) -> RadarParams:
    if name == "table1":
        return RadarParams.table1()
    if name == "vc":
        from .experiments import vc_params

        return vc_params()
    if name == "fast-time":
        return RadarParams(num_pulses=1, num_elements=1)
    raise ConfigError(f"unknown paper-default preset {name!r} (table1, vc, fast-time)")


@dataclass
class ExperimentConfig:
    scenario: str = "custom"
    params: RadarParams | None = None
    targets: tuple = ()  # (snr_db, doppler_hz, spatial_freq, beat_hz)
    scene_seed: int = 0
    r_a: int = 1
    cfar: tuple = (OsCfarConfig(), OsCfarConfig(), OsCfarConfig())
    peak_only: bool = True
    combine: str = "and"
    th_db: float = 13.6
    gamma2: float | None = None  # explicit amplitude threshold overrides th_db
    snrs_db: tuple = ()
    trials: int = 1
    seed: int = 0
    gamp: GampControls = field(default_factory=GampControls)
    extra: dict = field(default_factory=dict)  # experiment-specific knobs

    def validate(self) -> None:
        if self.r_a < 1 or int(self.r_a) != self.r_a:
            raise ConfigError(f"grid.r_a must be an integer >= 1 (overgriding factor), got {self.r_a}")
        if self.trials < 1:
            raise ConfigError("experiment.trials must be >= 1")
        if self.combine not in ("and", "or"):
            raise ConfigError(f"cfar.combine must be 'and' or 'or', got {self.combine!r}")
        if self.gamma2 is not None and self.gamma2 < 0:
            raise ConfigError("detect.gamma2 must be >= 0")
        if self.params is not None:
            for t in self.targets:
                try:
                    self.make_target(t).check(self.params)
                except ValueError as e:
                    raise ConfigError(f"scene target {t}: {e}") from None

    def make_target(self, t, phase: float = 0.0) -> Target:
        p = self.params
        return Target.from_snr(t[0], p.complex_noise_var, phase, doppler_hz=t[1], spatial_freq=t[2],
                               beat_freq_hz=t[3])

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.params is not None:
            d["params"]["windows"] = {k: asdict(v) for k, v in self.params.windows.items()}
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _num(s: str, key: str, line: int, src: str, integer: bool = False):
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}", line, src) from None
    if not math.isfinite(v) and not key.endswith("alpha_db"):
        raise ConfigError(f"{key}: must be finite", line, src)
    if integer:
        if int(v) != v:
            raise ConfigError(f"{key}: expected an integer, got {s!r}", line, src)
        return int(v)
    return v


def _bool(s: str, key: str, line: int, src: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {s!r}", line, src)


def _list(s: str, key: str, line: int, src: str, integer: bool = False) -> tuple:
    return tuple(_num(x.strip(), key, line, src, integer) for x in s.split(",") if x.strip())


def _window(s: str, key: str, line: int, src: str) -> WindowSpec:
    # kind[:sidelobe_db[:nbar]]
    parts = [p.strip() for p in s.split(":")]
    if parts[0] not in KINDS:
        raise ConfigError(f"{key}: unknown window kind {parts[0]!r}", line, src)
    try:
        return WindowSpec(parts[0], *([float(parts[1])] if len(parts) > 1 else []),
                          *([int(parts[2])] if len(parts) > 2 else []))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{key}: {e}", line, src) from None


EXPERIMENT_KEYS = {
    # key: (kind, integer)
    "scenario": ("str", False), "snrs_db": ("list", False), "trials": ("num", True),
    "seed": ("num", True), "num_samples": ("num", True), "freqs": ("list", False),
    "excise_order": ("num", True), "snr1_db": ("num", False), "max_order": ("num", True),
    "calib_maps": ("num", True), "num_targets": ("num", True), "strong_snr_db": ("num", False),
    "max_trials": ("num", True), "target_rel_se": ("num", False), "spatial_bin": ("num", True),
    "r_a_list": ("list_int", True), "offgrid": ("bool", False),
}


def parse_text(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    radar: dict = {}
    radar_lines: dict = {}
    preset = None
    windows: dict = {}
    targets = []
    cfar = {"num_ref": (24,), "num_guard": (2,), "alpha_db": (8.0,), "eta": None}
    gamp = {}
    gamp_types = {f.name: f.type for f in fields(GampControls)}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("radar", "scene", "grid", "cfar", "gamp", "detect", "experiment"):
                raise ConfigError(f"unknown section [{section}]", ln, source)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", ln, source)
        if section is None:
            raise ConfigError("key outside any [section]", ln, source)
        key, val = (s.strip() for s in line.split("=", 1))
        qual = f"{section}.{key}"
        if section == "radar":
            if key == "paper-default":
                preset = val
            elif key.startswith("window."):
                dom = key.split(".", 1)[1]
                if dom not in ("doppler", "spatial", "range"):
                    raise ConfigError(f"unknown window domain in {qual}", ln, source)
                windows[dom] = _window(val, qual, ln, source)
            elif key in RADAR_FIELDS:
                radar[key] = _num(val, qual, ln, source, key in INT_FIELDS)
                radar_lines[key] = ln
            else:
                raise ConfigError(f"unknown key {qual}", ln, source)
        elif section == "scene":
            if key == "target":
                t = _list(val, qual, ln, source)
                if len(t) != 4:
                    raise ConfigError("scene.target needs snr_db, doppler_hz, spatial_freq, beat_hz",
                                      ln, source)
                targets.append(t)
            elif key == "seed":
                cfg.scene_seed = _num(val, qual, ln, source, True)
            else:
                raise ConfigError(f"unknown key {qual}", ln, source)
        elif section == "grid":
            if key != "r_a":
                raise ConfigError(f"unknown key {qual}", ln, source)
            v = _num(val, qual, ln, source)
            if v < 1 or int(v) != v:
                raise ConfigError(f"grid.r_a must be an integer >= 1 (overgriding factor), got {val}",
                                  ln, source)
            cfg.r_a = int(v)
        elif section == "cfar":
            if key in ("num_ref", "num_guard", "eta"):
                cfar[key] = _list(val, qual, ln, source, True)
            elif key == "alpha_db":
                cfar[key] = _list(val, qual, ln, source)
            elif key == "peak_only":
                cfg.peak_only = _bool(val, qual, ln, source)
            elif key == "combine":
                cfg.combine = val.lower()
            else:
                raise ConfigError(f"unknown key {qual}", ln, source)
        elif section == "gamp":
            if key not in gamp_types:
                raise ConfigError(f"unknown key {qual}", ln, source)
            if key in ("adaptive", "learn"):
                gamp[key] = _bool(val, qual, ln, source)
            else:
                gamp[key] = _num(val, qual, ln, source, key in ("max_iter", "em_every", "warmup"))
        elif section == "detect":
            if key == "th_db":
                cfg.th_db = _num(val, qual, ln, source)
            elif key == "gamma2":
                cfg.gamma2 = _num(val, qual, ln, source)
            else:
                raise ConfigError(f"unknown key {qual}", ln, source)
        elif section == "experiment":
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {qual}", ln, source)
            kind, integer = EXPERIMENT_KEYS[key]
            if kind == "str":
                v = val
            elif kind == "bool":
                v = _bool(val, qual, ln, source)
            elif kind.startswith("list"):
                v = _list(val, qual, ln, source, integer)
            else:
                v = _num(val, qual, ln, source, integer)
            if key in ("scenario", "trials", "seed"):
                setattr(cfg, key, v)
            elif key == "snrs_db":
                if not v:
                    raise ConfigError("experiment.snrs_db must be nonempty", ln, source)
                cfg.snrs_db = v
            else:
                cfg.extra[key] = v
    # radar parameters
    if preset is not None or radar or windows:
        if preset is not None:
            base = _preset(preset)
            kw = {k: getattr(base, k) for k in RADAR_FIELDS}
            kw["windows"] = dict(base.windows)
        else:
            missing = [k for k in RADAR_FIELDS if k not in radar]
            if missing:
                raise ConfigError(f"[radar] without paper-default is missing field(s): {', '.join(missing)}",
                                  None, source)
            kw = {"windows": {}}
        kw.update(radar)
        kw["windows"].update(windows)
        try:
            cfg.params = RadarParams(**kw)
        except ValueError as e:
            raise ConfigError(f"[radar]: {e}", None, source) from None
    cfg.targets = tuple(targets)
    cfg.cfar = _cfar_triplet(cfar, source)
    try:
        cfg.gamp = GampControls(**gamp)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[gamp]: {e}", None, source) from None
    try:
        cfg.validate()
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], None, source) from None
    return cfg


def _cfar_triplet(c: dict, source: str) -> tuple:
    def three(v, name):
        if v is None:
            return (None,) * 3
        if len(v) == 1:
            return v * 3
        if len(v) == 3:
            return v
        raise ConfigError(f"cfar.{name} needs one or three values", None, source)

    R, G, A, E = (three(c[k], k) for k in ("num_ref", "num_guard", "alpha_db", "eta"))
    try:
        return tuple(OsCfarConfig(int(r), int(g), float(a), None if e is None else int(e))
                     for r, g, a, e in zip(R, G, A, E))
    except ValueError as e:
        raise ConfigError(f"[cfar]: {e}", None, source) from None


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_text(p.read_text(), str(p))
