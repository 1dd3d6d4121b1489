"""Command-line entry point: ``onebit-radar <subcommand> [options]``.

Every run writes under one output directory: CSV tables, a ``manifest.json``
(config, config hash, seed, package and library versions, argv) and, last, a
``COMPLETE`` marker. Outputs are never cleaned up on failure.

Exit codes: 0 success, 2 usage, 3 config error, 4 runtime error,
5 results written but GAMP did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as E
from . import harmonics as H
from .config import ConfigError, ExperimentConfig, parse_config
from .gamp import detect_final, gamma2_from_gain, gamp_run, reconstruct_and_nmse
from .pipeline import GridSpec, cell_values, fft3d_magnitude, physical_freqs, predetect
from .scene import (OneBitCube, RadarParams, TargetScene, noiseless_signal, quantize_one_bit,
                    read_cube, synthesize_cube, trial_rng, write_cube)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_NONCONVERGED = 0, 2, 3, 4, 5
OUT_ENV = "ONEBIT_RADAR_OUT"
MARKER = "COMPLETE"


class NonConvergence(Exception):
    pass


# --- artifact writing ----------------------------------------------------------


def _fmt(key: str, v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if key.endswith("_db"):
            return f"{v:.2f}"
        return repr(v)
    return str(v)


def _expand(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, (complex, np.complexfloating)):
            out[f"{k}_re"], out[f"{k}_im"] = float(v.real), float(v.imag)
        else:
            out[k] = v
    return out


def write_csv(path: Path, rows: list[dict]) -> Path:
    rows = [_expand(r) for r in rows]
    keys: list = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(k, r[k]) if k in r else "" for k in keys])
    return path


def _git_tag() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


class RunDir:
    def __init__(self, path: Path):
        self.path = path
        if (path / MARKER).exists():
            raise FileExistsError(f"{path} already holds a completed run; choose another --out")
        path.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []

    def csv(self, name: str, rows: list[dict]) -> Path:
        p = write_csv(self.path / name, rows)
        self.outputs.append(name)
        return p

    def json(self, name: str, obj) -> Path:
        p = self.path / name
        p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))
        self.outputs.append(name)
        return p

    def manifest(self, args, cfg: ExperimentConfig | None, extra: dict | None = None) -> None:
        import scipy

        m = {
            "subcommand": args.command, "argv": sys.argv[1:], "seed": args.seed,
            "jobs": args.jobs, "package_version": __version__, "code_version": _git_tag(),
            "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version(),
            "config_path": str(args.config) if args.config else None,
            "config_text": Path(args.config).read_text() if args.config else None,
            "config": cfg.to_dict() if cfg else None, "config_sha256": cfg.digest() if cfg else None,
            "outputs": self.outputs, "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        m.update(extra or {})
        (self.path / "manifest.json").write_text(json.dumps(m, indent=2, sort_keys=True, default=_jsonable))

    def complete(self) -> None:
        (self.path / MARKER).write_text("ok\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (complex, np.complexfloating)):
        return [o.real, o.imag]
    return str(o)


# --- subcommands ---------------------------------------------------------------


def _cfg(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.scene_seed = args.seed
    return cfg


def _need_params(cfg: ExperimentConfig, default: RadarParams | None = None) -> RadarParams:
    if cfg.params is None:
        if default is None:
            raise ConfigError("this subcommand needs a [radar] section")
        cfg.params = default
    return cfg.params


def _scene(cfg: ExperimentConfig) -> TargetScene:
    p = _need_params(cfg)
    rng = trial_rng(cfg.scene_seed, 0)
    phases = rng.uniform(0, 2 * np.pi, len(cfg.targets))
    return TargetScene(tuple(cfg.make_target(t, ph) for t, ph in zip(cfg.targets, phases)), cfg.scene_seed)


def cmd_synth(args, cfg, run: RunDir) -> int:
    scene = _scene(cfg)
    cube = synthesize_cube(scene, cfg.params)
    write_cube(run.path / "cube.bin", cube)
    run.outputs.append("cube.bin")
    run.csv("targets.csv", [{"amplitude": t.amplitude, "doppler_hz": t.doppler_hz,
                             "spatial_freq": t.spatial_freq, "beat_freq_hz": t.beat_freq_hz}
                            for t in scene.targets])
    return EXIT_OK


def cmd_quantize(args, cfg, run: RunDir) -> int:
    cube = read_cube(args.cube)
    if isinstance(cube, OneBitCube):
        raise ValueError("input cube is already one-bit")
    write_cube(run.path / "onebit.bin", quantize_one_bit(cube))
    run.outputs.append("onebit.bin")
    return EXIT_OK


def cmd_harmonics(args, cfg, run: RunDir) -> int:
    freqs = tuple(cfg.extra.get("freqs", (0.4, 0.05)))
    if args.sweep:
        ac = E.AttenuationConfig(seed=cfg.seed)
        if cfg.snrs_db:
            ac.snrs_db = cfg.snrs_db
        for k in ("num_samples", "target_rel_se", "max_trials"):
            if k in cfg.extra:
                setattr(ac, k, cfg.extra[k])
        if "freqs" in cfg.extra:
            ac.freqs = freqs
        run.csv("attenuation.csv", E.run_attenuation_sweep(ac, mc=not args.no_mc))
        return EXIT_OK
    snr = args.snr if args.snr is not None else (cfg.snrs_db[0] if cfg.snrs_db else -5.0)
    rows = E.harmonic_table(snr, freqs, int(cfg.extra.get("max_order", 3)),
                            0 if args.no_mc else int(cfg.extra.get("num_samples", 100_000)),
                            cfg.seed, cfg.trials)
    run.csv("harmonics.csv", rows)
    return EXIT_OK


def cmd_spectrum(args, cfg, run: RunDir) -> int:
    snr = args.snr if args.snr is not None else (cfg.snrs_db[0] if cfg.snrs_db else -5.0)
    n = int(cfg.extra.get("num_samples", 4096))
    freqs = tuple(cfg.extra.get("freqs", (0.4, 0.05)))
    tones = H.ToneSpec.from_snrs([snr] * len(freqs), freqs)
    rng = np.random.default_rng(cfg.seed)
    t = np.arange(n)
    u = sum(a * np.exp(2j * np.pi * f * t) for a, f in zip(tones.amplitudes, freqs))
    x = u + tones.noise_std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    y = np.where(x.real >= 0, 1.0, -1.0) + 1j * np.where(x.imag >= 0, 1.0, -1.0)
    rows = []
    for name, s in (("high_precision", x), ("one_bit", y)):
        S = np.fft.fftshift(np.fft.fft(s)) / n
        f = np.fft.fftshift(np.fft.fftfreq(n))
        rows += [{"system": name, "frequency": float(fi), "magnitude_db": 20 * np.log10(max(abs(v), 1e-300))}
                 for fi, v in zip(f, S)]
    run.csv("spectrum.csv", rows)
    lines = H.harmonic_lines(freqs, int(cfg.extra.get("max_order", 3)), 1.0, tones.amplitudes, tones.noise_std)
    run.csv("lines.csv", [{"k": str(ln.k), "kind": ln.kind, "frequency": ln.frequency,
                           "amplitude_db": 20 * np.log10(abs(ln.avg_amplitude))} for ln in lines])
    return EXIT_OK


def cmd_detect(args, cfg, run: RunDir) -> int:
    p = _need_params(cfg)
    truth = None
    if args.cube:
        cube = read_cube(args.cube)
        if cube.shape != p.shape:
            raise ValueError(f"cube shape {cube.shape} does not match radar shape {p.shape}")
        ob = cube if isinstance(cube, OneBitCube) else quantize_one_bit(cube)
    else:
        scene = _scene(cfg)
        ob = quantize_one_bit(synthesize_cube(scene, p))
        truth = noiseless_signal(scene, p)
    grid = GridSpec.for_params(p, cfg.r_a)
    w = p.window_weights()
    mag = fft3d_magnitude(ob, grid, w)
    pds = predetect(mag, cfg.cfar, grid, combine=cfg.combine, peak_only=cfg.peak_only,
                    values=lambda c: cell_values(ob, grid, c, w))
    sb = int(cfg.extra.get("spatial_bin", 0)) % grid.sizes[1]
    sl = mag[:, sb, :]
    run.csv("range_doppler_slice.csv",
            [{"m_d": i, "m_r": j, "magnitude_db": 20 * np.log10(max(float(sl[i, j]), 1e-300))}
             for i in range(sl.shape[0]) for j in range(sl.shape[1])])
    del mag
    fd, fsp, fr = physical_freqs(pds.indices, grid, p)
    run.csv("predetections.csv",
            [{"m_d": int(c[0]), "m_sp": int(c[1]), "m_r": int(c[2]),
              "magnitude_db": 20 * np.log10(max(abs(v), 1e-300)), "phase": float(np.angle(v)),
              "doppler_hz": float(a), "spatial_freq": float(b), "beat_freq_hz": float(c_)}
             for c, v, a, b, c_ in zip(pds.indices, pds.values, fd, fsp, fr)])
    if not args.stage2:
        return EXIT_OK
    if pds.count == 0:
        run.json("summary.json", {"num_pt": 0, "note": "no predetections; GAMP skipped"})
        return EXIT_OK
    op = pds.operator()
    res = gamp_run(ob.samples.reshape(-1), op, p.noise_std_per_part**2, controls=cfg.gamp)
    g2 = cfg.gamma2 if cfg.gamma2 is not None else gamma2_from_gain(p.shape, cfg.th_db)
    rep = detect_final(res, g2, pds.indices)
    det = set(rep.detected.tolist())
    run.csv("gamp.csv", [{"index": i, "m_d": int(c[0]), "m_sp": int(c[1]), "m_r": int(c[2]),
                          "magnitude_db": 20 * np.log10(max(abs(x), 1e-300)), "phase": float(np.angle(x)),
                          "activity": float(a), "detected": i in det}
                         for i, (c, x, a) in enumerate(zip(pds.indices, res.x_hat, res.activity))])
    summ = {"num_pt": pds.count, "iterations": res.iterations, "converged": res.converged,
            "reached_tol": res.reached_tol, "monotone": res.monotone, "diverged": res.diverged,
            "prior": {"rho": res.prior.rho, "mean": res.prior.mean, "var": res.prior.var},
            "gamma2": g2, "gamma2_db": 20 * math.log10(g2) if g2 > 0 else None,
            "num_detected": len(det)}
    if truth is not None:
        summ["nmse_db"] = reconstruct_and_nmse(res.x_hat, op, truth)[1]
    run.json("summary.json", summ)
    if not res.converged:
        raise NonConvergence(f"GAMP stopped after {res.iterations} iterations without a monotone converged trace")
    return EXIT_OK


def cmd_snr_loss(args, cfg, run: RunDir) -> int:
    sc = E.SnrLossConfig(seed=cfg.seed, trials=cfg.trials if args.config else 100)
    if cfg.snrs_db:
        sc.snr2_db = cfg.snrs_db
    if "snr1_db" in cfg.extra:
        sc.snr1_db = cfg.extra["snr1_db"]
    if "num_samples" in cfg.extra:
        sc.num_samples = cfg.extra["num_samples"]
    run.csv("snr_loss.csv", E.run_snr_loss(sc))
    return EXIT_OK


def cmd_gaussianity(args, cfg, run: RunDir) -> int:
    snrs = cfg.snrs_db or ((args.snr,) if args.snr is not None else (-15.0, -5.0, 0.0))
    rows, acs = [], []
    for s in snrs:
        orders = (cfg.extra["excise_order"],) if "excise_order" in cfg.extra else ((3, 5) if s >= 0 else (3,))
        for o in orders:
            gc = E.GaussianityConfig(snr_db=s, excise_order=o, seed=cfg.seed)
            if "num_samples" in cfg.extra:
                gc.num_samples = cfg.extra["num_samples"]
            r = E.run_gaussianity_check(gc)
            ac = r.pop("autocorr")
            rows.append(r)
            acs += [{"snr_db": s, "excise_order": o, "lag": i + 1, "abs_autocorr": float(v)}
                    for i, v in enumerate(ac)]
    run.csv("gaussianity.csv", rows)
    run.csv("autocorrelation.csv", acs)
    return EXIT_OK


def cmd_suppress(args, cfg, run: RunDir) -> int:
    sc = E.SuppressionConfig(seed=cfg.seed, trials=cfg.trials if args.config else 20)
    if cfg.params is not None:
        sc.params = cfg.params
    off = args.offgrid or bool(cfg.extra.get("offgrid", False))
    sc.targets = E.OFFGRID if off else E.ONGRID
    sc.r_a = tuple(cfg.extra.get("r_a_list", (1, 2, 3, 4) if off else (2,)))
    sc.gamp = cfg.gamp
    sc.th_db = cfg.th_db
    if args.config:
        sc.alpha_db = cfg.cfar[0].alpha_db
        sc.num_ref, sc.num_guard = cfg.cfar[0].num_ref, cfg.cfar[0].num_guard
    rows = E.run_suppression_scenarios(sc)
    run.csv("suppression.csv", rows)
    summary = []
    for ra in sc.r_a:
        res = [r["harmonic_residual_db"] for r in rows if r["r_a"] == ra and "harmonic_residual_db" in r]
        summary.append({"r_a": ra, "trials": len(res),
                        "median_harmonic_residual_db": float(np.median(res)) if res else float("nan")})
    run.csv("suppression_summary.csv", summary)
    return EXIT_OK


def cmd_compare(args, cfg, run: RunDir) -> int:
    dc = E.DetectionConfig(scenario=args.scenario, seed=cfg.seed, gamp=cfg.gamp)
    if args.config:
        dc.trials = cfg.trials
        if cfg.params is not None:
            dc.params = cfg.params
        dc.r_a = cfg.r_a
        dc.alpha_db = cfg.cfar[0].alpha_db
        dc.num_ref = tuple(c.num_ref for c in cfg.cfar)
        dc.num_guard = tuple(c.num_guard for c in cfg.cfar)
        dc.peak_only = cfg.peak_only
        dc.th_db = cfg.th_db
        for k in ("calib_maps", "num_targets", "strong_snr_db"):
            if k in cfg.extra:
                setattr(dc, k, cfg.extra[k])
    if cfg.snrs_db:
        dc.snrs_db = cfg.snrs_db
    out = E.run_detection_comparison(dc)
    rows = out["rows"]
    run.csv("detection_onebit.csv", [{k: r[k] for k in ("scenario", "snr_db", "trials", "pd_onebit",
                                                          "pd_onebit_lo", "pd_onebit_hi", "fa_onebit",
                                                          "gamp_nonconverged")} for r in rows])
    run.csv("detection_conventional.csv", [{k: r[k] for k in ("scenario", "snr_db", "trials", "pd_conv",
                                                                "pd_conv_lo", "pd_conv_hi", "fa_conv",
                                                                "alpha_conv_db")} for r in rows])
    run.json("comparison.json", {k: v for k, v in out.items() if k != "rows"})
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "quantize": cmd_quantize, "harmonics": cmd_harmonics, "spectrum": cmd_spectrum,
    "detect": cmd_detect, "snr-loss": cmd_snr_loss, "gaussianity": cmd_gaussianity,
    "suppress": cmd_suppress, "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onebit-radar", description="One-bit LFMCW radar toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument("--out", type=Path, help=f"run directory (default ${OUT_ENV}/<cmd> or ./runs/<cmd>)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--jobs", type=int, default=1, help="parallelism degree (recorded; runs are serial)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.add_parser("synth", parents=[common], help="synthesize a data cube from a scene")
    q = sub.add_parser("quantize", parents=[common], help="one-bit quantize a cube file")
    q.add_argument("--cube", type=Path, required=True)
    h = sub.add_parser("harmonics", parents=[common], help="harmonic line table or attenuation sweep")
    h.add_argument("--snr", type=float)
    h.add_argument("--sweep", action="store_true", help="attenuation sweep over experiment.snrs_db")
    h.add_argument("--no-mc", action="store_true", help="closed forms only")
    s = sub.add_parser("spectrum", parents=[common], help="two-tone spectrum, high precision vs one-bit")
    s.add_argument("--snr", type=float)
    d = sub.add_parser("detect", parents=[common], help="stage-1 predetection and optional stage-2 GAMP")
    g = d.add_mutually_exclusive_group()
    g.add_argument("--stage1", action="store_true", help="FFT + OS-CFAR only (default)")
    g.add_argument("--stage2", action="store_true", help="also run DR-GAMP")
    d.add_argument("--cube", type=Path, help="cube file instead of synthesizing the config scene")
    sub.add_parser("snr-loss", parents=[common], help="one-bit SNR loss sweep")
    ga = sub.add_parser("gaussianity", parents=[common], help="normality and whiteness of one-bit noise")
    ga.add_argument("--snr", type=float)
    sp = sub.add_parser("suppress", parents=[common], help="harmonic suppression on the K=200, L=24, N=1000 reference system")
    sp.add_argument("--offgrid", action="store_true")
    c = sub.add_parser("compare", parents=[common], help="Pd comparison against a conventional receiver")
    c.add_argument("--scenario", type=int, choices=(1, 2), default=1)
    return ap


def dispatch(args) -> int:
    try:
        cfg = _cfg(args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(os.environ.get(OUT_ENV, "runs"))
    out = args.out if args.out else root / args.command
    try:
        run = RunDir(out)
    except (OSError, FileExistsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    t0 = time.time()
    status = EXIT_OK
    note = None
    try:
        status = COMMANDS[args.command](args, cfg, run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as e:
        note = str(e)
        print(f"warning: {e}", file=sys.stderr)
        status = EXIT_NONCONVERGED
    except Exception as e:  # noqa: BLE001 - any failure is a runtime error for the caller
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        run.manifest(args, cfg, {"status": "failed", "error": f"{type(e).__name__}: {e}"})
        return EXIT_RUNTIME
    run.manifest(args, cfg, {"status": "ok" if status == EXIT_OK else "nonconverged", "note": note,
                             "elapsed_s": round(time.time() - t0, 3)})
    run.complete()
    if args.verbose:
        print(f"wrote {len(run.outputs)} file(s) to {run.path}")
    return status


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
