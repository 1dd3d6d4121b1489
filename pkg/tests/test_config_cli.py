import csv
import json

import pytest

from onebit_radar import cli
from onebit_radar.config import ConfigError, parse_text


def test_paper_default_table1():
    cfg = parse_text("[radar]\npaper-default = table1\n")
    p = cfg.params
    assert p.shape == (200, 24, 1000)
    assert p.sample_rate_hz == 100e6 and p.pulse_interval_s == 2e-5


def test_overrides_and_lists():
    cfg = parse_text("""
[radar]
paper-default = vc
num_pulses = 50
window.range = chebyshev:40
[cfar]
num_ref = 100, 24, 100
alpha_db = 8
peak_only = no
[scene]
target = -7, 2000, 0, -40e6
[experiment]
snrs_db = -38, -36
trials = 3
""")
    assert cfg.params.shape == (50, 10, 100)
    assert cfg.params.window("range").sidelobe_db == 40
    assert [c.num_ref for c in cfg.cfar] == [100, 24, 100] and [c.order for c in cfg.cfar] == [75, 18, 75]
    assert not cfg.peak_only and cfg.snrs_db == (-38, -36) and cfg.trials == 3
    assert len(cfg.targets) == 1


@pytest.mark.parametrize("text,needle", [
    ("[radar]\nnum_pulses = 4\n", "complex_noise_var"),
    ("[grid]\nr_a = 0\n", "overgriding"),
    ("[grid]\nra = 2\n", "unknown key grid.ra"),
    ("[bogus]\n", "unknown section"),
    ("[experiment]\ntrials = 0\n", "trials"),
    ("[experiment]\nsnrs_db =\n", "nonempty"),
    ("[cfar]\nnum_ref = 1, 2\n", "one or three"),
    ("[radar]\npaper-default = table1\n[scene]\ntarget = 0, 0, 0, 5e6\n", "beat frequency"),
    ("r_a = 2\n", "outside any"),
    ("[grid]\nr_a two\n", "key = value"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as ei:
        parse_text(text, "t.cfg")
    assert needle in str(ei.value)


def test_config_error_has_line_number():
    with pytest.raises(ConfigError) as ei:
        parse_text("[grid]\n\n# note\nr_a = 1.5\n", "t.cfg")
    assert "t.cfg:4:" in str(ei.value)


def test_digest_stable():
    a = parse_text("[radar]\npaper-default = table1\n")
    b = parse_text("[radar]\npaper-default = table1  # same\n")
    assert a.digest() == b.digest()


def test_cli_usage_exit_code(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as ei:
        cli.main(["nope"])
    assert ei.value.code == 2


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[grid]\nr_a = 0\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_cli_harmonics_table(tmp_path):
    cfg = tmp_path / "two_tone.cfg"
    cfg.write_text("[experiment]\nfreqs = 0.4, 0.05\n")
    out = tmp_path / "run"
    assert cli.main(["harmonics", "--snr", "-5", "--config", str(cfg), "--no-mc", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "harmonics.csv")))
    vals = {r["order_pair"]: float(r["closed_db"]) for r in rows}
    assert vals["(3,0)"] == pytest.approx(-34.77, abs=0.01)
    assert vals["(2,1)"] == pytest.approx(-23.42, abs=0.01)
    assert (out / "COMPLETE").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "harmonics" and "harmonics.csv" in man["outputs"] and man["config_sha256"]
    # completed run directories are not overwritten
    assert cli.main(["harmonics", "--snr", "-5", "--no-mc", "--out", str(out)]) == cli.EXIT_RUNTIME


def test_cli_synth_quantize_detect(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "root"))
    cfg = tmp_path / "ft.cfg"
    cfg.write_text("""[radar]
paper-default = fast-time
num_fast_samples = 256
[scene]
target = 5, 0, 0, -25e6
seed = 2
[grid]
r_a = 2
[cfar]
num_ref = 16
num_guard = 1
alpha_db = 8
""")
    assert cli.main(["synth", "--config", str(cfg)]) == 0
    cube = tmp_path / "root" / "synth" / "cube.bin"
    assert cube.exists()
    assert cli.main(["quantize", "--cube", str(cube)]) == 0
    ob = tmp_path / "root" / "quantize" / "onebit.bin"
    code = cli.main(["detect", "--stage2", "--config", str(cfg), "--cube", str(ob), "--out", str(tmp_path / "d")])
    assert code in (cli.EXIT_OK, cli.EXIT_NONCONVERGED)
    pts = list(csv.DictReader(open(tmp_path / "d" / "predetections.csv")))
    assert any(int(r["m_r"]) == 384 for r in pts)  # -25 MHz -> 0.75 * 512
    summ = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert summ["num_pt"] == len(pts)
    assert (tmp_path / "d" / "COMPLETE").exists()


def test_cli_runtime_error_keeps_partial_output(tmp_path):
    out = tmp_path / "q"
    code = cli.main(["quantize", "--cube", str(tmp_path / "missing.bin"), "--out", str(out)])
    assert code == cli.EXIT_RUNTIME
    assert (out / "manifest.json").exists() and not (out / "COMPLETE").exists()
