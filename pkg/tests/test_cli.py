import io
import subprocess
import sys

import pytest

from indchan import cli


def run(argv):
    out = io.StringIO()
    code = cli.run(argv, out)
    return code, out.getvalue()


def test_simulate_fixed_echoes_spec():
    code, text = run(["simulate", "--scheme", "fixed", "--n", "64", "--rate", "0.2",
                      "--trials", "3", "--competitors", "7"])
    assert code == 0
    assert "# scheme=fixed" in text and "# n=64" in text
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header.startswith("trial,seed,")


def test_simulate_is_byte_identical():
    argv = ["simulate", "--n", "1200", "--k-bits", "10", "--trials", "2", "--seed", "9"]
    assert run(argv)[1] == run(argv)[1]


def test_simulate_summary():
    code, text = run(["simulate", "--n", "1200", "--k-bits", "10", "--trials", "2", "--summary"])
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert code == 0 and len(rows) == 2 and "r_act_mean" in rows[0]


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# sweep\nscheme = fixed\nn = 64\nrate = 0.2\ntrials = 2\ncompetitors=3\n")
    code, text = run(["--config", str(cfg), "simulate", "--trials", "1"])
    assert code == 0 and "# trials=1" in text and "# n=64" in text


def test_output_file(tmp_path):
    path = tmp_path / "o.csv"
    code, text = run(["--output", str(path), "bsc-curve", "--step", "0.1"])
    assert code == 0 and text == ""
    assert "eps,C,R,ok" in path.read_text().splitlines()


def test_verify_pass():
    code, text = run(["verify", "lemma1"])
    assert code == 0 and "passed=True" in text


def test_convexity_command():
    code, text = run(["convexity", "--trials", "50"])
    assert code == 0 and "violations" in text


def test_figure_command():
    code, text = run(["figure", "continuous_lb", "--set", "2", "--points", "3"])
    assert code == 0 and "rho,snr_eff,R2,R_LB1,R_LB2" in text


def test_bsc_curve_command():
    code, text = run(["bsc-curve"])
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    assert code == 0 and len(rows) == 102


def test_snr_eff_command():
    code, text = run(["snr-eff", "clip:1", "--power", "1", "--noise", "0.1"])
    assert code == 0 and "0.682689" in text


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["simulate", "--channel", "bsc:x"],
    ["simulate", "--n", "ten"],
    ["verify", "lemma9"],
    ["snr-eff", "cube"],
    ["--config", "/nonexistent/file", "bsc-curve"],
])
def test_usage_errors(argv, capsys):
    assert run(argv)[0] == 1


def test_channel_error_shows_caret(capsys):
    run(["simulate", "--channel", "awgn:0.1:0.2"])
    err = capsys.readouterr().err
    assert "^" in err and "position 9" in err


def test_violation_exit_code(monkeypatch):
    from indchan import harness
    bad = harness.BoundReport("lemma1", [{"ok": False, "margin": -1.0}])
    monkeypatch.setitem(harness.SUITES, "lemma1", lambda **kw: bad)
    assert run(["verify", "lemma1"])[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "indchan", "snr-eff", "identity"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "snr" in res.stdout
