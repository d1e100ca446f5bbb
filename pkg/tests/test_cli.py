"""Command-line front end: config precedence, exit codes, CSV output."""

import math
import subprocess
import sys

import pytest

from qdarwin import cli


def run_main(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_mach_zehnder_csv(capsys):
    code, out, err = run_main(["mach-zehnder", "--gamma", "0,0.5,1"], capsys)
    assert code == 0
    header, rows = cli.read_csv(out)
    assert header[:3] == ["detector", "gamma", "p_A"]
    assert [r[2] for r in rows] == pytest.approx([0.5, 0.25, 0.0], abs=1e-12)
    assert "# command = mach-zehnder" in err


def test_eraser_rows(capsys):
    code, out, _ = run_main(["eraser"], capsys)
    _, rows = cli.read_csv(out)
    assert code == 0
    assert [r[0] for r in rows] == ["plus", "minus", "mixture"]
    assert rows[2][2] == pytest.approx(0.5)


def test_cat_matches_closed_form(capsys):
    code, out, _ = run_main(["cat", "--n-env", "4", "--gamma", "0.3,0.9"], capsys)
    _, rows = cli.read_csv(out)
    assert code == 0
    for row in rows:
        assert row[4] == pytest.approx(row[5], abs=1e-12)


def test_spam_and_partial_record(capsys):
    code, out, _ = run_main(["spam", "--n", "3", "--alpha", "0.6"], capsys)
    _, rows = cli.read_csv(out)
    assert code == 0 and len(rows) == 3
    assert rows[0][3] == pytest.approx(0.36)
    code, out, _ = run_main(["partial-record", "--n", "2", "--theta", "1.0"], capsys)
    _, rows = cli.read_csv(out)
    assert rows[0][5] == pytest.approx(rows[0][6], abs=1e-12)


def test_info_curve_and_mp_fit(capsys):
    code, out, _ = run_main(["info-curve", "--n", "4", "--seed", "1"], capsys)
    _, rows = cli.read_csv(out)
    assert code == 0
    assert [r[3] for r in rows] == pytest.approx([0, 1, 1, 1, 2], abs=1e-10)
    assert rows[0][-1] == 4
    code, out, _ = run_main(["mp-fit", "--model", "identity"], capsys)
    _, rows = cli.read_csv(out)
    assert rows[0][5] == pytest.approx(0.5, abs=1e-6)


def test_pointer_sieve_cli(capsys):
    code, out, _ = run_main(["pointer-sieve", "--resolution", "16"], capsys)
    _, rows = cli.read_csv(out)
    assert code == 0
    assert sum(r[-1] for r in rows) == 2


def test_emergence_small(capsys, tmp_path):
    target = tmp_path / "em.csv"
    code, out, _ = run_main(["emergence", "--n-max", "2", "--seeds", "2", "--seed", "3", "--resolution", "16", "--output", str(target)], capsys)
    assert code == 0 and out == ""
    header, rows = cli.read_csv(target.read_text())
    assert header[0] == "n" and len(rows) == 2


# -- exit codes -------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["mach-zehnder", "--gamma", "1.5"],
        ["mach-zehnder", "--gamma", "abc"],
        ["info-curve", "--n", "3"],  # no seed
        ["info-curve", "--model", "identity", "--seed", "1"],
        ["emergence", "--n-min", "4", "--n-max", "2", "--seed", "1"],
        ["mp-fit", "--n", "2", "--j", "5"],
        ["spam", "--n", "0"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run_main(argv, capsys)
    assert code == 2
    assert "error" in err or "invalid" in err


def test_budget_exit_3(capsys):
    code, _, err = run_main(["cat", "--n-env", "20", "--gamma", "0.9"], capsys)
    assert code == 3
    assert "budget" in err
    code, _, _ = run_main(["cat", "--n-env", "20", "--gamma", "0.9", "--budget-qubits", "21"], capsys)
    assert code == 0


def test_invariant_exit_4(capsys, monkeypatch):
    monkeypatch.setitem(cli.RUNNERS, "cat", lambda cfg: (["x"], [[math.nan]]))
    code, _, err = run_main(["cat"], capsys)
    assert code == 4
    assert "invariant" in err


# -- configuration -----------------------------------------------------------------


def test_config_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# spam settings\nn = 5\nalpha = 0.6  # amplitude\n")
    cfg = cli.parse_config("spam", {}, None)
    assert cfg["n"] == 4
    cfg = cli.parse_config("spam", {}, str(conf))
    assert cfg["n"] == 5 and cfg["alpha"] == 0.6
    cfg = cli.parse_config("spam", {"n": "7"}, str(conf))
    assert cfg["n"] == 7 and cfg["alpha"] == 0.6


def test_config_rejects_unknown_keys(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("colour = blue\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config("spam", {}, str(conf))
    with pytest.raises(cli.ConfigError):
        cli.parse_config("spam", {"gamma": "0.5"})
    conf.write_text("just words\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config_file(conf)


def test_config_file_via_main(tmp_path, capsys):
    conf = tmp_path / "mz.conf"
    conf.write_text("gamma = 0.5\n")
    code, out, err = run_main(["mach-zehnder", "--config", str(conf)], capsys)
    assert code == 0
    assert "# gamma = 0.5" in err
    assert cli.read_csv(out)[1][0][2] == pytest.approx(0.25)


# -- CSV ------------------------------------------------------------------------------


def test_format_number():
    assert cli.format_number(-0.0) == "0"
    assert cli.format_number(True) == "1"
    assert float(cli.format_number(1 / 3)) == 1 / 3


def test_csv_round_trip():
    import io

    buf = io.StringIO()
    rows = [["a", 1, 0.1 + 0.2, -1e-300], ["b", 2, math.pi, 0.0]]
    cli.write_csv(["name", "k", "x", "y"], rows, buf)
    header, back = cli.read_csv(buf.getvalue())
    assert header == ["name", "k", "x", "y"]
    assert back == rows


def test_runs_are_deterministic():
    cfg = cli.parse_config("info-curve", {"model": "random", "n": "5", "seed": "3"})
    assert cli.run(cfg) == cli.run(cfg)


# -- plot scripts and selftest ------------------------------------------------------------


@pytest.mark.parametrize("kind", ["mach-zehnder", "cat", "info-curve", "emergence", "pointer-sieve"])
def test_plot_script_is_valid_python(tmp_path, kind):
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("n\n1\n")
    script = cli.emit_plot_script(csv_path, kind)
    compile(script.read_text(), str(script), "exec")
    assert "data.csv" in script.read_text()


def test_plot_script_unknown_kind(tmp_path, capsys):
    code, _, _ = run_main(["plot-script", "--csv", str(tmp_path / "x.csv"), "--kind", "spam"], capsys)
    assert code == 2


def test_selftest_quick_subprocess():
    proc = subprocess.run([sys.executable, "-m", "qdarwin.cli", "selftest", "--quick"], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = [line for line in proc.stdout.splitlines() if line.startswith("[")]
    assert len(lines) == 7 and all(line.startswith("[PASS]") for line in lines)
