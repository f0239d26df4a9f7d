import csv
import io

import pytest

from gustbench.cli import __main__ as cli
from gustbench.cli.suites import Check, SuiteResult

SHORT = """\
schema_version: 1
name: short_hover
duration: 1.0
path:
  waypoints: [[0, 0, 1]]
controller: {kind: pid, compensation: true}
estimator: {kind: ekf}
"""


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "gust_10" in out and "step_response" in out


def test_run_and_report(tmp_path, capsys):
    scen = tmp_path / "short.yaml"
    scen.write_text(SHORT)
    out_dir = tmp_path / "out"
    assert cli.main(["run", str(scen), "--controller", "mpc", "--comp", "off", "--repeats", "2",
                     "--out-dir", str(out_dir)]) == 0
    got = rows(capsys.readouterr().out)
    assert len(got) == 2
    assert got[0]["run_id"] != got[1]["run_id"]
    assert all(r["errors"] == "0" for r in got)
    files = sorted(out_dir.glob("*.csv"))
    assert len(files) == 2

    assert cli.main(["report", *map(str, files), "--out-dir", str(tmp_path / "rep")]) == 0
    rep = rows(capsys.readouterr().out)
    assert [r["run_id"] for r in rep] == [r["run_id"] for r in got]
    assert (tmp_path / "rep" / "report.csv").is_file()


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SHORT.replace("duration: 1.0", "duration: fast"))
    assert cli.main(["run", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "duration" in err and "line 3" in err
    assert cli.main(["run", "no_such_scenario"]) == 2
    assert cli.main(["report", str(tmp_path / "missing.csv")]) == 2


def test_report_rejects_non_trace(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    assert cli.main(["report", str(f)]) == 2


@pytest.mark.parametrize("passed,code", [(True, 0), (False, 1)])
def test_suite_exit_code(monkeypatch, capsys, passed, code):
    def fake(name, **kw):
        res = SuiteResult(name)
        res.checks.append(Check("stub", passed, 1.0, "< 2"))
        return res

    monkeypatch.setattr(cli, "run_suite", fake)
    assert cli.main(["suite", "gust_3", "--repeats", "1"]) == code
    out = capsys.readouterr().out
    assert ("PASS  stub" if passed else "FAIL  stub") in out
    assert out.strip().endswith("PASS" if passed else "FAIL")


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "hover", "--comp", "maybe"])
    assert exc.value.code == 2
