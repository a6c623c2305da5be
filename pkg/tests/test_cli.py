import json
import subprocess
import sys

import jsonschema
import pytest

from fracburgers.cli import main
from fracburgers.diagnostic import REPORT_SCHEMA

SMALL = {
    "grid": {"n": 128, "length": 32.0},
    "solver": {"dt": 0.01, "t_end": 0.5, "snapshot_every": 5},
    "initial": {"kind": "gaussian-bump", "amplitude": 1.0},
    "diagnostics": [{"name": "conservation"}, {"name": "decay", "params": {"window": [0.1, 0.5]}},
                    {"name": "vanishing"}],
}
BLOWUP = {"grid": {"n": 256, "length": 6.283},
          "solver": {"alpha": 0.3, "dt": 0.05, "t_end": 5},
          "initial": {"kind": "gaussian-bump", "amplitude": 50, "width": 0.2},
          "diagnostics": [{"name": "decay"}]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = write(d, "c.json", SMALL)
    out = d / "runs"
    code = main(["solve", cfg, "--out", str(out), "--gnuplot"])
    (run_dir,) = list(out.iterdir())
    return code, out, run_dir


class TestSolve:
    def test_artifacts(self, solved):
        code, _, run_dir = solved
        assert code == 0
        for name in ("record.json", "scalars.csv", "snapshots.bin", "snapshots.json", "diagnostics.json",
                     "summary.txt", "scalars.png", "snapshots.png", "plot.gp"):
            assert (run_dir / name).exists(), name

    def test_diagnostics_schema_valid(self, solved):
        doc = json.loads((solved[2] / "diagnostics.json").read_text())
        jsonschema.validate(doc, REPORT_SCHEMA)
        assert [r["name"] for r in doc["reports"]] == ["conservation", "decay", "vanishing"]
        assert all(r["passed"] for r in doc["reports"])

    def test_summary_lines(self, solved):
        text = (solved[2] / "summary.txt").read_text()
        assert "status: completed" in text
        assert sum(line.startswith("[PASS]") for line in text.splitlines()) == 3

    def test_deterministic_id(self, solved, tmp_path):
        cfg = write(tmp_path, "c.json", {**SMALL, "threads": 3})
        out = tmp_path / "runs"
        assert main(["solve", cfg, "--out", str(out), "--no-figures"]) == 0
        (run_dir,) = list(out.iterdir())
        assert run_dir.name == solved[2].name
        a = (run_dir / "snapshots.bin").read_bytes()
        assert a == (solved[2] / "snapshots.bin").read_bytes()

    def test_diagnose_and_report(self, solved, capsys):
        _, out, run_dir = solved
        assert main(["diagnose", run_dir.name, "oscillation", "min_alpha=0.9", "--out", str(out)]) == 0
        assert "oscillation" in capsys.readouterr().out
        assert main(["report", run_dir.name, "--out", str(out), "--no-figures"]) == 0
        assert "oscillation" in capsys.readouterr().out

    def test_list(self, solved, capsys):
        assert main(["list", str(solved[1])]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "id,date,digest,status" and lines[1].startswith(solved[2].name)


class TestExitCodes:
    def test_validation(self, tmp_path, capsys):
        bad = {**SMALL, "solver": {"alpha": 1.5}}
        assert main(["solve", write(tmp_path, "b.json", bad), "--out", str(tmp_path)]) == 2
        assert "solver" in capsys.readouterr().err
        assert main(["solve", write(tmp_path, "u.json", {**SMALL, "foo": 1})]) == 2
        assert main(["solve", write(tmp_path, "j.json", "{")]) == 2

    def test_argparse_error(self):
        assert main(["frobnicate"]) == 2

    def test_blowup_is_numerical(self, tmp_path):
        out = tmp_path / "runs"
        assert main(["solve", write(tmp_path, "x.json", BLOWUP), "--out", str(out), "--no-figures"]) == 3
        (run_dir,) = list(out.iterdir())
        rec = json.loads((run_dir / "record.json").read_text())
        assert rec["status"].startswith("aborted") and rec["blowup_time"] > 0
        doc = json.loads((run_dir / "diagnostics.json").read_text())
        assert doc["reports"][0]["passed"] is None

    def test_io(self, tmp_path):
        assert main(["list", str(tmp_path / "missing")]) == 4
        assert main(["solve", str(tmp_path / "missing.json")]) == 4
        assert main(["report", "nope", "--out", str(tmp_path)]) == 4

    def test_unknown_diagnostic(self, solved):
        assert main(["diagnose", solved[2].name, "nope", "--out", str(solved[1])]) == 2


class TestOtherCommands:
    def test_barrier(self, tmp_path, capsys):
        assert main(["barrier", write(tmp_path, "b.json", {"problem": "b3", "lambda": 0.25, "k0": 1})]) == 0
        assert "[PASS] lambda_star" in capsys.readouterr().out
        assert main(["barrier", write(tmp_path, "c.json", {"problem": "b9"})]) == 2

    def test_constants(self, capsys):
        assert main(["constants", "0.2", "1", "2", "10", "--K", "30"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["delta"] > 0 and all(out["checks"].values())
        assert main(["constants", "0.7", "1", "2", "10"]) == 2

    def test_console_script(self):
        r = subprocess.run([sys.executable, "-m", "fracburgers.cli", "--version"], capture_output=True, text=True)
        assert r.returncode == 0 and r.stdout.strip()
