"""Command line behaviour: exit codes, overrides and output files."""

import json
import subprocess
import sys

import pytest

from lastpassage.cli import main
from lastpassage.io_config import validate_summary

ARITH = {"kind": "arithmetic", "neg_inf_prob": 0.1, "table": [[1, 0.45], [2, 0.45]]}


def write(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def small(kind="oracle", **experiment):
    exp = {"kind": kind, "replicas": 30, "n": 40, "pilot_windows": 30, "pilot_length": 500, "min_cycles": 100}
    exp.update(experiment)
    return {"model": ARITH, "experiment": exp, "renewal": {"c1": 1.0085, "c2": 0.9007, "horizon": 20, "margin": 20}}


class TestValidate:
    def test_admissible(self, tmp_path, capsys):
        assert main(["validate", "--config", write(tmp_path, small())]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["model"]["admissible"] is True and len(out["config_digest"]) == 64

    def test_inadmissible(self, tmp_path, capsys):
        doc = small()
        doc["model"] = {"kind": "arithmetic", "neg_inf_prob": 0.1, "table": [[1, 0.9]]}
        assert main(["validate", "--config", write(tmp_path, doc)]) == 1
        assert "v_plus_nondegenerate" in capsys.readouterr().out

    def test_config_error_names_path(self, tmp_path, capsys):
        doc = small()
        doc["renewal"]["c2"] = 2.0
        assert main(["validate", "--config", write(tmp_path, doc)]) == 2
        assert "renewal.c2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_config_required(self):
        with pytest.raises(SystemExit):
            main(["validate"])


class TestRuns:
    def test_oracle_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["oracle", "--config", write(tmp_path, small()), "--out", str(out), "--seed", "5"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        validate_summary(summary)
        assert summary["pass"] is True
        assert (out / "result.csv").read_text().startswith("x,p_hat,se,")
        assert "PASS  oracle_w" in capsys.readouterr().out

    def test_subcommand_sets_kind(self, tmp_path):
        out = tmp_path / "audit"
        doc = small("oracle", window_length=150, paired=30)
        assert main(["audit", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
        names = [c["name"] for c in json.loads((out / "summary.json").read_text())["checks"]]
        assert "decomposition" in names

    def test_seed_changes_digest(self, tmp_path):
        cfg = write(tmp_path, small())
        main(["oracle", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["oracle", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
        da = json.loads((tmp_path / "a" / "summary.json").read_text())["config_digest"]
        db = json.loads((tmp_path / "b" / "summary.json").read_text())["config_digest"]
        assert da != db

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write(tmp_path, small("llt", replicas=500))
        for d in ("a", "b"):
            main(["llt", "--config", cfg, "--out", str(tmp_path / d), "--workers", "1"])
        assert (tmp_path / "a" / "result.csv").read_bytes() == (tmp_path / "b" / "result.csv").read_bytes()
        assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()

    def test_calibration_failure_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, small("llt", min_cycles=10**7))
        assert main(["llt", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
        assert "usable cycles" in capsys.readouterr().err

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "lastpassage", "validate", "--config", write(tmp_path, small())],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["model"]["lattice"] == "Z"
