import csv
import io
import json
import re
import subprocess
import sys
import xml.etree.ElementTree as ET

import jsonschema
import pytest

from conftest import DATA
from sbsgeom.cli import main
from sbsgeom.export import load_schema


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def form(name):
    return ["--form", DATA / f"{name}.json"]


def path(name):
    return ["--path", DATA / f"{name}.json"]


class TestCriticalPoints:
    def test_json_schema(self, capsys):
        code, out, _ = run(capsys, "critical-points", *form("p3"))
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("critical-points"))
        assert payload["counts"] == {"minima": 2, "saddles": 3}

    def test_table(self, capsys):
        code, out, _ = run(capsys, "critical-points", *form("p3"), "--format", "table")
        assert code == 0
        assert out.startswith("2 minima, 3 saddles")
        assert out.count("minimum") == 2 and out.count("saddle") == 4  # header line counts one

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "critical-points", *form("p3"), "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 5
        assert sorted(r["kind"] for r in rows) == ["minimum"] * 2 + ["saddle"] * 3

    def test_degenerate_exit_2(self, capsys):
        code, _, err = run(capsys, "critical-points", *form("z0z1"))
        assert code == 2 and "degenerate" in err

    def test_perfect_square_exit_3(self, capsys):
        # a double zero is caught by the discriminant guard before any Hessian is formed
        code, _, err = run(capsys, "critical-points", *form("perfect_square"))
        assert code == 3 and "discriminant" in err

    def test_missing_file_exit_1(self, capsys, tmp_path):
        code, _, err = run(capsys, "critical-points", "--form", tmp_path / "nope.json")
        assert code == 1 and err.startswith("error:")

    def test_out_dir(self, capsys, tmp_path):
        code, out, _ = run(capsys, "critical-points", *form("p3"), "--out", tmp_path)
        assert code == 0
        assert (tmp_path / "critical_points.json").read_text() == out


class TestSkeleton:
    def test_outputs(self, capsys, tmp_path):
        code, out, err = run(capsys, "skeleton", *form("p3"), "--out", tmp_path, "--verify-sbs")
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("skeleton"))
        assert len(payload["arcs"]) == 3
        residuals = [float(x) for x in re.findall(r"= ([0-9.e+-]+)", err)]
        assert len(residuals) == 3 and max(residuals) < 1e-6
        rows = list(csv.DictReader(io.StringIO((tmp_path / "skeleton.csv").read_text())))
        assert {r["arc"] for r in rows} == {"0", "1", "2"}
        assert sum(1 for r in rows if r["arc"] == "0") == payload["arcs"][0]["n_samples"]
        root = ET.fromstring((tmp_path / "skeleton.svg").read_text())
        assert root.get("viewBox") == "0 0 800 800"
        # each of the three rays shows once in the z panel and once in the w panel
        assert len([e for e in root.iter() if e.get("stroke") == "#d62728"]) == 6

    def test_table_and_csv(self, capsys):
        code, out, _ = run(capsys, "skeleton", *form("p3"), "--format", "table")
        assert code == 0 and len(out.strip().splitlines()) == 2 + 3
        code, out, _ = run(capsys, "skeleton", *form("p3"), "--format", "csv")
        assert code == 0 and out.startswith("arc,t,chart,re,im,psi\n")

    def test_degenerate_exit_2(self, capsys):
        code, _, _ = run(capsys, "skeleton", *form("z0z1"))
        assert code == 2


class TestExactLoops:
    def test_json_c1(self, capsys, tmp_path):
        code, out, _ = run(capsys, "exact-loops", *form("p3"), "--out", tmp_path)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("exact-loops"))
        assert payload["area_scale_mode"] == "C1Units"
        assert [s["area"] for s in payload["sheets"]] == pytest.approx([1.0] * 3, abs=1e-6)
        assert (tmp_path / "exact_loops.svg").read_text().startswith("<svg")

    def test_table_unit(self, capsys):
        code, out, _ = run(capsys, "exact-loops", *form("p3"), "--format", "table", "--scale", "unit")
        assert code == 0
        assert out.count("0.3333") == 3
        assert "fractions of total" in out

    def test_table_c1(self, capsys):
        code, out, _ = run(capsys, "exact-loops", *form("p3"), "--format", "table", "--scale", "c1")
        assert code == 0 and out.count("1.0000") == 3

    def test_degree_one_reports_gap(self, capsys):
        code, out, err = run(capsys, "exact-loops", *form("degree1"))
        assert code == 0
        payload = json.loads(out)
        assert payload["sheets"] == [] and len(payload["gaps"]) == 1
        assert "no exact loop" in err

    def test_near_discriminant_exit_3(self, capsys):
        code, _, _ = run(capsys, "exact-loops", *form("near_discriminant"))
        assert code == 3

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"loop_samples": 128, "area_scale_mode": "UnitTotal"}))
        code, out, _ = run(capsys, "exact-loops", *form("p3"), "--config", cfg)
        payload = json.loads(out)
        assert code == 0 and payload["area_scale_mode"] == "UnitTotal"
        assert all(s["loop"]["n"] == 128 for s in payload["sheets"])
        assert [s["area"] for s in payload["sheets"]] == pytest.approx([1 / 3] * 3, abs=3e-7)

    @pytest.mark.parametrize("bad", [{"loop_samples": 100}, {"bogus": 1}, {"action_tol": -1},
                                     {"area_scale_mode": "percent"}, {"loop_samples": "many"}])
    def test_invalid_config_exit_1(self, capsys, tmp_path, bad):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(bad))
        code, _, err = run(capsys, "exact-loops", *form("p3"), "--config", cfg)
        assert code == 1 and err.startswith("error:")


class TestMonodromy:
    def test_constant_identity(self, capsys):
        code, out, _ = run(capsys, "monodromy", *path("constant_path"))
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("monodromy"))
        assert code == 0 and payload["one_line"] == "1 2 3" and payload["is_identity"]

    def test_crossing_exit_4(self, capsys):
        code, _, err = run(capsys, "monodromy", *path("crossing_path"))
        assert code == 4 and "step 1" in err

    def test_open_path_exit_4(self, capsys, tmp_path):
        data = json.loads((DATA / "crossing_path.json").read_text())
        data["steps"] = data["steps"][:1] + data["steps"][2:]
        p = tmp_path / "open.json"
        p.write_text(json.dumps(data))
        code, _, _ = run(capsys, "monodromy", "--path", p)
        assert code == 4

    def test_control_table(self, capsys):
        code, out, _ = run(capsys, "monodromy", *path("control_path"), "--format", "table")
        assert code == 0
        assert "permutation: 1 2 3" in out and "root braid: 1 2 3" in out

    def test_missing_path(self, capsys):
        with pytest.raises(SystemExit):
            main(["monodromy"])


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sbsgeom", "critical-points", "--form", str(DATA / "z0z1.json")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2


def test_help_lists_commands():
    proc = subprocess.run([sys.executable, "-m", "sbsgeom", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("critical-points", "skeleton", "exact-loops", "monodromy"):
        assert cmd in proc.stdout
