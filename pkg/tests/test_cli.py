from __future__ import annotations

import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from hpstab.cli import main, manifest_for, merge_runs
from hpstab.config import ConfigError, config_hash, parse_config, validate_config

CONFIGS = Path(__file__).resolve().parents[1] / "docs" / "configs"

EIG = {"command": "eig", "grid": {"origin": [-0.0625, -0.0625], "side": 1.125, "resolution": 36},
       "domain": {"kind": "rectangle", "min": [0, 0], "max": [1, 1]}, "params": {"k": 4}}


def write_config(tmp_path: Path, cfg, name="cfg.json") -> Path:
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return path


def run(tmp_path: Path, cfg, out="out", *extra) -> int:
    return main(["run", "--config", str(write_config(tmp_path, cfg)),
                 "--out", str(tmp_path / out), *extra])


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- run -----------------------------------------------------------------

def test_eig_run_writes_artifacts(tmp_path):
    assert run(tmp_path, EIG) == 0
    out = tmp_path / "out"
    rows = read_rows(out / "results.csv")
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4]
    assert float(rows[0]["lambda"]) == pytest.approx(2 * math.pi ** 2, rel=0.01)
    assert rows[1]["cluster"] == rows[2]["cluster"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["command"] == "eig"


def test_manifest_records_config_and_hash(tmp_path):
    assert run(tmp_path, EIG, "out", "--seed", "7") == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["tool"] == "hpstab"
    assert man["seed"] == 7
    assert man["config"]["seed"] == 7
    assert "output" not in man["config"]
    assert man["config_sha256"] == config_hash(man["config"])
    assert man["grid"]["resolution"] == 36


def test_output_location_does_not_change_hash():
    cfg = validate_config(dict(EIG))
    a = manifest_for({**cfg, "output": "a"})
    b = manifest_for({**cfg, "output": "b"})
    assert a == b


def test_reruns_are_byte_identical(tmp_path):
    assert run(tmp_path, EIG, "a") == 0
    assert run(tmp_path, EIG, "b") == 0
    for name in ("results.csv", "summary.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_identical_domains_give_zero_metrics(tmp_path):
    cfg = json.loads((CONFIGS / "metrics_identical.json").read_text())
    assert run(tmp_path, cfg) == 0
    (row,) = read_rows(tmp_path / "out" / "results.csv")
    assert all(float(v) == 0.0 for v in row.values())


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_run(tmp_path, name):
    cfg = json.loads((CONFIGS / name).read_text())
    assert run(tmp_path, cfg) == 0
    assert (tmp_path / "out" / "results.csv").stat().st_size > 0


# --- errors --------------------------------------------------------------

def test_missing_grid_is_a_config_error(tmp_path, capsys):
    cfg = {k: v for k, v in EIG.items() if k != "grid"}
    assert run(tmp_path, cfg) == 2
    assert "grid" in capsys.readouterr().err


def test_unknown_key_is_a_config_error(tmp_path, capsys):
    assert run(tmp_path, {**EIG, "colour": "blue"}) == 2
    assert "colour" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    assert run(tmp_path, '{\n  "command": "eig",\n  "grid": {\n}') == 2
    assert "line" in capsys.readouterr().err
    with pytest.raises(ConfigError) as info:
        parse_config('{"command": "eig",,}')
    assert "line 1, column" in info.value.diagnostics[0]


def test_missing_domain_is_a_config_error(tmp_path):
    cfg = {k: v for k, v in EIG.items() if k != "domain"}
    assert run(tmp_path, cfg) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = {**EIG, "domain": {"kind": "rectangle", "min": [0.4, 0.4], "max": [0.45, 0.45]}}
    assert run(tmp_path, cfg) == 3
    assert "EmptyDomain" in capsys.readouterr().err
    assert not (tmp_path / "out" / "results.csv").exists()


def test_missing_output_directory(tmp_path):
    path = write_config(tmp_path, EIG)
    assert main(["run", "--config", str(path)]) == 2


# --- report --------------------------------------------------------------

def test_report_of_identical_runs(tmp_path):
    run(tmp_path, EIG, "a")
    run(tmp_path, EIG, "b")
    assert main(["report", str(tmp_path / "a"), str(tmp_path / "b"),
                 "--out", str(tmp_path / "merged.csv")]) == 0
    rows = read_rows(tmp_path / "merged.csv")
    assert [r["run"] for r in rows] == ["0"] * 4 + ["1"] * 4
    assert "h" not in rows[0]
    assert [r["lambda"] for r in rows[:4]] == [r["lambda"] for r in rows[4:]]


def test_report_mixed_grids_needs_flag(tmp_path):
    run(tmp_path, EIG, "a")
    run(tmp_path, {**EIG, "grid": {**EIG["grid"], "resolution": 18}}, "b")
    dirs = [str(tmp_path / "a"), str(tmp_path / "b")]
    assert main(["report", *dirs]) == 2
    text = merge_runs(dirs, allow_mixed_grids=True)
    rows = list(csv.DictReader(text.splitlines()))
    assert {float(r["h"]) for r in rows} == {1 / 32, 1 / 16}
    assert main(["report", *dirs, "--allow-mixed-grids", "--out", str(tmp_path / "m.csv")]) == 0


def test_report_rejects_different_commands(tmp_path):
    run(tmp_path, EIG, "a")
    cfg = json.loads((CONFIGS / "metrics_identical.json").read_text())
    run(tmp_path, cfg, "b")
    assert main(["report", str(tmp_path / "a"), str(tmp_path / "b")]) == 2


def test_report_rejects_non_run_directory(tmp_path):
    assert main(["report", str(tmp_path)]) == 2


# --- schema and entry point ---------------------------------------------

def test_schema_matches_shipped_copy(capsys):
    assert main(["schema"]) == 0
    printed = json.loads(capsys.readouterr().out)
    shipped = json.loads((CONFIGS.parent / "config.schema.json").read_text())
    assert printed == shipped


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hpstab.cli", "run", "--config",
                           str(write_config(tmp_path, EIG)), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "manifest.json").exists()
