import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from fracfueter.checks import REGISTRY, exterior_points, interior_points, run_check
from fracfueter.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from fracfueter.config import CHECK_NAMES, SCHEMA, RunConfig, default_config, validate
from fracfueter.errors import ConfigError
from fracfueter.reports import payload, run, run_document, strip_timing, trend_verdict

FAST = {"checks": ["quaternion-laws", "stokes", "hadamard"], "resolution": {"N_face": 6, "N_volume": 6},
        "samples": {"evaluations": 8}}
SCHEMA_FILE = Path(__file__).resolve().parents[1] / "docs" / "config.schema.json"


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


# {{{ configuration


def test_defaults_validate():
    cfg = default_config()
    assert cfg.checks == CHECK_NAMES
    assert cfg.box.measure == 1.0
    assert cfg.alpha == (0.5, 0.6, 0.7, 0.4)
    assert cfg.g.kinds == ("identity",) * 4


@pytest.mark.parametrize("bad", [
    {"orders": {"alpha": [1.2, 0.5, 0.5, 0.5]}},
    {"orders": {"alpha": [0.5, 0.5, 0.5]}},
    {"box": {"a": [0, 0, 0, 0], "b": [1, 1, 0, 1]}},
    {"unknown": 1},
    {"resolution": {"N_volume": 12, "typo": 3}},
    {"checks": ["stokes", "nope"]},
    {"weights": {"g": "sqrt"}},
    {"structural_set": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]]},
    {"base_point": [5, 5, 5, 5]},
    {"tolerances": {"stokes": -1}},
])
def test_bad_configs_raise_config_error(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_weight_lists_and_tolerances():
    cfg = RunConfig.from_dict({
        "weights": {"g": [{"kind": "log"}, {"kind": "identity"}, {"kind": "affine", "params": {"slope": 3.0}},
                          {"kind": "power", "params": {"p": 2.0}}]},
        "tolerances": {"stokes": {"residual": 1e-6}, "frac-bp": 0.1},
    })
    assert cfg.g.kinds == ("log", "identity", "affine", "power")
    assert cfg.tolerance("stokes", "residual", 1.0) == 1e-6
    assert cfg.tolerance("stokes", "calibration", 1.0) == 1.0
    assert cfg.tolerance("frac-bp", "relative", 1.0) == 0.1


def test_schema_file_matches_schema():
    assert json.loads(SCHEMA_FILE.read_text()) == SCHEMA
    validate({})


def test_with_resolution():
    cfg = default_config().with_resolution("N_face", 8)
    assert cfg.resolution["N_face"] == 8
    with pytest.raises(ConfigError):
        cfg.with_resolution("N_sides", 3)


# }}}


# {{{ sampling and drivers


def test_sample_points():
    box = default_config().box
    inner = interior_points(box, 10, 0)
    assert all(box.contains(p) for p in inner)
    outer = exterior_points(box, 10, 0)
    assert all(not box.contains(p) and (p > box.lo).all() and (p > box.hi).sum() >= 2 for p in outer)


def test_registry_names_match_config():
    assert tuple(REGISTRY) == CHECK_NAMES


def test_run_check_reports_errors():
    raw = RunConfig.from_dict({"weights": {"g": "identity"}}).raw
    raw = dict(raw, box={"a": [-1.0, 1, 1, 1], "b": [2.0, 2, 2, 2]})
    report = run_check("hadamard", raw)
    assert not report.passed and report.error.startswith("DomainError")


def test_trend_verdict():
    assert trend_verdict([3, 2, 1]) == "decreasing"
    assert trend_verdict([3, 1, 1.05]) == "decreasing"
    assert trend_verdict([3, 1, 2]) == "not decreasing"
    assert trend_verdict([1, 2, 3]) == "not decreasing"


def test_run_is_reproducible_and_ordered():
    cfg = RunConfig.from_dict(FAST)
    first, second = run(cfg), run(cfg, workers=2)
    assert [r.name for r in first] == list(FAST["checks"])
    assert payload(run_document(cfg, first)) == payload(run_document(cfg, second))
    assert "wall_time_s" not in json.dumps(strip_timing(run_document(cfg, first)))


# }}}


# {{{ command line


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, FAST), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "report.json").read_text())
    assert doc["passed"] and [c["name"] for c in doc["checks"]] == FAST["checks"]
    for check in doc["checks"]:
        assert check["identity"] and check["conventions"] and check["inputs"]["box"]
    rows = list(csv.DictReader((out / "report.csv").open()))
    assert {r["check"] for r in rows} == set(FAST["checks"])
    assert all(float(r["residual"]) >= 0 for r in rows)
    assert "PASS" in capsys.readouterr().out


def test_cli_failing_check_exits_one(tmp_path):
    data = dict(FAST, tolerances={"quaternion-laws": 1e-30})
    assert main(["run", "--config", write(tmp_path, data), "--out", str(tmp_path / "o")]) == EXIT_FAIL


def test_cli_config_errors(tmp_path, capsys):
    bad = write(tmp_path, {"orders": {"alpha": [1.2, 0.5, 0.5, 0.5]}})
    assert main(["run", "--config", bad, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["validate", "--config", bad]) == EXIT_CONFIG
    assert "orders/alpha/0" in capsys.readouterr().err
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["validate", "--config", write(tmp_path, FAST, "ok.json")]) == EXIT_OK
    sweep = ["sweep", "--config", write(tmp_path, FAST), "--param", "N_sides", "--values", "1,2"]
    assert main(sweep) == EXIT_CONFIG


def test_cli_list_checks(capsys):
    assert main(["list-checks"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split()[0] for line in lines] == list(CHECK_NAMES)


def test_cli_sweep(tmp_path):
    data = dict(FAST, checks=["stokes"])
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", write(tmp_path, data), "--param", "N_face", "--values", "4,6,8",
                 "--out", str(out)])
    doc = json.loads((out / "report.json").read_text())
    assert doc["sweep"]["values"] == [4, 6, 8]
    assert len(doc["sweep"]["steps"]) == 3
    assert code == (EXIT_OK if doc["passed"] else EXIT_FAIL)
    rows = list(csv.DictReader((out / "report.csv").open()))
    assert sorted({r["N_face"] for r in rows}) == ["4", "6", "8"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fracfueter", "list-checks"], capture_output=True, text=True)
    assert proc.returncode == 0 and "frac-bp" in proc.stdout


# }}}
