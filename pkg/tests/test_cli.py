import csv
import json
import math

import numpy as np
import pytest

from nevlab.cli.config import ConfigError, divisors_from, load, parse, schedule_from, validate
from nevlab.cli.main import main
from nevlab.cli.runner import Artifacts, NumericalFailure, derive_seed, dumps

BASE = """
seed = 3
output = "out"
analyses = {analyses}
degrees = [0, 1]

[map]
{map}

[exhaustion]
id = "logAbs"
k = 1

[schedule]
min = 1.0
max = 3.0
count = {count}

[quad]
budget = 8192
"""


def write_cfg(tmp_path, analyses='["characteristics", "massRatios"]', map='id = "power"\nparams = { d = 2 }',
              count=8, extra=""):
    p = tmp_path / "scenario.toml"
    p.write_text(BASE.format(analyses=analyses, map=map, count=count) + extra)
    return p


def test_run_writes_tables_and_report(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    rows = list(csv.reader((out / "characteristics.csv").open()))
    assert len(rows) == 1 + 8
    assert rows[0][:3] == ["r", "t0", "t0_err"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "complete" and rep["seed"] == 3 and "output" not in rep["config"]
    assert (out / "MANIFEST").read_text().startswith("status: complete")
    r = np.array([float(row[0]) for row in rows[1:]])
    T1 = np.array([float(row[rows[0].index("T1")]) for row in rows[1:]])
    assert np.allclose(T1, 0.5 * np.log1p(np.exp(4 * r)), rtol=1e-6)


def test_rerun_is_byte_identical(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    assert main(["run", str(cfg), "-o", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("NEVLAB_THREADS", "4")
    assert main(["run", str(cfg), "-o", str(tmp_path / "b")]) == 0
    for name in ("report.json", "characteristics.csv", "ratios.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_validation_names_the_field(tmp_path, capsys):
    cfg = write_cfg(tmp_path, analyses='["defects"]')
    assert main(["validate", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "divisors: required by defects" in err
    assert main(["run", str(cfg)]) == 1


def test_validation_diagnostics():
    raw = {"analyses": ["characteristics", "bogus"], "map": {"id": "power", "params": {"d": 2}},
           "exhaustion": {"id": "ballLog"}, "schedule": {"min": -1.0, "max": 0.5, "count": 4}, "degrees": [2]}
    d = validate(raw)
    assert any(x.startswith("analyses: unknown analysis 'bogus'") for x in d)
    assert any(x.startswith("schedule.max: level 0.5 is not below R = 0.0") for x in d)
    assert "degrees: j = 2 outside 0..k = 1" in d
    with pytest.raises(ConfigError) as exc:
        parse(raw)
    assert exc.value.diagnostics == d


def test_family_config_rejects_single_map_analyses():
    raw = {"analyses": ["characteristics"], "map": {"family": "scale", "count": 5},
           "exhaustion": {"id": "ballLog"}, "schedule": {"min": -2.0, "max": -1.0, "count": 8}}
    assert any(x.startswith("map.family: families only support") for x in validate(raw))


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, analyses='["characteristics", "intersection"]', map='id = "constant"\nparams = { value = 2.0 }',
                    extra='\n[divisors]\nvalues = [2.0]\n')
    assert main(["run", str(cfg)]) == 2
    man = (tmp_path / "out" / "MANIFEST").read_text()
    assert man.startswith("status: incomplete") and "intersection" in man
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["status"] == "incomplete"


def test_missing_and_malformed_files(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.toml")]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 1\n")
    assert main(["run", str(bad)]) == 1


def test_catalog_command(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "power" in out and "P^1: 14" in out and "scaleCond" in out


def test_csv_nan_is_a_numerical_failure(tmp_path):
    art = Artifacts(tmp_path)
    with pytest.raises(NumericalFailure, match="col"):
        art.write_csv("t.csv", ["x", "col"], [[1.0, math.nan]])
    assert (tmp_path / "t.csv").exists() and "t.csv" in art.written


def test_json_nan_becomes_null_and_is_listed():
    text, undefined = dumps({"a": [1.0, math.nan], "b": math.inf, "c": np.float64(2.5)})
    data = json.loads(text)
    assert data == {"a": [1.0, None], "b": "inf", "c": 2.5}
    assert undefined == ["$.a[1]"]


def test_seed_derivation():
    a = derive_seed(7, "characteristic/ddc/1")
    assert a == derive_seed(7, "characteristic/ddc/1")
    assert a != derive_seed(7, "characteristic/ddc/0") and a != derive_seed(8, "characteristic/ddc/1")
    assert 0 <= a < 2**64


def test_schedule_and_divisors():
    assert np.allclose(schedule_from({"min": 1.0, "max": 3.0, "count": 3}), [1, 2, 3])
    assert np.allclose(schedule_from({"min": 1.0, "max": math.e**2, "count": 3, "spacing": "logSigma"}), [0, 1, 2])
    divs = divisors_from({"values": [0.0, "1+2j", "inf"], "sampler": "fibonacci", "count": 4}, 1)
    assert len(divs) == 7 and divs[2].target_value() is None
    assert np.isclose(divs[1].target_value(), 1 + 2j)
    fs = divisors_from({"sampler": "fs", "count": 3, "seed": 1}, 2)
    assert len(fs) == 3 and fs[0].m == 2
    with pytest.raises(ValueError):
        divisors_from({"values": [1.0]}, 2)


def test_shipped_configs_validate():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.toml")):
        load(p)
