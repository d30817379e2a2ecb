import io
import json

import numpy as np
import pytest

from shearpump.cli import SCHEMAS, Table, parse_config, run
from shearpump.errors import ConfigError


def call(args, tmp_path=None, config=None):
    argv = list(args)
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        argv += ["--config", str(path)]
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_parse_config_defaults_and_overrides():
    cfg = parse_config(None, SCHEMAS["band-data"])
    assert cfg["p"] == 5 and cfg["x"] == 0j
    cfg = parse_config('{"x": [0.01, 0.02], "p": 7}', SCHEMAS["band-data"])
    assert cfg["x"] == 0.01 + 0.02j and cfg["p"] == 7


@pytest.mark.parametrize("text,needle", [
    ('{"p": 5,}', "line 1"),
    ('{"bogus": 1}', "unknown"),
    ('{"eps": []}', "nonempty"),
    ('{"eps": [0.1, -0.2]}', "positive"),
    ('{"p": 5.5}', "integer"),
    ('{"t0": true}', "number"),
    ('[1, 2]', "object"),
])
def test_parse_config_errors(text, needle):
    schema = SCHEMAS["transport-sweep"]
    with pytest.raises(ConfigError, match=needle):
        parse_config(text, schema)


def test_table_renderings():
    t = Table(["a", "b", "c"], [[1, 0.1, None], [2, np.float64(1 / 3), "x"]], {"command": "demo"})
    assert t.csv().splitlines() == ["a,b,c", "1,0.10000000000000001,nan", "2,0.33333333333333331,x"]
    doc = json.loads(t.json())
    assert doc["rows"][0] == {"a": 1, "b": 0.1, "c": None} and doc["command"] == "demo"
    assert "# command" in t.table()


def test_band_data_csv(tmp_path):
    code, out, err = call(["band-data", "--emit", "csv"], tmp_path, {"p": 3, "x": 0.02, "n_theta": 64})
    assert code == 0 and err == ""
    lines = out.splitlines()
    assert lines[0] == "theta,E_1,E_2,E_3" and len(lines) == 65


def test_band_data_rejects_coarse_grid(tmp_path):
    code, _, err = call(["band-data"], tmp_path, {"n_theta": 16})
    assert code == 1 and "n_theta" in err


def test_transport_sweep_json_and_threads(tmp_path):
    cfg = {"eps": [0.02, 0.01], "n_samples": 128}
    code, out, _ = call(["transport-sweep", "--emit", "json"], tmp_path, cfg)
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["eps"] for r in rows] == [0.02, 0.01]
    for r in rows:
        assert r["Q_eps"] == pytest.approx(np.pi**2 / np.sqrt(3), rel=0.03)
        assert r["lh_phase"] == -1
    code, out2, _ = call(["transport-sweep", "--emit", "json", "--threads", "2"], tmp_path, cfg)
    assert code == 0 and out2 == out


def test_transport_sweep_numerical_failure(tmp_path):
    code, _, err = call(["transport-sweep"], tmp_path, {"eps": [0.02, 0.1], "center": 0.1, "n_samples": 64})
    assert code == 2 and "eps=0.1" in err


def test_chern_table(tmp_path):
    code, out, _ = call(["chern-table", "--emit", "json"], tmp_path, {"p": 5, "measure_order": False})
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["chern"] for r in rows] == [-2, 1, -1, 2]
    assert all(r["chern"] == r["table_chern"] == r["pump_rule"] for r in rows)


def test_chern_table_reports_closed_gap(tmp_path):
    code, out, err = call(["chern-table", "--emit", "csv"], tmp_path,
                          {"p": 5, "center": 0.05, "measure_order": False})
    assert code == 2 and "gap 1" in err
    assert out.startswith("gap,")


def test_evolve_check(tmp_path):
    trace = tmp_path / "trace.csv"
    cfg = {"tau_gap": [250.0, 500.0, 1000.0], "n_samples": 9, "trace_out": str(trace)}
    code, out, _ = call(["evolve-check", "--emit", "json"], tmp_path, cfg)
    assert code == 0
    doc = json.loads(out)
    assert doc["slope"] == pytest.approx(-1.0, abs=0.1)
    assert trace.read_text().startswith("s,current,residual")


def test_evolve_check_annotates_fast_driving(tmp_path):
    code, out, _ = call(["evolve-check", "--emit", "json"], tmp_path, {"tau_gap": [5.0], "n_samples": 5})
    assert code == 0
    doc = json.loads(out)
    assert doc["slope"] == "not available"
    assert "outside adiabatic regime" in doc["rows"][0]["annotations"]


def test_jt_command(tmp_path):
    code, out, _ = call(["jt", "--emit", "json"], tmp_path, {"n_probes": 8})
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["class"] == "jt_circle"
    assert doc["report"]["class"] == "jt_circle"
    code, out, _ = call(["jt", "--emit", "json"], tmp_path, {"p": 5, "m": 2, "n_probes": 8})
    assert json.loads(out)["rows"][0]["class"] == "magnetic"


def test_jt_bad_order(tmp_path):
    code, _, err = call(["jt"], tmp_path, {"p": 5, "m": 3})
    assert code == 1 and "'m'" in err


def test_lh_phase_command(tmp_path):
    code, out, _ = call(["lh-phase", "--emit", "json", "--seed", "3"], tmp_path,
                        {"eps": [0.01, 0.05], "n_random": 5, "n_samples": 64})
    assert code == 0
    for r in json.loads(out)["rows"]:
        assert r["lh_phase"] == (-1 if r["encircles"] else 1)


def test_usage_and_config_errors(tmp_path):
    assert call(["no-such-command"])[0] == 1
    assert call(["band-data", "--threads", "0"])[0] == 1
    code, _, err = call(["band-data"], tmp_path, "{oops")
    assert code == 1 and "line 1" in err
    code, _, err = call(["band-data", "--config", str(tmp_path / "missing.json")])
    assert code == 1 and "cannot read" in err
    code, _, err = call(["band-data"], tmp_path, {"p": 4})
    assert code == 1


def test_out_file(tmp_path):
    dest = tmp_path / "bands.csv"
    code, out, _ = call(["band-data", "--emit", "csv", "--out", str(dest)], tmp_path, {"n_theta": 64})
    assert code == 0 and out == "" and dest.read_text().startswith("theta,")
