import json

import pytest

from wkam.cli import dumps, run_command
from wkam.config import EXAMPLES


def write_config(path, **over):
    doc = json.loads(json.dumps(EXAMPLES["6.1"]))
    doc["grid"]["n"] = 32
    doc.update(over)
    path.write_text(json.dumps(doc))
    return str(path)


def run(argv, capsys):
    code = run_command(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_check_coupling_valid(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    code, out, _ = run(["check-coupling", "--config", cfg, "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 0
    assert json.loads(out)["summary"] == "valid"
    assert (tmp_path / "o" / "coupling.json").exists()


def test_check_coupling_reports_row_sum_violation(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", coupling=[[1, -2], [-1, 1]])
    code, out, _ = run(["check-coupling", "--config", cfg, "--output-dir", str(tmp_path / "o")], capsys)
    assert code == 3
    assert json.loads(out)["summary"] == "row sum < 0 at all nodes"


def test_schema_error_has_path(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", grid={"dim": 3, "n": 8})
    code, _, err = run(["critical", "--config", cfg, "--output-dir", str(tmp_path)], capsys)
    assert code == 1
    payload = json.loads(err)
    assert payload["kind"] == "configuration" and payload["path"] == "$.grid.dim"


def test_missing_config_and_bad_expression(tmp_path, capsys):
    code, _, err = run(["critical", "--output-dir", str(tmp_path)], capsys)
    assert code == 1
    bad = write_config(tmp_path / "b.json", hamiltonians=[{"family": "eikonal", "V": "cos(x1"}, {"family": "eikonal"}])
    code, _, err = run(["critical", "--config", bad, "--output-dir", str(tmp_path)], capsys)
    assert code == 1 and "offset" in json.loads(err)["error"]


def test_scalar_system_needs_flag(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.json", hamiltonians=[{"family": "eikonal", "V": "1 - cos(2*pi*x1)"}], coupling=[[0]])
    code, _, _ = run(["critical", "--config", cfg, "--output-dir", str(tmp_path)], capsys)
    assert code == 1
    code, out, _ = run(["critical", "--config", cfg, "--scalar-oracle", "--output-dir", str(tmp_path)], capsys)
    assert code == 0 and abs(json.loads(out)["c_hat"]) <= 0.02


def test_reports_are_byte_identical_across_runs(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        assert run(["solve", "--config", cfg, "--output-dir", str(d)], capsys)[0] == 0
        outs.append(((d / "solution.json").read_bytes(), (d / "solution.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("WKAM_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = write_config(tmp_path / "c.json")
    assert run(["critical", "--config", cfg, "--discount", "0.1"], capsys)[0] == 0
    payload = json.loads((tmp_path / "env" / "critical.json").read_text())
    assert "c_dsc" in payload and payload["discount"] == 0.1


def test_evolve_and_mane(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    out = str(tmp_path / "o")
    assert run(["evolve", "--config", cfg, "--T", "0.5", "--output-dir", out], capsys)[0] == 0
    code, stdout, _ = run(["mane", "--config", cfg, "--base-component", "2", "--base-node", "3", "--output-dir", out], capsys)
    assert code == 0 and json.loads(stdout)["base_component"] == 2


def test_verify_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    code, out, _ = run(["verify", "--config", cfg, "--suite", "S1", "--output-dir", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["passed"]
    code, _, err = run(["verify", "--config", cfg, "--suite", "S9", "--output-dir", str(tmp_path)], capsys)
    assert code == 1


def test_example_pipeline(tmp_path, capsys):
    out = tmp_path / "ex"
    code, stdout, _ = run(["example", "6.1", "--n", "64", "--output-dir", str(out)], capsys)
    assert code == 0
    summary = json.loads(stdout)
    assert abs(summary["c_hat"]) <= 0.02
    assert [nd["index"] for nd in summary["aubry_nodes"]] == [0]
    for name in ["config.json", "critical.json", "aubry.json", "sigma.csv", "solution.csv", "verify_S5_S6.json", "plot_figures.py", "summary.json"]:
        assert (out / name).exists(), name


def test_dumps_is_canonical():
    assert dumps({"b": 1.0 / 3, "a": [float("nan"), 2]}) == dumps({"a": [float("nan"), 2], "b": 1.0 / 3})
