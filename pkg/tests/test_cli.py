import json
from pathlib import Path

import pytest

from ideal_boundary.cli import EXIT_OK, EXIT_SCHEMA, EXIT_SPEC, EXIT_USAGE, builtin_scenario, main, validate_scenario
from ideal_boundary.gallery import list_builtins

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_list_names_every_builtin(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    names = [line.split()[0] for line in out.splitlines()]
    assert "cantor_notch" in names
    assert names == [n for n, _ in list_builtins()]
    for n in names:
        validate_scenario(builtin_scenario(n))


def test_example_prints_a_valid_scenario(capsys):
    assert main(["example", "strip_hv"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert validate_scenario(data)["builtin"] == "strip_hv"
    assert main(["example", "nope"]) == EXIT_USAGE


@pytest.mark.parametrize("name, expected", [("square_hv", False), ("strip_hv", True)])
def test_coincidence_verdicts(tmp_path, name, expected):
    out = tmp_path / name
    assert main(["run", str(SCENARIOS / f"{name}.json"), "-o", str(out), "--level", "2", "--json-only"]) == EXIT_OK
    analysis = json.loads((out / "analysis.json").read_text())
    assert analysis["coincidence"]["coincide"] is expected
    assert analysis["level"] == 2
    assert not (out / "disc.svg").exists()


def test_malformed_scenarios_exit_with_schema_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "ideal-boundary.scenario/1", "builtin": "square_hv", "level": 99}))
    assert main(["run", str(bad), "-o", str(tmp_path / "o")]) == EXIT_SCHEMA
    bad.write_text("{not json")
    assert main(["run", str(bad), "-o", str(tmp_path / "o")]) == EXIT_SCHEMA
    assert "scenario error" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_SCHEMA


def test_rejected_spec_exits_with_spec_error(tmp_path, capsys):
    node = {"schema": "ideal-boundary.scenario/1", "name": "node",
            "specs": {"N": {"text": "schema ideal-boundary.foliation/1\nP 1 0 1\nQ 0 1 1\n"}},
            "window": [-1, 1, -1, 1], "seeds": 3}
    path = tmp_path / "node.json"
    path.write_text(json.dumps(node))
    assert main(["run", str(path), "-o", str(tmp_path / "o")]) == EXIT_SPEC
    assert "node" in capsys.readouterr().err


def test_bad_budget_flag(tmp_path):
    args = ["run", str(SCENARIOS / "square_hv.json"), "-o", str(tmp_path), "--budget", "depth=x"]
    assert main(args) == EXIT_SCHEMA


def test_outputs_are_byte_deterministic(tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", str(SCENARIOS / "saddle.json"), "-o", str(out), "--level", "2"]) == EXIT_OK
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert set(runs[0]) == {"chart.json", "analysis.json", "disc.svg"}
    assert runs[0] == runs[1]
    assert runs[0]["disc.svg"].startswith(b"<?xml")
