"""Tests for the command-line interface."""

import csv
import json
from datetime import datetime, timedelta
from pathlib import Path

import click
import jsonschema
import pytest
from click.testing import CliRunner

from moran_fpras.cli import REPORT_MODELS, main, parse_subset_spec

SCHEMA_PATH = Path(__file__).parent.parent / "moran_fpras" / "schemas" / "report.json"


@pytest.fixture
def runner() -> CliRunner:
    """Click test runner."""
    return CliRunner()


@pytest.fixture(scope="module")
def report_validator() -> jsonschema.Draft202012Validator:
    """Validator for the published report schema."""
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


def _run_json(runner: CliRunner, tmp_path: Path, args: list[str]) -> tuple[int, dict]:
    out = tmp_path / "out.json"
    result = runner.invoke(main, [*args, "--out", str(out)])
    assert out.exists(), result.output
    return result.exit_code, json.loads(out.read_text(encoding="utf-8"))


# ===== Subset grammar =====


def test_parse_subset_spec() -> None:
    """Ids and inclusive ranges separated by commas."""
    assert parse_subset_spec("0,3,5-7") == frozenset({0, 3, 5, 6, 7})
    assert parse_subset_spec(" 2 ") == frozenset({2})


@pytest.mark.parametrize("spec", ["", "0,x", "3-1", "1-", "-2"])
def test_parse_subset_spec_rejects(spec: str) -> None:
    """Anything else is a usage error."""
    with pytest.raises(click.BadParameter):
        parse_subset_spec(spec)


# ===== gen =====


def test_gen_star(runner: CliRunner) -> None:
    """gen star 4 prints the canonical edge list."""
    result = runner.invoke(main, ["gen", "star", "4"])

    assert result.exit_code == 0
    assert result.output == "0 1\n0 2\n0 3\n"


def test_gen_rejects_small_cycle(runner: CliRunner) -> None:
    """A 2-cycle is not a simple graph."""
    result = runner.invoke(main, ["gen", "cycle", "2"])

    assert result.exit_code == 2


def test_gen_rejects_unknown_kind(runner: CliRunner) -> None:
    """Only the built-in families are accepted."""
    assert runner.invoke(main, ["gen", "wheel", "5"]).exit_code == 2


# ===== Graph input =====


def test_graph_source_is_required(runner: CliRunner) -> None:
    """Exactly one of --graph and --gen."""
    assert runner.invoke(main, ["bounds", "--r", "2"]).exit_code == 2


def test_graph_and_gen_are_exclusive(runner: CliRunner, edge_list_file) -> None:
    """Both at once is a usage error."""
    path = edge_list_file("0 1\n")
    result = runner.invoke(main, ["bounds", "--graph", str(path), "--gen", "star:4", "--r", "2"])

    assert result.exit_code == 2


def test_disconnected_graph_file(runner: CliRunner, edge_list_file) -> None:
    """Invalid edge lists surface as usage errors."""
    path = edge_list_file("0 1\n2 3\n")
    result = runner.invoke(main, ["bounds", "--graph", str(path), "--r", "2"])

    assert result.exit_code == 2
    assert "disconnected" in result.output


def test_graph_file_input(runner: CliRunner, tmp_path: Path, edge_list_file) -> None:
    """An edge-list file works like a generator, and the manifest records its path."""
    path = edge_list_file("0 1\n1 2\n")
    code, doc = _run_json(runner, tmp_path, ["exact", "--graph", str(path), "--r", "2"])

    assert code == 0
    assert doc["manifest"]["graph_source"]["path"] == str(path)
    assert doc["result"]["average"] == pytest.approx(7 / 12, abs=1e-9)


# ===== exact and bounds =====


def test_exact_path3(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """exact writes per-vertex values, bounds and a manifest."""
    code, doc = _run_json(runner, tmp_path, ["exact", "--gen", "path:3", "--r", "2"])

    assert code == 0
    report_validator.validate(doc)
    assert doc["kind"] == "exact"
    assert doc["result"]["per_vertex"] == pytest.approx([2 / 3, 5 / 12, 2 / 3], abs=1e-9)
    assert doc["bounds"]["lower"] == pytest.approx(1 / 3)

    manifest = doc["manifest"]
    assert manifest["command"] == "exact"
    assert manifest["graph_source"] == {"generator": "path", "n": 3, "path": None}
    assert manifest["r"] == 2.0
    stamp = datetime.fromisoformat(manifest["timestamp"])
    assert stamp.utcoffset() == timedelta(0)


def test_exact_cap_exceeded(runner: CliRunner) -> None:
    """Above the vertex cap the exact command exits 4."""
    result = runner.invoke(main, ["exact", "--gen", "clique:15", "--r", "2"])

    assert result.exit_code == 4
    assert "2^15" in result.output


def test_exact_cap_from_environment(runner: CliRunner) -> None:
    """The cap can be lowered through the environment."""
    result = runner.invoke(
        main, ["exact", "--gen", "clique:6", "--r", "2"], env={"MORAN_FPRAS_MAX_VERTICES": "5"}
    )

    assert result.exit_code == 4


def test_bounds_path3_neutral(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """bounds reports the neutral absorption-time bound."""
    code, doc = _run_json(runner, tmp_path, ["bounds", "--gen", "path:3", "--r", "1"])

    assert code == 0
    report_validator.validate(doc)
    assert doc["bounds"]["regime"] == "neutral"
    assert doc["bounds"]["abs_time_bound"] == pytest.approx(445.5)


def test_rejects_non_positive_fitness(runner: CliRunner) -> None:
    """r must be positive."""
    assert runner.invoke(main, ["bounds", "--gen", "path:3", "--r", "0"]).exit_code == 2


# ===== estimate =====


def test_estimate_fixation_below_neutral_is_usage_error(runner: CliRunner) -> None:
    """Fixation with r < 1 points the user at extinction mode."""
    result = runner.invoke(
        main, ["estimate", "--gen", "star:5", "--r", "0.5", "--epsilon", "0.1"]
    )

    assert result.exit_code == 2
    assert "r >= 1" in result.output


def test_estimate_report(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """A certified run on K2 writes plan, report and manifest."""
    args = [
        "estimate",
        "--gen",
        "clique:2",
        "--r",
        "2",
        "--epsilon",
        "0.1",
        "--seed",
        "12",
    ]
    code, doc = _run_json(runner, tmp_path, args)

    assert code == 0
    report_validator.validate(doc)
    assert doc["plan"]["replicates"] == 555
    assert doc["report"]["status"] == "ok"
    assert doc["report"]["estimate"] == pytest.approx(2 / 3, rel=0.15)
    assert doc["manifest"]["master_seed"] == 12
    assert doc["manifest"]["epsilon"] == 0.1


def test_estimate_aborted_exit_code(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """Truncated replicates make the command exit 3 and still write the report."""
    args = [
        "estimate",
        "--gen",
        "star:50",
        "--r",
        "1",
        "--epsilon",
        "0.1",
        "--replicates",
        "20",
        "--max-steps",
        "50",
    ]
    code, doc = _run_json(runner, tmp_path, args)

    assert code == 3
    report_validator.validate(doc)
    assert doc["report"]["status"] == "aborted"
    assert doc["report"]["truncated_runs"] >= 1
    assert doc["plan"]["guaranteed"] is False


def test_estimate_identical_across_workers(runner: CliRunner, tmp_path: Path) -> None:
    """The same seed gives the same plan and report for 1, 4 and 8 workers."""
    base = [
        "estimate",
        "--gen",
        "star:6",
        "--mode",
        "extinction",
        "--r",
        "2",
        "--epsilon",
        "0.2",
        "--seed",
        "2024",
        "--replicates",
        "600",
        "--max-steps",
        "1000000",
    ]
    outputs = []
    for workers in ("1", "4", "8"):
        code, doc = _run_json(runner, tmp_path, [*base, "--workers", workers])
        assert code == 0
        outputs.append((doc["plan"], doc["report"]))

    assert outputs[0] == outputs[1] == outputs[2]


# ===== simulate =====


def test_simulate_csv(runner: CliRunner, tmp_path: Path) -> None:
    """One row per replicate, a summary row, and a manifest comment first."""
    out = tmp_path / "runs.csv"
    result = runner.invoke(
        main,
        ["simulate", "--gen", "clique:2", "--r", "2", "--replicates", "10", "--out", str(out)],
    )

    assert result.exit_code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# manifest: ")
    manifest = json.loads(lines[0].removeprefix("# manifest: "))
    assert manifest["command"] == "simulate"

    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["replicate", "start_vertex", "outcome", "steps_taken"]
    body, summary = rows[1:-1], rows[-1]
    assert [row[0] for row in body] == [str(i) for i in range(10)]
    assert all(row[2] in ("fixation", "extinction") and row[3] == "1" for row in body)

    fixed = sum(row[2] == "fixation" for row in body)
    assert summary[:2] == ["summary", ""]
    assert float(summary[2]) == pytest.approx(fixed / 10)
    assert float(summary[3]) == 1.0


def test_simulate_is_reproducible(runner: CliRunner, tmp_path: Path) -> None:
    """Apart from the manifest line, equal seeds give byte-identical CSV."""
    bodies = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        args = ["simulate", "--gen", "double-star:8", "--r", "1.5", "--replicates", "25"]
        runner.invoke(main, [*args, "--seed", "3", "--out", str(out)])
        bodies.append(out.read_text(encoding="utf-8").split("\n", 1)[1])

    assert bodies[0] == bodies[1]


def test_simulate_start_out_of_range(runner: CliRunner) -> None:
    """A fixed start must be a vertex."""
    result = runner.invoke(
        main, ["simulate", "--gen", "path:3", "--r", "2", "--replicates", "1", "--start", "3"]
    )

    assert result.exit_code == 2


# ===== drift =====


def test_drift_exact(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """drift reports the exact value, its n^3 scaling and the threshold."""
    code, doc = _run_json(
        runner, tmp_path, ["drift", "--gen", "path:3", "--r", "2", "--subset", "0"]
    )

    assert code == 0
    report_validator.validate(doc)
    assert doc["drift"]["subset"] == [0]
    assert doc["drift"]["exact"] == pytest.approx(0.125)
    assert doc["drift"]["scaled_by_n3"] == pytest.approx(0.125 * 27)
    assert doc["drift"]["empirical"] is None


def test_drift_with_trials(runner: CliRunner, tmp_path: Path, report_validator) -> None:
    """--trials adds a Monte Carlo estimate with its standard error."""
    args = ["drift", "--gen", "path:3", "--r", "2", "--subset", "0", "--trials", "20000"]
    code, doc = _run_json(runner, tmp_path, args)

    assert code == 0
    report_validator.validate(doc)
    drift = doc["drift"]
    assert abs(drift["empirical"] - drift["exact"]) <= 5 * drift["standard_error"]


@pytest.mark.parametrize("subset", ["0-2", "0,x", "7"])
def test_drift_bad_subset(runner: CliRunner, subset: str) -> None:
    """Full, malformed and out-of-range subsets are usage errors."""
    result = runner.invoke(main, ["drift", "--gen", "path:3", "--r", "2", "--subset", subset])

    assert result.exit_code == 2


# ===== schema =====


def test_schema_command_prints_shipped_schema(runner: CliRunner) -> None:
    """schema prints exactly the file the reports are validated against."""
    result = runner.invoke(main, ["schema"])

    assert result.exit_code == 0
    assert json.loads(result.output) == json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


def test_schema_covers_every_report_model() -> None:
    """Each report model has a definition whose kind matches the model's default."""
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    names = [model.__name__ for model in REPORT_MODELS]

    assert [entry["$ref"] for entry in schema["oneOf"]] == [f"#/$defs/{name}" for name in names]
    for model in REPORT_MODELS:
        kind = schema["$defs"][model.__name__]["properties"]["kind"]["const"]
        assert kind == model.model_fields["kind"].default
