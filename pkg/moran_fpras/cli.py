"""Command-line front end: generate, solve, bound, simulate, estimate, drift."""

from __future__ import annotations

import csv
import logging
import math
import re
import sys
from collections.abc import Callable
from datetime import UTC, datetime
from importlib.resources import files
from pathlib import Path
from typing import IO, Any, Literal

import click
from pydantic import BaseModel, ConfigDict

from . import __version__
from .const import (
    DEFAULT_MAX_VERTICES,
    DEFAULT_SEED,
    EXIT_ABORTED,
    EXIT_CAP_EXCEEDED,
    MAX_VERTICES_ENV,
    TOOL_NAME,
)
from .dynamics import (
    Outcome,
    RngStream,
    drift_increments,
    drift_threshold,
    expected_drift,
    run_to_absorption,
)
from .estimator import EstimateReport, EstimatorMode, EstimatorPlan, Status, estimate, plan
from .exact import BoundsReport, ExactResult, bounds_report, fixation_exact
from .exceptions import MoranError, StateSpaceTooLargeError, UnsupportedFitnessError
from .graph import (
    GRAPH_KINDS,
    Graph,
    check_fitness,
    generate,
    proper_subset,
    read_edge_list,
    write_edge_list,
)

_LOGGER = logging.getLogger(__name__)

_U64_MAX = (1 << 64) - 1
_SUBSET_TOKEN = re.compile(r"^(\d+)(?:-(\d+))?$")

SIMULATE_HEADER = ("replicate", "start_vertex", "outcome", "steps_taken")


# ===== Data Models =====


class GraphSource(BaseModel):
    """Where the graph came from: a generator with its order, or an edge-list path."""

    model_config = ConfigDict(frozen=True)

    generator: str | None = None
    n: int | None = None
    path: str | None = None


class RunManifest(BaseModel):
    """Everything needed to reproduce a result with this tool."""

    model_config = ConfigDict(frozen=True)

    command: str
    graph_source: GraphSource
    r: float
    epsilon: float | None = None
    master_seed: int | None = None
    tool_version: str
    timestamp: str  # UTC ISO-8601, the only non-deterministic field


class DriftReport(BaseModel):
    """Exact one-step potential drift from a state, with an optional Monte Carlo check."""

    model_config = ConfigDict(frozen=True)

    subset: list[int]
    exact: float
    scaled_by_n3: float
    threshold: float
    trials: int | None = None
    empirical: float | None = None
    standard_error: float | None = None


class ExactOutput(BaseModel):
    kind: Literal["exact"] = "exact"
    manifest: RunManifest
    result: ExactResult
    bounds: BoundsReport


class BoundsOutput(BaseModel):
    kind: Literal["bounds"] = "bounds"
    manifest: RunManifest
    bounds: BoundsReport


class EstimateOutput(BaseModel):
    kind: Literal["estimate"] = "estimate"
    manifest: RunManifest
    plan: EstimatorPlan
    report: EstimateReport


class DriftOutput(BaseModel):
    kind: Literal["drift"] = "drift"
    manifest: RunManifest
    drift: DriftReport


REPORT_MODELS: tuple[type[BaseModel], ...] = (
    ExactOutput,
    BoundsOutput,
    EstimateOutput,
    DriftOutput,
)


def report_schema_text() -> str:
    """The JSON schema shipped inside the package."""
    return (files("moran_fpras") / "schemas" / "report.json").read_text(encoding="utf-8")


# ===== Helpers =====


def parse_subset_spec(spec: str) -> frozenset[int]:
    """Parse "0,3,5-7" style vertex lists (comma-separated ids and inclusive ranges)."""
    vertices: set[int] = set()
    for raw in spec.split(","):
        token = raw.strip()
        match = _SUBSET_TOKEN.match(token)
        if match is None:
            raise click.BadParameter(f"cannot parse {token!r} in subset {spec!r}")
        low = int(match.group(1))
        high = int(match.group(2)) if match.group(2) is not None else low
        if high < low:
            raise click.BadParameter(f"range {token!r} runs backwards")
        vertices.update(range(low, high + 1))
    return frozenset(vertices)


def _parse_generator(value: str) -> tuple[str, int]:
    kind, _, order = value.partition(":")
    if kind not in GRAPH_KINDS or not order.isdigit():
        raise click.BadParameter(
            f"expected KIND:N with KIND in {', '.join(GRAPH_KINDS)}, got {value!r}",
            param_hint="--gen",
        )
    return kind, int(order)


def _check_fitness_option(_ctx: click.Context, _param: click.Parameter, value: float) -> float:
    try:
        return check_fitness(value)
    except MoranError as err:
        raise click.BadParameter(str(err)) from err


def _load_graph(graph_path: Path | None, gen: str | None) -> tuple[Graph, GraphSource]:
    if (graph_path is None) == (gen is None):
        raise click.UsageError("Give exactly one of --graph PATH or --gen KIND:N")
    try:
        if graph_path is not None:
            graph, source = read_edge_list(graph_path), GraphSource(path=str(graph_path))
        else:
            assert gen is not None
            kind, n = _parse_generator(gen)
            graph, source = generate(kind, n), GraphSource(generator=kind, n=n)
    except MoranError as err:
        raise click.BadParameter(str(err), param_hint="--graph/--gen") from err
    _LOGGER.debug("Loaded graph n=%d, m=%d from %s", graph.n, graph.m, source)
    return graph, source


def _manifest(
    command: str,
    source: GraphSource,
    r: float,
    *,
    epsilon: float | None = None,
    seed: int | None = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        graph_source=source,
        r=r,
        epsilon=epsilon,
        master_seed=seed,
        tool_version=__version__,
        timestamp=datetime.now(UTC).isoformat(timespec="seconds"),
    )


def _emit(out: IO[str], model: BaseModel) -> None:
    out.write(model.model_dump_json(indent=2))
    out.write("\n")


def graph_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Shared --graph/--gen/--r options."""
    func = click.option(
        "--r",
        "r",
        type=click.FloatRange(min=0, min_open=True),
        required=True,
        callback=_check_fitness_option,
        help="Mutant fitness r > 0.",
    )(func)
    func = click.option(
        "--gen", "gen", metavar="KIND:N", help="Generated graph, e.g. star:10."
    )(func)
    return click.option(
        "--graph",
        "graph_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Edge-list file.",
    )(func)


def out_option(func: Callable[..., Any]) -> Callable[..., Any]:
    return click.option(
        "--out",
        type=click.File("w", encoding="utf-8", lazy=False),
        default="-",
        show_default="stdout",
        help="Output path.",
    )(func)


def seed_option(func: Callable[..., Any]) -> Callable[..., Any]:
    return click.option(
        "--seed",
        type=click.IntRange(0, _U64_MAX),
        default=DEFAULT_SEED,
        show_default=True,
        help="Master seed (unsigned 64-bit).",
    )(func)


# ===== Commands =====


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level to stderr.")
@click.version_option(__version__, prog_name=TOOL_NAME)
def main(verbose: bool) -> None:
    """Simulate and estimate the Moran process on undirected graphs."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command("gen")
@click.argument("kind", type=click.Choice(GRAPH_KINDS))
@click.argument("n", type=int)
@out_option
def cmd_gen(kind: str, n: int, out: IO[str]) -> None:
    """Write the canonical edge list of a generated graph."""
    try:
        graph = generate(kind, n)
    except MoranError as err:
        raise click.BadParameter(str(err), param_hint="N") from err
    out.write(write_edge_list(graph))


@main.command("exact")
@graph_options
@click.option(
    "--max-vertices",
    type=click.IntRange(min=2),
    default=DEFAULT_MAX_VERTICES,
    envvar=MAX_VERTICES_ENV,
    show_default=True,
    help="Largest n the exact solver accepts.",
)
@click.option(
    "--method",
    type=click.Choice(["auto", "dense", "sparse", "iterative"]),
    default="auto",
    show_default=True,
)
@out_option
@click.pass_context
def cmd_exact(
    ctx: click.Context,
    graph_path: Path | None,
    gen: str | None,
    r: float,
    max_vertices: int,
    method: Literal["auto", "dense", "sparse", "iterative"],
    out: IO[str],
) -> None:
    """Solve the full absorbing chain for exact fixation probabilities."""
    graph, source = _load_graph(graph_path, gen)
    try:
        result = fixation_exact(graph, r, method=method, max_vertices=max_vertices)
    except StateSpaceTooLargeError as err:
        click.echo(f"Error: {err}", err=True)
        ctx.exit(EXIT_CAP_EXCEEDED)
    _emit(
        out,
        ExactOutput(
            manifest=_manifest("exact", source, r), result=result, bounds=bounds_report(graph, r)
        ),
    )


@main.command("bounds")
@graph_options
@out_option
def cmd_bounds(graph_path: Path | None, gen: str | None, r: float, out: IO[str]) -> None:
    """Fixation-probability and absorption-time bounds without solving the chain."""
    graph, source = _load_graph(graph_path, gen)
    report = bounds_report(graph, r)
    _emit(out, BoundsOutput(manifest=_manifest("bounds", source, r), bounds=report))


@main.command("estimate")
@graph_options
@click.option(
    "--mode",
    type=click.Choice([mode.value for mode in EstimatorMode]),
    default=EstimatorMode.FIXATION.value,
    show_default=True,
)
@click.option("--epsilon", type=click.FloatRange(0, 1, min_open=True, max_open=True), required=True)
@seed_option
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--replicates", type=click.IntRange(min=1), help="Override N (no accuracy guarantee)."
)
@click.option("--max-steps", type=click.IntRange(min=0), help="Override T (no accuracy guarantee).")
@click.option("--accelerated", is_flag=True, help="Skip lazy steps, counting them geometrically.")
@out_option
@click.pass_context
def cmd_estimate(
    ctx: click.Context,
    graph_path: Path | None,
    gen: str | None,
    r: float,
    mode: str,
    epsilon: float,
    seed: int,
    workers: int,
    replicates: int | None,
    max_steps: int | None,
    accelerated: bool,
    out: IO[str],
) -> None:
    """Estimate fixation (r >= 1) or extinction (r > 0) probability by simulation."""
    graph, source = _load_graph(graph_path, gen)
    try:
        estimator_plan = plan(
            graph,
            mode,
            r,
            epsilon,
            master_seed=seed,
            replicates=replicates,
            step_cap=max_steps,
            accelerated=accelerated,
        )
    except UnsupportedFitnessError as err:
        raise click.BadParameter(str(err), param_hint="--r") from err

    report = estimate(graph, estimator_plan, workers=workers)
    _emit(
        out,
        EstimateOutput(
            manifest=_manifest("estimate", source, r, epsilon=epsilon, seed=seed),
            plan=estimator_plan,
            report=report,
        ),
    )
    if report.status is Status.ABORTED:
        ctx.exit(EXIT_ABORTED)


@main.command("simulate")
@graph_options
@click.option("--replicates", type=click.IntRange(min=1), required=True)
@click.option(
    "--max-steps", type=click.IntRange(min=0), help="Per-replicate step cap (default: none)."
)
@click.option("--start", type=click.IntRange(min=0), help="Fixed start vertex (default: uniform).")
@click.option("--accelerated", is_flag=True, help="Skip lazy steps, counting them geometrically.")
@seed_option
@out_option
def cmd_simulate(
    graph_path: Path | None,
    gen: str | None,
    r: float,
    replicates: int,
    max_steps: int | None,
    start: int | None,
    accelerated: bool,
    seed: int,
    out: IO[str],
) -> None:
    """Run independent trajectories and write one CSV row per replicate."""
    graph, source = _load_graph(graph_path, gen)
    if start is not None and start >= graph.n:
        raise click.BadParameter(f"start vertex {start} is out of range", param_hint="--start")
    cap = sys.maxsize if max_steps is None else max_steps

    out.write(f"# manifest: {_manifest('simulate', source, r, seed=seed).model_dump_json()}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SIMULATE_HEADER)

    fixations = 0
    total_steps = 0
    for index in range(replicates):
        rng = RngStream.for_replicate(seed, index)
        start_vertex = rng.below(graph.n) if start is None else start
        result = run_to_absorption(graph, r, start_vertex, cap, rng, accelerated=accelerated)
        fixations += result.outcome is Outcome.FIXATION
        total_steps += result.steps_taken
        writer.writerow((index, result.start_vertex, result.outcome.value, result.steps_taken))

    writer.writerow(("summary", "", repr(fixations / replicates), repr(total_steps / replicates)))


@main.command("drift")
@graph_options
@click.option("--subset", required=True, help='Mutant set, e.g. "0,3,5-7".')
@click.option("--trials", type=click.IntRange(min=1), help="Also estimate the drift empirically.")
@seed_option
@out_option
def cmd_drift(
    graph_path: Path | None,
    gen: str | None,
    r: float,
    subset: str,
    trials: int | None,
    seed: int,
    out: IO[str],
) -> None:
    """Exact expected one-step change of the potential from a mutant set."""
    graph, source = _load_graph(graph_path, gen)
    try:
        members = proper_subset(graph, parse_subset_spec(subset))
    except MoranError as err:
        raise click.BadParameter(str(err), param_hint="--subset") from err

    exact = expected_drift(graph, members, r)
    empirical = standard_error = None
    if trials is not None:
        increments = drift_increments(graph, members, r, trials, RngStream.for_replicate(seed, 0))
        empirical = float(increments.mean())
        standard_error = float(increments.std(ddof=1) / math.sqrt(trials)) if trials > 1 else None

    report = DriftReport(
        subset=sorted(members),
        exact=exact,
        scaled_by_n3=exact * graph.n**3,
        threshold=drift_threshold(graph.n, r),
        trials=trials,
        empirical=empirical,
        standard_error=standard_error,
    )
    _emit(
        out,
        DriftOutput(
            manifest=_manifest("drift", source, r, seed=seed if trials else None), drift=report
        ),
    )


@main.command("schema")
@out_option
def cmd_schema(out: IO[str]) -> None:
    """Print the published JSON schema that every JSON report validates against."""
    out.write(report_schema_text())


__all__ = ["REPORT_MODELS", "RunManifest", "main", "parse_subset_spec", "report_schema_text"]
