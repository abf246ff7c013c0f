"""Monte Carlo approximation schemes for fixation (r >= 1) and extinction (r > 0).

Each replicate simulates the process from a uniformly random single mutant
for at most T steps; the estimate is the share of replicates ending in the
requested absorbing state. If any replicate is cut off at T the run is
reported as aborted rather than returning a number.

The sample counts assume r is part of the input size, as when r is written in
unary; here r is an ordinary float and that condition is not enforced.
"""

from __future__ import annotations

import logging
import math
from enum import StrEnum
from fractions import Fraction

from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict

from .const import ADVISORY_CONFIDENCE, DEFAULT_SEED, LN_16, REPLICATE_BATCH_SIZE
from .dynamics import Outcome, RngStream, TrajectoryResult, check_seed, run_to_absorption
from .exact import Regime, extinction_lower_bound, fitness_regime, fixation_lower_bound
from .exceptions import InvalidParameterError, UnsupportedFitnessError
from .graph import Graph, check_fitness

_LOGGER = logging.getLogger(__name__)


class EstimatorMode(StrEnum):
    """Which absorption probability is estimated."""

    FIXATION = "fixation"
    EXTINCTION = "extinction"


class Status(StrEnum):
    OK = "ok"
    ABORTED = "aborted"


# ===== Data Models =====


class EstimatorPlan(BaseModel):
    """Replicate count N and per-replicate step cap T for one estimation run."""

    model_config = ConfigDict(frozen=True)

    mode: EstimatorMode
    n: int
    r: float
    epsilon: float
    replicates: int  # N
    step_cap: int  # T
    master_seed: int
    guaranteed: bool = True  # False once N or T was overridden
    accelerated: bool = False


class EstimateReport(BaseModel):
    """Result of running a plan. ``estimate`` is only meaningful when status is ok."""

    model_config = ConfigDict(frozen=True)

    mode: EstimatorMode
    r: float
    epsilon: float
    estimate: float
    successes: int
    replicates: int
    step_cap: int
    truncated_runs: int
    status: Status
    guaranteed: bool
    master_seed: int
    mean_steps: float | None  # over replicates that absorbed
    failure_bound: float
    confidence_half_width: float  # advisory only, not part of the guarantee


class ReplicateTally(BaseModel):
    """Commutative partial sums over a batch of replicates."""

    successes: int = 0
    truncated: int = 0
    absorbed: int = 0
    absorbed_steps: int = 0

    def merge(self, other: ReplicateTally) -> ReplicateTally:
        return ReplicateTally(
            successes=self.successes + other.successes,
            truncated=self.truncated + other.truncated,
            absorbed=self.absorbed + other.absorbed,
            absorbed_steps=self.absorbed_steps + other.absorbed_steps,
        )


# ===== Planning =====


def _check_epsilon(epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise InvalidParameterError(f"epsilon must be in (0, 1), got {epsilon}")
    return float(epsilon)


def certified_replicates(n: int, mode: EstimatorMode, r: float, epsilon: float) -> int:
    """N = ceil(ln 16 / 2 * eps^-2 * n^2) for fixation, with (r + n)^2 for extinction."""
    epsilon = _check_epsilon(epsilon)
    scale = float(n) if mode is EstimatorMode.FIXATION else r + n
    return math.ceil(0.5 * scale * scale * LN_16 / (epsilon * epsilon))


def certified_step_cap(n: int, r: float, replicates: int) -> int:
    """
    T for a given N.

    r < 1: ceil(8/(1 - r) N n^3); r > 1: ceil(8r/(r - 1) N n^4); r = 1: 8 N n^6.
    Evaluated in exact rational arithmetic on the binary value of r.
    """
    regime = fitness_regime(r)
    if regime is Regime.NEUTRAL:
        return 8 * replicates * n**6
    exact_r = Fraction(r)
    if regime is Regime.DISADVANTAGEOUS:
        return math.ceil(Fraction(8) / (1 - exact_r) * replicates * n**3)
    return math.ceil(Fraction(8) * exact_r / (exact_r - 1) * replicates * n**4)


def plan(
    graph: Graph,
    mode: EstimatorMode | str,
    r: float,
    epsilon: float,
    *,
    master_seed: int = DEFAULT_SEED,
    replicates: int | None = None,
    step_cap: int | None = None,
    accelerated: bool = False,
) -> EstimatorPlan:
    """
    Derive N and T for the approximation scheme.

    Args:
        graph: Graph to estimate on
        mode: fixation (requires r >= 1) or extinction (any r > 0)
        r: Mutant fitness
        epsilon: Relative error target in (0, 1)
        master_seed: Unsigned 64-bit seed every replicate stream derives from
        replicates: Override N (practical mode, no guarantee)
        step_cap: Override T (practical mode, no guarantee)
        accelerated: Skip lazy steps with a geometric step count

    Returns:
        EstimatorPlan

    Raises:
        UnsupportedFitnessError: Fixation mode with r < 1
        InvalidParameterError: epsilon, seed or overrides out of range
    """
    mode = EstimatorMode(mode)
    r = check_fitness(r)
    epsilon = _check_epsilon(epsilon)
    check_seed(master_seed)
    if mode is EstimatorMode.FIXATION and fitness_regime(r) is Regime.DISADVANTAGEOUS:
        raise UnsupportedFitnessError(
            f"Fixation estimation needs r >= 1 (got r={r}); no approximation scheme is known "
            "for fixation with r < 1. Estimate extinction instead."
        )

    n = graph.n
    certified_n = certified_replicates(n, mode, r, epsilon)
    certified_t = certified_step_cap(n, r, certified_n)

    guaranteed = replicates is None and step_cap is None
    if replicates is not None and replicates < 1:
        raise InvalidParameterError(f"replicates must be at least 1, got {replicates}")
    if step_cap is not None and step_cap < 0:
        raise InvalidParameterError(f"step_cap must be non-negative, got {step_cap}")

    result = EstimatorPlan(
        mode=mode,
        n=n,
        r=r,
        epsilon=epsilon,
        replicates=certified_n if replicates is None else replicates,
        step_cap=certified_t if step_cap is None else step_cap,
        master_seed=master_seed,
        guaranteed=guaranteed,
        accelerated=accelerated,
    )
    if guaranteed:
        _LOGGER.debug(
            "Plan %s n=%d r=%g eps=%g: N=%d, T=%d",
            mode,
            n,
            r,
            epsilon,
            result.replicates,
            result.step_cap,
        )
    else:
        _LOGGER.warning(
            "Practical plan (N=%d, T=%d instead of N=%d, T=%d) carries no accuracy guarantee",
            result.replicates,
            result.step_cap,
            certified_n,
            certified_t,
        )
    return result


# ===== Error bounds =====


def hoeffding_error_bound(replicates: int, epsilon: float, f_lower: float) -> float:
    """P[|p - f| > eps f] <= 2 exp(-2 eps^2 f^2 N), assuming f >= f_lower. Not capped at 1."""
    if replicates < 1 or epsilon <= 0:
        raise InvalidParameterError("replicates and epsilon must be positive")
    if not 0.0 < f_lower <= 1.0:
        raise InvalidParameterError(f"f_lower must be in (0, 1], got {f_lower}")
    return 2.0 * math.exp(-2.0 * epsilon * epsilon * f_lower * f_lower * replicates)


def probability_floor(n: int, mode: EstimatorMode, r: float) -> float:
    """Smallest value the estimated probability can take on any graph of order n."""
    if mode is EstimatorMode.FIXATION:
        return fixation_lower_bound(n, r)
    return extinction_lower_bound(n, r)


def advisory_half_width(replicates: int, confidence: float = ADVISORY_CONFIDENCE) -> float:
    """Additive Hoeffding half-width sqrt(ln(2 / (1 - confidence)) / 2N)."""
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * replicates))


# ===== Execution =====


def run_replicate(graph: Graph, plan: EstimatorPlan, index: int) -> TrajectoryResult:
    """Replicate ``index`` of the plan; depends on nothing but (plan, index)."""
    rng = RngStream.for_replicate(plan.master_seed, index)
    start = rng.below(graph.n)
    return run_to_absorption(
        graph, plan.r, start, plan.step_cap, rng, accelerated=plan.accelerated
    )


def _run_batch(graph: Graph, plan: EstimatorPlan, first: int, stop: int) -> ReplicateTally:
    wanted = Outcome.FIXATION if plan.mode is EstimatorMode.FIXATION else Outcome.EXTINCTION
    successes = truncated = absorbed = absorbed_steps = 0
    for index in range(first, stop):
        result = run_replicate(graph, plan, index)
        if result.outcome is Outcome.TRUNCATED:
            truncated += 1
            continue
        absorbed += 1
        absorbed_steps += result.steps_taken
        if result.outcome is wanted:
            successes += 1
    return ReplicateTally(
        successes=successes, truncated=truncated, absorbed=absorbed, absorbed_steps=absorbed_steps
    )


def estimate(graph: Graph, plan: EstimatorPlan, workers: int = 1) -> EstimateReport:
    """
    Run all N replicates and report the proportion ending in the plan's mode.

    Replicates are split into fixed-size index ranges; the result does not
    depend on ``workers``. A truncated replicate makes the status aborted.
    """
    if plan.n != graph.n:
        raise InvalidParameterError(f"Plan was made for n={plan.n}, graph has n={graph.n}")
    if workers < 1:
        raise InvalidParameterError(f"workers must be at least 1, got {workers}")

    batches = [
        (first, min(first + REPLICATE_BATCH_SIZE, plan.replicates))
        for first in range(0, plan.replicates, REPLICATE_BATCH_SIZE)
    ]
    _LOGGER.debug(
        "Running %d replicates in %d batches on %d worker(s)",
        plan.replicates,
        len(batches),
        workers,
    )
    if workers == 1:
        tallies = [_run_batch(graph, plan, first, stop) for first, stop in batches]
    else:
        tallies = Parallel(n_jobs=workers)(
            delayed(_run_batch)(graph, plan, first, stop) for first, stop in batches
        )

    total = ReplicateTally()
    for tally in tallies:
        total = total.merge(tally)

    status = Status.ABORTED if total.truncated else Status.OK
    if status is Status.ABORTED:
        _LOGGER.warning(
            "%d of %d replicates hit the step cap T=%d; estimate aborted",
            total.truncated,
            plan.replicates,
            plan.step_cap,
        )

    floor = probability_floor(plan.n, plan.mode, plan.r)
    return EstimateReport(
        mode=plan.mode,
        r=plan.r,
        epsilon=plan.epsilon,
        estimate=total.successes / plan.replicates,
        successes=total.successes,
        replicates=plan.replicates,
        step_cap=plan.step_cap,
        truncated_runs=total.truncated,
        status=status,
        guaranteed=plan.guaranteed,
        master_seed=plan.master_seed,
        mean_steps=total.absorbed_steps / total.absorbed if total.absorbed else None,
        failure_bound=min(1.0, hoeffding_error_bound(plan.replicates, plan.epsilon, floor)),
        confidence_half_width=advisory_half_width(plan.replicates),
    )


__all__ = [
    "EstimateReport",
    "EstimatorMode",
    "EstimatorPlan",
    "ReplicateTally",
    "Status",
    "advisory_half_width",
    "certified_replicates",
    "certified_step_cap",
    "estimate",
    "hoeffding_error_bound",
    "plan",
    "probability_floor",
    "run_replicate",
]
