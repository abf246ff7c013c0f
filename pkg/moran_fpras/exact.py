"""Exact fixation probabilities on small graphs, closed forms and bounds."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from enum import StrEnum
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from pydantic import BaseModel, ConfigDict

from .const import (
    DEFAULT_MAX_VERTICES,
    DENSE_SOLVER_MAX_VERTICES,
    ITERATIVE_CHECK_EVERY,
    ITERATIVE_MAX_SWEEPS,
    NEUTRAL_FITNESS_TOLERANCE,
    SOLVER_TOLERANCE,
    SPARSE_ILU_DROP_TOL,
    SPARSE_ILU_FILL_FACTOR,
    SPARSE_MAX_ITERATIONS,
)
from .dynamics import transition_probabilities
from .exceptions import (
    InvalidParameterError,
    StateSpaceTooLargeError,
    UnsupportedFitnessError,
)
from .graph import Graph, check_fitness, graph_potential, phi_prime_0, q_value, q_values

_LOGGER = logging.getLogger(__name__)

SolverMethod = Literal["auto", "dense", "sparse", "iterative"]


class Regime(StrEnum):
    """Which side of neutral the mutant fitness lies on."""

    DISADVANTAGEOUS = "disadvantageous"
    NEUTRAL = "neutral"
    ADVANTAGEOUS = "advantageous"


def fitness_regime(r: float) -> Regime:
    r = check_fitness(r)
    if abs(r - 1.0) < NEUTRAL_FITNESS_TOLERANCE:
        return Regime.NEUTRAL
    return Regime.ADVANTAGEOUS if r > 1.0 else Regime.DISADVANTAGEOUS


# ===== Data Models =====


class ExactResult(BaseModel):
    """Fixation probability from every start vertex, and their mean."""

    model_config = ConfigDict(frozen=True)

    n: int
    r: float
    per_vertex: list[float]
    average: float
    method: SolverMethod


class BoundsReport(BaseModel):
    """Fixation-probability bounds and the expected absorption-time bound."""

    model_config = ConfigDict(frozen=True)

    n: int
    r: float
    regime: Regime
    lower: float | None  # only defined for r >= 1
    upper_coarse: float
    upper_refined: float
    abs_time_bound: float
    abs_time_bound_coarse: float


# ===== Linear system =====


def _transition_matrix(graph: Graph, r: float) -> tuple[sp.csr_matrix, np.ndarray]:
    """Off-diagonal transition probabilities over all 2^n masks, plus popcounts.

    Mask bit x is set when vertex x holds a mutant. Reproducer x sends its
    type to y: a mutant x adds y with probability r / (W deg x), a
    non-mutant x removes y with probability 1 / (W deg x).
    """
    n = graph.n
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)
    popcount = bits.sum(axis=1)
    weight = r * popcount + (n - popcount)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    inv = graph.inv_degree
    for x, neighbours in enumerate(graph.adjacency):
        for y in neighbours:
            gain = bits[:, x] & ~bits[:, y]
            source = masks[gain]
            rows.append(source)
            cols.append(source | (1 << y))
            vals.append(r * inv[x] / weight[gain])

            loss = ~bits[:, x] & bits[:, y]
            source = masks[loss]
            rows.append(source)
            cols.append(source & ~(1 << y))
            vals.append(inv[x] / weight[loss])

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    ).tocsr()
    return matrix, popcount


def _solve_iterative(
    system: sp.csr_matrix, rhs: np.ndarray, guess: np.ndarray, tol: float
) -> np.ndarray:
    """Jacobi fixed-point sweeps x <- D^-1 (b - (A - D) x) until the residual is below tol."""
    diagonal = system.diagonal()
    off_diagonal = system - sp.diags(diagonal)
    solution = guess.copy()
    for sweep in range(1, ITERATIVE_MAX_SWEEPS + 1):
        solution = (rhs - off_diagonal @ solution) / diagonal
        if sweep % ITERATIVE_CHECK_EVERY == 0:
            residual = float(np.max(np.abs(system @ solution - rhs)))
            if residual < tol:
                _LOGGER.debug("Iterative solve converged after %d sweeps", sweep)
                return solution
    _LOGGER.warning(
        "Iterative solve stopped after %d sweeps without reaching tolerance %g",
        ITERATIVE_MAX_SWEEPS,
        tol,
    )
    return solution


def _solve_sparse(system: sp.csr_matrix, rhs: np.ndarray, guess: np.ndarray) -> np.ndarray:
    """BiCGSTAB with an incomplete-LU preconditioner, falling back to a full sparse LU.

    The system is a diagonally dominant M-matrix. A direct factorisation of it
    fills in badly above a dozen vertices.
    """
    csc = system.tocsc()
    try:
        factor = spla.spilu(csc, drop_tol=SPARSE_ILU_DROP_TOL, fill_factor=SPARSE_ILU_FILL_FACTOR)
    except RuntimeError as err:
        _LOGGER.warning("Incomplete LU failed (%s); using a direct sparse solve", err)
        return spla.spsolve(csc, rhs)

    preconditioner = spla.LinearOperator(system.shape, factor.solve)
    values, info = spla.bicgstab(
        system,
        rhs,
        x0=guess,
        rtol=0.0,
        atol=SOLVER_TOLERANCE / 10,
        maxiter=SPARSE_MAX_ITERATIONS,
        M=preconditioner,
    )
    residual = float(np.max(np.abs(system @ values - rhs)))
    if not residual < SOLVER_TOLERANCE:
        _LOGGER.warning(
            "BiCGSTAB stopped with info=%d and residual %g; using a direct sparse solve",
            info,
            residual,
        )
        return spla.spsolve(csc, rhs)
    _LOGGER.debug("BiCGSTAB converged with residual %g", residual)
    return values


def _resolve_method(method: SolverMethod, n: int) -> SolverMethod:
    if method != "auto":
        return method
    return "dense" if n <= DENSE_SOLVER_MAX_VERTICES else "sparse"


def solve_fixation_system(
    graph: Graph,
    r: float,
    *,
    method: SolverMethod = "auto",
    max_vertices: int = DEFAULT_MAX_VERTICES,
    tol: float = SOLVER_TOLERANCE,
) -> np.ndarray:
    """
    Fixation probability from every mutant set, indexed by bit mask.

    Solves f(S) = sum_T P(S -> T) f(T) with f(V) = 1 and f(empty) = 0 over
    all 2^n states. Transient states are ordered by population count, which
    makes the system block-tridiagonal.

    Args:
        graph: Graph of order n
        r: Mutant fitness
        method: "dense" (LU with partial pivoting), "sparse" (preconditioned BiCGSTAB),
            "iterative" (fixed-point sweeps, allowed above the cap) or "auto"
        max_vertices: Largest n accepted by the direct methods
        tol: Convergence tolerance for the iterative method

    Returns:
        Array of length 2^n

    Raises:
        StateSpaceTooLargeError: If n exceeds max_vertices for a direct method
    """
    r = check_fitness(r)
    n = graph.n
    method = _resolve_method(method, n)
    if method != "iterative" and n > max_vertices:
        raise StateSpaceTooLargeError(n, max_vertices)

    size = 1 << n
    full = size - 1
    matrix, popcount = _transition_matrix(graph, r)

    transient = np.arange(1, full, dtype=np.int64)
    transient = transient[np.argsort(popcount[transient], kind="stable")]
    _LOGGER.debug(
        "Solving %d transient states for n=%d, r=%g with %s", transient.size, n, r, method
    )

    # out(S) f(S) - sum_{T transient, T != S} P(S, T) f(T) = P(S, V)
    restricted = matrix[transient][:, transient]
    leaving = np.asarray(matrix[transient].sum(axis=1)).ravel()
    system = (sp.diags(leaving) - restricted).tocsr()
    rhs = matrix[transient][:, [full]].toarray().ravel()

    if method == "dense":
        values = np.linalg.solve(system.toarray(), rhs)
    elif method == "sparse":
        values = _solve_sparse(system, rhs, popcount[transient] / n)
    elif method == "iterative":
        values = _solve_iterative(system, rhs, popcount[transient] / n, tol)
    else:
        raise InvalidParameterError(f"Unknown solver method {method!r}")

    solution = np.zeros(size)
    solution[transient] = values
    solution[full] = 1.0
    return solution


def fixation_exact(
    graph: Graph,
    r: float,
    *,
    method: SolverMethod = "auto",
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> ExactResult:
    """Exact per-start-vertex and average fixation probability."""
    resolved = _resolve_method(method, graph.n)
    solution = solve_fixation_system(graph, r, method=resolved, max_vertices=max_vertices)
    per_vertex = [float(solution[1 << x]) for x in range(graph.n)]
    return ExactResult(
        n=graph.n,
        r=r,
        per_vertex=per_vertex,
        average=math.fsum(per_vertex) / graph.n,
        method=resolved,
    )


def one_step_residual(
    graph: Graph, r: float, solution: np.ndarray, masks: Iterable[int]
) -> np.ndarray:
    """|sum_T P(S -> T) f(T) - f(S)| for each given mask, using the symbolic step rule."""
    residuals = []
    for mask in masks:
        members = [x for x in range(graph.n) if mask >> x & 1]
        expected = math.fsum(
            probability * solution[sum(1 << x for x in successor)]
            for successor, probability in transition_probabilities(graph, members, r).items()
        )
        residuals.append(abs(expected - solution[mask]))
    return np.array(residuals)


# ===== Closed forms and bounds =====


def _check_order(n: int) -> None:
    if n < 2:
        raise InvalidParameterError(f"Graph order must be at least 2, got {n}")


def clique_closed_form(n: int, r: float) -> float:
    """Fixation probability of K_n: (1 - 1/r) / (1 - 1/r^n), or 1/n at r = 1."""
    _check_order(n)
    if fitness_regime(r) is Regime.NEUTRAL:
        return 1.0 / n
    return (1.0 - 1.0 / r) / (1.0 - r ** (-n))


def fixation_lower_bound(n: int, r: float) -> float:
    """1/n, valid for every graph of order n when r >= 1."""
    _check_order(n)
    if fitness_regime(r) is Regime.DISADVANTAGEOUS:
        raise UnsupportedFitnessError(
            f"No polynomial lower bound on fixation exists for r < 1 (got r={r})"
        )
    return 1.0 / n


def reach_two_probability(graph: Graph, r: float, x: int) -> float:
    """Probability that a lone mutant at x creates a second mutant before dying: r/(r + Q(x))."""
    r = check_fitness(r)
    return r / (r + q_value(graph, x))


def fixation_upper_bound(graph: Graph, r: float) -> tuple[float, float]:
    """
    Upper bounds on the average fixation probability.

    Returns:
        (coarse, refined) where coarse = 1 - 1/(n + r) and refined is
        (r/n) * sum_x 1/(r + Q(x)), never above coarse
    """
    r = check_fitness(r)
    n = graph.n
    coarse = 1.0 - 1.0 / (n + r)
    refined = r / n * math.fsum(1.0 / (r + q) for q in q_values(graph))
    return coarse, min(refined, coarse)


def extinction_lower_bound(n: int, r: float) -> float:
    """1/(n + r): the extinction probability is never smaller."""
    _check_order(n)
    return 1.0 / (n + check_fitness(r))


def absorption_time_bound(graph: Graph, r: float, *, coarse: bool = False) -> float:
    """
    Upper bound on the expected number of steps to absorption.

    r < 1: n^3 / (1 - r)
    r > 1: (r / (r - 1)) n^3 phi(G), or (r / (r - 1)) n^4 when coarse
    r = 1: n^4 (phi(G)^2 - phi'_0), or n^4 phi(G)^2 when coarse
    """
    n = graph.n
    regime = fitness_regime(r)
    if regime is Regime.DISADVANTAGEOUS:
        return n**3 / (1.0 - r)
    if regime is Regime.ADVANTAGEOUS:
        return r / (r - 1.0) * n**3 * (n if coarse else graph_potential(graph))
    phi = graph_potential(graph)
    return n**4 * (phi * phi if coarse else phi * phi - phi_prime_0(graph))


def absorption_step_budget(graph: Graph, r: float, failure: float) -> float:
    """Steps within which absorption happens with probability at least 1 - failure."""
    if not 0.0 < failure < 1.0:
        raise InvalidParameterError(f"failure must be in (0, 1), got {failure}")
    return absorption_time_bound(graph, r) / failure


def bounds_report(graph: Graph, r: float) -> BoundsReport:
    r = check_fitness(r)
    coarse, refined = fixation_upper_bound(graph, r)
    return BoundsReport(
        n=graph.n,
        r=r,
        regime=fitness_regime(r),
        lower=None
        if fitness_regime(r) is Regime.DISADVANTAGEOUS
        else fixation_lower_bound(graph.n, r),
        upper_coarse=coarse,
        upper_refined=refined,
        abs_time_bound=absorption_time_bound(graph, r),
        abs_time_bound_coarse=absorption_time_bound(graph, r, coarse=True),
    )


__all__ = [
    "BoundsReport",
    "ExactResult",
    "Regime",
    "SolverMethod",
    "absorption_step_budget",
    "absorption_time_bound",
    "bounds_report",
    "clique_closed_form",
    "extinction_lower_bound",
    "fitness_regime",
    "fixation_exact",
    "fixation_lower_bound",
    "fixation_upper_bound",
    "one_step_residual",
    "reach_two_probability",
    "solve_fixation_system",
]
