"""The Moran process: step sampling, trajectories to absorption, potential drift."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterable
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict

from .const import RNG_BUFFER_SIZE
from .exceptions import InvalidParameterError, UnsupportedFitnessError
from .graph import Graph, check_fitness, proper_subset, vertex_set

_LOGGER = logging.getLogger(__name__)

_U64_LIMIT = 1 << 64


# ===== Data Models =====


class Outcome(StrEnum):
    """How a trajectory ended."""

    FIXATION = "fixation"
    EXTINCTION = "extinction"
    TRUNCATED = "truncated"


class TrajectoryResult(BaseModel):
    """Outcome of one run from a single initial mutant."""

    model_config = ConfigDict(frozen=True)

    outcome: Outcome
    steps_taken: int  # every step, including lazy ones that leave the state unchanged
    start_vertex: int


# ===== Random streams =====


def check_seed(seed: int) -> int:
    if not 0 <= seed < _U64_LIMIT:
        raise InvalidParameterError(f"Seed must be an unsigned 64-bit integer, got {seed}")
    return seed


class RngStream:
    """Deterministic uniform stream for one replicate.

    The PCG64 state comes from a SeedSequence keyed by (master_seed, index), so
    equal keys reproduce the stream and distinct indices get independent ones.
    Uniforms are drawn from numpy in blocks and handed out one at a time.
    """

    __slots__ = ("_buffer", "_buffer_size", "_generator", "_pos")

    def __init__(
        self, master_seed: int, index: int = 0, buffer_size: int = RNG_BUFFER_SIZE
    ) -> None:
        check_seed(master_seed)
        if index < 0:
            raise InvalidParameterError(f"Replicate index must be non-negative, got {index}")
        sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
        self._generator = np.random.Generator(np.random.PCG64(sequence))
        self._buffer_size = buffer_size
        self._buffer: list[float] = []
        self._pos = 0

    @classmethod
    def for_replicate(cls, master_seed: int, index: int) -> RngStream:
        return cls(master_seed, index)

    def uniform(self) -> float:
        """Next uniform in [0, 1)."""
        if self._pos == len(self._buffer):
            self._buffer = self._generator.random(self._buffer_size).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value

    def below(self, k: int) -> int:
        """Uniform integer in [0, k)."""
        return min(int(self.uniform() * k), k - 1)

    def geometric_failures(self, p: float) -> int:
        """Failures before the first success of a Bernoulli(p) sequence."""
        if p >= 1.0:
            return 0
        # 1 - U lies in (0, 1], so the log is finite
        return int(math.log(1.0 - self.uniform()) / math.log1p(-p))


# ===== Mutant state =====


class MutantState:
    """Mutant set X with O(1) membership, O(1) uniform indexing and cached W(X).

    ``_order`` holds every vertex: the first ``mutant_count`` entries are the
    mutants and the rest are non-mutants; ``_position`` inverts it. Changing a
    vertex's type is a single swap across the boundary.
    """

    __slots__ = ("_is_mutant", "_k", "_order", "_position", "graph", "r", "total_fitness")

    def __init__(self, graph: Graph, r: float, mutants: Iterable[int] = ()) -> None:
        self.graph = graph
        self.r = check_fitness(r)
        members = vertex_set(graph, mutants)

        self._is_mutant = [x in members for x in range(graph.n)]
        self._order = sorted(members) + [x for x in range(graph.n) if x not in members]
        self._position = [0] * graph.n
        for idx, x in enumerate(self._order):
            self._position[x] = idx
        self._k = len(members)
        self.total_fitness = self.r * self._k + (graph.n - self._k)

    @classmethod
    def from_vertices(cls, graph: Graph, r: float, mutants: Iterable[int]) -> MutantState:
        return cls(graph, r, mutants)

    @property
    def mutant_count(self) -> int:
        return self._k

    @property
    def mutants(self) -> frozenset[int]:
        return frozenset(self._order[: self._k])

    def contains(self, x: int) -> bool:
        return self._is_mutant[x]

    def is_extinction(self) -> bool:
        return self._k == 0

    def is_fixation(self) -> bool:
        return self._k == self.graph.n

    def is_absorbing(self) -> bool:
        return self._k == 0 or self._k == self.graph.n

    def potential(self) -> float:
        inv = self.graph.inv_degree
        return math.fsum(inv[x] for x in self._order[: self._k])

    def copy(self) -> MutantState:
        return MutantState(self.graph, self.r, self._order[: self._k])

    def _flip(self, y: int) -> None:
        """Switch the type of vertex y."""
        order, position = self._order, self._position
        j = position[y]
        if self._is_mutant[y]:
            self._k -= 1
            boundary = self._k
            other = order[boundary]
            order[j], position[other] = other, j
            order[boundary], position[y] = y, boundary
            self._is_mutant[y] = False
        else:
            boundary = self._k
            other = order[boundary]
            order[j], position[other] = other, j
            order[boundary], position[y] = y, boundary
            self._is_mutant[y] = True
            self._k += 1
        self.total_fitness = self.r * self._k + (self.graph.n - self._k)

    def __repr__(self) -> str:
        return f"MutantState(n={self.graph.n}, r={self.r}, mutants={sorted(self.mutants)})"


def _sample_event(state: MutantState, rng: RngStream) -> tuple[int, int]:
    """Draw (reproducer, offspring vertex) for one step from a non-absorbing state.

    One uniform u in [0, W) picks the reproducer: u < r|X| selects mutant
    floor(u / r), otherwise non-mutant floor(u - r|X|).
    """
    k = state._k
    n = state.graph.n
    mutant_mass = state.r * k
    u = rng.uniform() * state.total_fitness
    if u < mutant_mass:
        idx = min(int(u / state.r), k - 1)
    else:
        idx = k + min(int(u - mutant_mass), n - k - 1)
    reproducer = state._order[idx]
    neighbours = state.graph.adjacency[reproducer]
    return reproducer, neighbours[rng.below(len(neighbours))]


# ===== Process =====


def step(graph: Graph, state: MutantState, r: float, rng: RngStream) -> MutantState:
    """
    Advance the process by one step, in place.

    A reproducer is chosen with probability proportional to its fitness and
    copies its type onto a uniform neighbour. Absorbing states are fixed
    points. The same state object is returned.
    """
    if state.graph is not graph and state.graph != graph:
        raise InvalidParameterError("State belongs to a different graph")
    if state.r != r:
        raise UnsupportedFitnessError(f"State was built for r={state.r}, step called with r={r}")
    if state.is_absorbing():
        return state

    reproducer, target = _sample_event(state, rng)
    if state._is_mutant[reproducer] != state._is_mutant[target]:
        state._flip(target)
    return state


def _advance_plain(state: MutantState, rng: RngStream, max_steps: int) -> int:
    graph = state.graph
    adjacency = graph.adjacency
    n = graph.n
    r = state.r
    order = state._order
    is_mutant = state._is_mutant
    uniform = rng.uniform

    steps = 0
    while steps < max_steps and 0 < state._k < n:
        k = state._k
        mutant_mass = r * k
        u = uniform() * state.total_fitness
        if u < mutant_mass:
            reproducer = order[min(int(u / r), k - 1)]
        else:
            reproducer = order[k + min(int(u - mutant_mass), n - k - 1)]
        neighbours = adjacency[reproducer]
        target = neighbours[min(int(uniform() * len(neighbours)), len(neighbours) - 1)]
        steps += 1
        if is_mutant[reproducer] != is_mutant[target]:
            state._flip(target)
    return steps


def _advance_accelerated(state: MutantState, rng: RngStream, max_steps: int) -> int:
    """Jump straight to state changes, charging a geometric number of lazy steps.

    A vertex v of either type carries rate fitness(v) * opp(v) / deg(v), where
    opp(v) counts neighbours of the other type. The state changes with
    probability (sum of rates) / W; given a change, the reproducer is drawn
    proportionally to its rate and the offspring lands on a uniform
    opposite-type neighbour.
    """
    graph = state.graph
    adjacency = graph.adjacency
    inv = graph.inv_degree
    n = graph.n
    r = state.r
    is_mutant = state._is_mutant

    opposite = [sum(is_mutant[y] != is_mutant[x] for y in adjacency[x]) for x in range(n)]
    rates = np.array(
        [(r if is_mutant[x] else 1.0) * opposite[x] * inv[x] for x in range(n)], dtype=float
    )

    steps = 0
    while 0 < state._k < n:
        cumulative = np.cumsum(rates)
        active = float(cumulative[-1])
        lazy = rng.geometric_failures(active / state.total_fitness)
        if steps + lazy + 1 > max_steps:
            return max_steps
        steps += lazy + 1

        u = rng.uniform() * active
        reproducer = min(int(np.searchsorted(cumulative, u, side="right")), n - 1)
        while rates[reproducer] == 0.0:
            reproducer -= 1
        candidates = [y for y in adjacency[reproducer] if is_mutant[y] != is_mutant[reproducer]]
        target = candidates[rng.below(len(candidates))]

        state._flip(target)
        opposite[target] = len(adjacency[target]) - opposite[target]
        rates[target] = (r if is_mutant[target] else 1.0) * opposite[target] * inv[target]
        for z in adjacency[target]:
            opposite[z] += -1 if is_mutant[z] == is_mutant[target] else 1
            rates[z] = (r if is_mutant[z] else 1.0) * opposite[z] * inv[z]
    return steps


def advance(
    graph: Graph,
    state: MutantState,
    rng: RngStream,
    max_steps: int,
    *,
    accelerated: bool = False,
) -> int:
    """Step ``state`` in place until absorbing or ``max_steps``; return steps taken.

    An already-absorbing state takes 0 steps.
    """
    if max_steps < 0:
        raise InvalidParameterError(f"max_steps must be non-negative, got {max_steps}")
    if state.graph is not graph and state.graph != graph:
        raise InvalidParameterError("State belongs to a different graph")
    if accelerated:
        return _advance_accelerated(state, rng, max_steps)
    return _advance_plain(state, rng, max_steps)


def run_to_absorption(
    graph: Graph,
    r: float,
    start: int,
    max_steps: int,
    rng: RngStream,
    *,
    accelerated: bool = False,
) -> TrajectoryResult:
    """Run from the single mutant {start} until absorption or the step cap."""
    state = MutantState(graph, r, (start,))
    steps = advance(graph, state, rng, max_steps, accelerated=accelerated)

    if state.is_fixation():
        outcome = Outcome.FIXATION
    elif state.is_extinction():
        outcome = Outcome.EXTINCTION
    else:
        outcome = Outcome.TRUNCATED
        _LOGGER.debug(
            "Run from vertex %d truncated at %d steps with %d mutants",
            start,
            steps,
            state.mutant_count,
        )
    return TrajectoryResult(outcome=outcome, steps_taken=steps, start_vertex=start)


# ===== Transitions and drift =====


def transition_probabilities(
    graph: Graph, vertices: Iterable[int], r: float
) -> dict[frozenset[int], float]:
    """Exact one-step distribution over successor mutant sets.

    For every edge xy with x a mutant and y not: y joins with probability
    r / (W deg x) and x leaves with probability 1 / (W deg y). The remaining
    mass stays on X.
    """
    r = check_fitness(r)
    current = vertex_set(graph, vertices)
    if not current or len(current) == graph.n:
        return {current: 1.0}

    inv = graph.inv_degree
    weight = r * len(current) + (graph.n - len(current))
    moves: defaultdict[frozenset[int], float] = defaultdict(float)
    for x in current:
        for y in graph.adjacency[x]:
            if y not in current:
                moves[current | {y}] += r * inv[x] / weight
                moves[current - {x}] += inv[y] / weight

    distribution = dict(moves)
    distribution[current] = 1.0 - math.fsum(moves.values())
    return distribution


def expected_drift(graph: Graph, vertices: Iterable[int], r: float) -> float:
    """E[phi(X') - phi(X) | X] = (r - 1)/W(X) * sum over cut edges xy of 1/(deg x deg y)."""
    r = check_fitness(r)
    current = proper_subset(graph, vertices)
    inv = graph.inv_degree
    cut = math.fsum(
        inv[x] * inv[y] for x in current for y in graph.adjacency[x] if y not in current
    )
    weight = r * len(current) + (graph.n - len(current))
    return (r - 1.0) / weight * cut


def drift_increments(
    graph: Graph, vertices: Iterable[int], r: float, trials: int, rng: RngStream
) -> np.ndarray:
    """Realised phi increments of ``trials`` independent single steps from X."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    state = MutantState(graph, r, proper_subset(graph, vertices))
    inv = graph.inv_degree
    is_mutant = state._is_mutant

    increments = np.zeros(trials)
    for i in range(trials):
        reproducer, target = _sample_event(state, rng)
        if is_mutant[reproducer] != is_mutant[target]:
            increments[i] = inv[target] if is_mutant[reproducer] else -inv[target]
    return increments


def empirical_drift(
    graph: Graph, vertices: Iterable[int], r: float, trials: int, rng: RngStream
) -> float:
    """Monte Carlo mean of the one-step phi increment from a fixed state X."""
    return float(np.mean(drift_increments(graph, vertices, r, trials, rng)))


def drift_threshold(n: int, r: float) -> float:
    """Per-step drift bound for any proper nonempty state.

    For r >= 1 the drift is at least (1 - 1/r)/n^3 (strictly above it when
    r > 1); for r < 1 it is strictly below (r - 1)/n^3.
    """
    r = check_fitness(r)
    if r >= 1.0:
        return (1.0 - 1.0 / r) / n**3
    return (r - 1.0) / n**3


__all__ = [
    "MutantState",
    "Outcome",
    "RngStream",
    "TrajectoryResult",
    "advance",
    "check_seed",
    "drift_increments",
    "drift_threshold",
    "empirical_drift",
    "expected_drift",
    "run_to_absorption",
    "step",
    "transition_probabilities",
]
