"""Graphs for the Moran process: validation, generators, edge lists, degree sums."""

from __future__ import annotations

import logging
import math
import random
import re
from collections.abc import Iterable
from pathlib import Path
from typing import Literal

import networkx as nx
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator

from .exceptions import (
    EdgeListError,
    InvalidGraphError,
    InvalidSubsetError,
    UnsupportedFitnessError,
)

_LOGGER = logging.getLogger(__name__)

GraphKind = Literal["clique", "cycle", "path", "star", "double-star"]
GRAPH_KINDS: tuple[GraphKind, ...] = ("clique", "cycle", "path", "star", "double-star")

_VERTEX_TOKEN = re.compile(r"^\d+$", re.ASCII)


# ===== Data Models =====


class Graph(BaseModel):
    """Immutable simple connected undirected graph on vertices 0..n-1.

    Degrees and reciprocal degrees are computed once at construction; every
    degree-derived quantity below reads from those tables.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    adjacency: tuple[tuple[int, ...], ...]

    _degree: tuple[int, ...] = PrivateAttr()
    _inv_degree: tuple[float, ...] = PrivateAttr()

    @model_validator(mode="after")
    def _check_structure(self) -> Graph:
        """Reject anything that is not a simple connected undirected graph."""
        if self.n < 2:
            raise InvalidGraphError(f"Graph needs at least 2 vertices, got {self.n}")
        if len(self.adjacency) != self.n:
            raise InvalidGraphError(
                f"Adjacency has {len(self.adjacency)} rows for {self.n} vertices"
            )

        for x, neighbours in enumerate(self.adjacency):
            if any(a >= b for a, b in zip(neighbours, neighbours[1:], strict=False)):
                raise InvalidGraphError(f"Adjacency of vertex {x} is not strictly increasing")
            for y in neighbours:
                if not 0 <= y < self.n:
                    raise InvalidGraphError(f"Vertex {x} has out-of-range neighbour {y}")
                if y == x:
                    raise InvalidGraphError(f"Self-loop at vertex {x}")

        for x, neighbours in enumerate(self.adjacency):
            for y in neighbours:
                if x not in self.adjacency[y]:
                    raise InvalidGraphError(f"Edge {x}-{y} is not symmetric")

        if not nx.is_connected(self.to_networkx()):
            raise InvalidGraphError("Graph is disconnected")

        return self

    def model_post_init(self, context: object, /) -> None:
        self._degree = tuple(len(neighbours) for neighbours in self.adjacency)
        # isolated vertices are rejected by the validator
        self._inv_degree = tuple(1.0 / d if d else 0.0 for d in self._degree)

    @property
    def degree(self) -> tuple[int, ...]:
        """Per-vertex degree."""
        return self._degree

    @property
    def inv_degree(self) -> tuple[float, ...]:
        """Per-vertex 1/deg."""
        return self._inv_degree

    @property
    def m(self) -> int:
        """Edge count."""
        return sum(self._degree) // 2

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (u, v) with u < v, sorted lexicographically."""
        return [(x, y) for x, neighbours in enumerate(self.adjacency) for y in neighbours if x < y]

    def to_networkx(self) -> nx.Graph:
        nx_graph = nx.Graph()
        nx_graph.add_nodes_from(range(self.n))
        nx_graph.add_edges_from(
            (x, y) for x, neighbours in enumerate(self.adjacency) for y in neighbours if x < y
        )
        return nx_graph

    @classmethod
    def from_networkx(cls, nx_graph: nx.Graph) -> Graph:
        """Freeze a networkx graph whose nodes are exactly 0..n-1."""
        n = nx_graph.number_of_nodes()
        if set(nx_graph.nodes) != set(range(n)):
            raise InvalidGraphError("Vertex labels must be the dense integers 0..n-1")
        if nx.number_of_selfloops(nx_graph):
            raise InvalidGraphError("Graph contains a self-loop")
        adjacency = tuple(tuple(sorted(nx_graph.adj[x])) for x in range(n))
        return cls(n=n, adjacency=adjacency)


# ===== Edge lists =====


def parse_edge_list(text: str | bytes) -> Graph:
    """
    Parse whitespace-separated "u v" lines into a graph.

    Blank lines and lines starting with '#' are ignored. Vertex ids are ASCII
    decimal integers. Duplicate edges collapse to one; n is the largest vertex
    id plus one.

    Args:
        text: Edge-list contents

    Returns:
        Validated Graph

    Raises:
        EdgeListError: On an unparseable token, a self-loop, fewer than two
            vertices, or a disconnected result
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as err:
            raise EdgeListError(f"Edge list is not UTF-8 text: {err}") from err

    edges: set[tuple[int, int]] = set()
    seen: set[int] = set()
    max_vertex = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListError(f"expected 'u v', got {line!r}", line=line_no)
        for token in tokens:
            if token.startswith("-") and _VERTEX_TOKEN.match(token[1:]):
                raise EdgeListError(f"negative vertex id in {line!r}", line=line_no)
            if not _VERTEX_TOKEN.match(token):
                raise EdgeListError(f"unparseable vertex id in {line!r}", line=line_no)
        u, v = int(tokens[0]), int(tokens[1])
        if u == v:
            raise EdgeListError(f"self-loop at vertex {u}", line=line_no)

        edges.add((min(u, v), max(u, v)))
        seen.update((u, v))
        max_vertex = max(max_vertex, u, v)

    n = max_vertex + 1
    if n < 2:
        raise EdgeListError("edge list defines fewer than 2 vertices")
    if len(seen) < n:
        # ids define n, so a gap is an isolated vertex; checked before allocating n nodes
        raise EdgeListError(
            f"graph is disconnected ({n - len(seen)} of {n} vertex ids never appear in an edge)"
        )

    nx_graph = nx.Graph()
    nx_graph.add_nodes_from(range(n))
    nx_graph.add_edges_from(edges)
    if not nx.is_connected(nx_graph):
        components = nx.number_connected_components(nx_graph)
        raise EdgeListError(f"graph is disconnected ({components} components)")

    _LOGGER.debug("Parsed edge list: n=%d, m=%d", n, len(edges))
    return Graph.from_networkx(nx_graph)


def write_edge_list(graph: Graph) -> str:
    """Canonical edge-list text: one "u v" line per edge, u < v, sorted, LF endings."""
    return "".join(f"{u} {v}\n" for u, v in graph.edges())


def read_edge_list(path: Path | str) -> Graph:
    return parse_edge_list(Path(path).read_bytes())


# ===== Generators =====


def _require_order(kind: str, n: int, minimum: int) -> None:
    if n < minimum:
        raise InvalidGraphError(f"{kind} needs n >= {minimum}, got {n}")


def gen_clique(n: int) -> Graph:
    _require_order("clique", n, 2)
    return Graph.from_networkx(nx.complete_graph(n))


def gen_cycle(n: int) -> Graph:
    _require_order("cycle", n, 3)
    return Graph.from_networkx(nx.cycle_graph(n))


def gen_path(n: int) -> Graph:
    _require_order("path", n, 2)
    return Graph.from_networkx(nx.path_graph(n))


def gen_star(n: int) -> Graph:
    """Star with centre 0 and n - 1 leaves."""
    _require_order("star", n, 2)
    return Graph.from_networkx(nx.star_graph(n - 1))


def gen_double_star(n: int) -> Graph:
    """
    Two near-equal stars whose centres 0 and 1 are joined by an edge.

    Centre 0 takes ceil((n-2)/2) leaves and centre 1 the remaining
    floor((n-2)/2), so the larger star sits at 0 when n is odd.
    """
    _require_order("double-star", n, 4)
    leaves = n - 2
    first = (leaves + 1) // 2

    nx_graph = nx.Graph()
    nx_graph.add_nodes_from(range(n))
    nx_graph.add_edge(0, 1)
    nx_graph.add_edges_from((0, leaf) for leaf in range(2, 2 + first))
    nx_graph.add_edges_from((1, leaf) for leaf in range(2 + first, n))
    return Graph.from_networkx(nx_graph)


_GENERATORS = {
    "clique": gen_clique,
    "cycle": gen_cycle,
    "path": gen_path,
    "star": gen_star,
    "double-star": gen_double_star,
}


def generate(kind: str, n: int) -> Graph:
    """Build a generated graph by kind name."""
    try:
        generator = _GENERATORS[kind]
    except KeyError:
        raise InvalidGraphError(
            f"Unknown graph kind {kind!r}; expected one of {', '.join(GRAPH_KINDS)}"
        ) from None
    return generator(n)


def random_connected_graph(n: int, p: float, seed: int) -> Graph:
    """Seeded G(n, p) sample, redrawn until connected."""
    _require_order("random graph", n, 2)
    if not 0.0 < p <= 1.0:
        raise InvalidGraphError(f"Edge probability must be in (0, 1], got {p}")

    rng = random.Random(seed)
    attempts = 0
    while True:
        attempts += 1
        nx_graph = nx.gnp_random_graph(n, p, seed=rng)
        if nx.is_connected(nx_graph):
            _LOGGER.debug("Connected G(%d, %.3f) after %d draws", n, p, attempts)
            return Graph.from_networkx(nx_graph)


# ===== Degree-derived quantities =====


def check_fitness(r: float) -> float:
    """Return r if it is a finite positive fitness, else raise."""
    if not math.isfinite(r) or r <= 0:
        raise UnsupportedFitnessError(f"Fitness must be a finite positive number, got {r}")
    return float(r)


def vertex_set(graph: Graph, vertices: Iterable[int]) -> frozenset[int]:
    """Validate vertex ids against the graph and return them as a frozenset."""
    members = frozenset(vertices)
    for x in members:
        if not 0 <= x < graph.n:
            raise InvalidSubsetError(f"Vertex {x} is out of range for n={graph.n}")
    return members


def proper_subset(graph: Graph, vertices: Iterable[int]) -> frozenset[int]:
    """Like vertex_set, but also require the set to be nonempty and not all of V."""
    members = vertex_set(graph, vertices)
    if not members:
        raise InvalidSubsetError("Vertex set is empty; a proper nonempty subset is required")
    if len(members) == graph.n:
        raise InvalidSubsetError("Vertex set is the full set; a proper nonempty subset is required")
    return members


def total_fitness(graph: Graph, vertices: Iterable[int], r: float) -> float:
    """W(X) = r|X| + (n - |X|)."""
    r = check_fitness(r)
    k = len(vertex_set(graph, vertices))
    return r * k + (graph.n - k)


def potential(graph: Graph, vertices: Iterable[int]) -> float:
    """phi(X): sum of 1/deg over X. potential(graph, range(graph.n)) is phi(G)."""
    inv = graph.inv_degree
    return math.fsum(inv[x] for x in vertex_set(graph, vertices))


def graph_potential(graph: Graph) -> float:
    return math.fsum(graph.inv_degree)


def phi_prime_0(graph: Graph) -> float:
    """(1/n) * sum of deg(x)^-2, the expected squared potential of the initial state."""
    return math.fsum(w * w for w in graph.inv_degree) / graph.n


def q_value(graph: Graph, x: int) -> float:
    """Q(x): sum of 1/deg(y) over the neighbours y of x."""
    if not 0 <= x < graph.n:
        raise InvalidSubsetError(f"Vertex {x} is out of range for n={graph.n}")
    inv = graph.inv_degree
    return math.fsum(inv[y] for y in graph.adjacency[x])


def q_values(graph: Graph) -> tuple[float, ...]:
    return tuple(q_value(graph, x) for x in range(graph.n))


__all__ = [
    "GRAPH_KINDS",
    "Graph",
    "GraphKind",
    "check_fitness",
    "gen_clique",
    "gen_cycle",
    "gen_double_star",
    "gen_path",
    "gen_star",
    "generate",
    "graph_potential",
    "parse_edge_list",
    "phi_prime_0",
    "potential",
    "proper_subset",
    "q_value",
    "q_values",
    "random_connected_graph",
    "read_edge_list",
    "total_fitness",
    "vertex_set",
    "write_edge_list",
]
