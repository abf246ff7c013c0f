"""Pytest configuration for moran_fpras tests."""

import sys
from pathlib import Path

import networkx as nx
import pytest

# Add the repo root to path so the package imports without installation
sys.path.insert(0, str(Path(__file__).parent.parent))

from moran_fpras.graph import Graph, gen_path, gen_star, generate


@pytest.fixture
def path3() -> Graph:
    """Path 0-1-2, the smallest graph where start vertex matters."""
    return gen_path(3)


@pytest.fixture
def star5() -> Graph:
    """Star with centre 0 and four leaves."""
    return gen_star(5)


@pytest.fixture
def double_star10() -> Graph:
    """Double star on 10 vertices; its drift sits near the n^-3 floor."""
    return generate("double-star", 10)


@pytest.fixture
def edge_list_file(tmp_path: Path):
    """Write edge-list text to a temp file and return its path."""

    def _write(text: str, name: str = "graph.txt") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture(scope="session")
def connected_atlas() -> dict[int, list[Graph]]:
    """Every connected graph on 2 to 7 vertices, up to isomorphism, keyed by order."""
    by_order: dict[int, list[Graph]] = {n: [] for n in range(2, 8)}
    for nx_graph in nx.graph_atlas_g():
        n = nx_graph.number_of_nodes()
        if n >= 2 and nx.is_connected(nx_graph):
            by_order[n].append(Graph.from_networkx(nx_graph))
    return by_order
