import numpy as np
import pytest

from qgraph_ids.graph_core import build_topological_graph


def random_connected_graph(rng: np.random.Generator, max_edges: int, loops: bool = False):
    """Random spanning tree plus extra (possibly parallel) edges."""
    nv = int(rng.integers(2, max(3, max_edges // 2 + 2)))
    nv = min(nv, max_edges + 1)
    triples = []
    for v in range(1, nv):
        triples.append((len(triples), int(rng.integers(0, v)), v))
    while len(triples) < max_edges and rng.random() < 0.8:
        a, b = (int(x) for x in rng.integers(0, nv, size=2))
        if a == b and not loops:
            continue
        triples.append((len(triples), a, b))
    return build_topological_graph(list(range(nv)), triples)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
