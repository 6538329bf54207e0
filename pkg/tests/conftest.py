import numpy as np
import pytest

from arnoldi_gcn.graph import from_edges


def random_connected_graph(n, seed, p=0.25):
    """Random spanning tree plus Erdos-Renyi extras; always connected."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = [(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, n)]
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges += list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return from_edges(edges, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
