import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hgshift.hypergraph import Hypergraph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hypergraph(rng, n_vertices, n_edges, binary=False, max_size=5):
    edges = []
    for _ in range(n_edges):
        size = int(rng.integers(1, min(max_size, n_vertices) + 1))
        members = rng.choice(n_vertices, size, replace=False)
        if binary:
            edges.append({int(v): 1.0 for v in members})
        else:
            edges.append({int(v): float(rng.uniform(0.05, 1.0)) for v in members})
    weights = rng.uniform(0.1, 2.0, n_edges)
    return Hypergraph.from_members(n_vertices, edges, weights)


def random_affinity(rng, n, density=0.6):
    """Symmetric nonnegative matrix with zero diagonal."""
    A = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < density)
    A = np.triu(A, 1)
    return A + A.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
