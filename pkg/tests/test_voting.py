import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_affinity, random_hypergraph
from hgshift.hypergraph import build_adjacency
from hgshift.replicator import initial_vector
from hgshift.stqp import enumerate_kkt_points, is_mode
from hgshift.voting import (
    ShiftConfig,
    SubsetTooLarge,
    approx_subset_weight,
    avg_weighted_degree,
    direction_vector,
    dominant_seed_distribution,
    expansion_step,
    hypergraph_shift,
    relative_closeness,
    subset_weight,
    uniform_seeds,
)
from oracles import subset_weight_recursive

K3 = np.ones((3, 3)) - np.eye(3)


def test_avg_weighted_degree_examples():
    M = np.zeros((4, 4))
    M[0, 1], M[0, 2] = 2.0, 4.0
    M = M + M.T
    assert avg_weighted_degree(M, [0], 0) == 0.0
    assert avg_weighted_degree(M, [1, 2], 0) == 3.0
    assert avg_weighted_degree(M, [1, 2], 3) == 0.0


def test_relative_closeness_examples(rng):
    M = random_affinity(rng, 4, density=1.0)
    assert relative_closeness(M, [0], 0, 2) == M[0, 2]
    M2 = np.zeros((3, 3))
    M2[0, 1] = M2[1, 0] = 1.0
    M2[0, 2] = M2[2, 0] = 5.0
    assert relative_closeness(M2, [0, 1, 2], 0, 1) == pytest.approx(1.0 - 2.0)
    M3 = np.zeros((3, 3))
    M3[0, 1] = M3[1, 0] = M3[0, 2] = M3[2, 0] = 2.0
    assert relative_closeness(M3, [0, 1, 2], 0, 1) == pytest.approx(2.0 - 4.0 / 3.0)
    with pytest.raises(ValueError):
        relative_closeness(M2, [1, 2], 0, 1)


def test_subset_weight_examples(rng):
    M = random_affinity(rng, 6, density=1.0)
    assert subset_weight(M, [3], 3) == 1.0
    assert subset_weight(M, [1, 4], 1) == M[1, 4]
    assert subset_weight(M, [1, 4], 4) == M[1, 4]
    Z = np.zeros((4, 4))
    assert all(subset_weight(Z, [0, 1, 2], i) == 0.0 for i in range(3))


def test_subset_weight_matches_plain_recursion(rng):
    for _ in range(30):
        n = int(rng.integers(2, 11))
        M = random_affinity(rng, n)
        S = sorted(rng.choice(n, int(rng.integers(1, min(n, 8) + 1)), replace=False).tolist())
        for i in S:
            assert subset_weight(M, S, i) == pytest.approx(subset_weight_recursive(M, S, i),
                                                           rel=1e-12, abs=1e-12)


def test_subset_weight_cap():
    M = np.ones((5, 5)) - np.eye(5)
    with pytest.raises(SubsetTooLarge):
        subset_weight(M, range(5), 0, cap=4)
    assert np.isfinite(approx_subset_weight(M, range(5), 0))


def test_seed_distribution_examples(rng):
    M = random_affinity(rng, 5, density=1.0)
    d = dominant_seed_distribution(M, [1, 3])
    np.testing.assert_allclose(d.closeness, [0.5, 0.5])
    assert dominant_seed_distribution(M, [2]).as_dict() == {2: 1.0}
    Z = np.zeros((3, 3))
    z = dominant_seed_distribution(Z, [0, 1])
    assert z.uniform_fallback and np.allclose(z.closeness, 0.5)


def test_dominant_seed_matches_recursion_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(2, 8))
        M = random_affinity(rng, n)
        raw = np.array([subset_weight_recursive(M, range(n), i) for i in range(n)])
        d = dominant_seed_distribution(M, range(n))
        np.testing.assert_allclose(d.raw, raw, rtol=1e-12, atol=1e-12)
        if raw.max() > 0:
            assert int(np.argmax(raw)) in d.dominant.tolist()
            np.testing.assert_allclose(d.closeness, np.clip(raw, 0, None) / np.clip(raw, 0, None).sum())
        assert np.all(d.dense(n + 2)[n:] == 0)


@given(st.integers(0, 2**32 - 1))
def test_closeness_is_distribution(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    M = random_affinity(rng, n)
    d = dominant_seed_distribution(M, range(n))
    assert d.closeness.sum() == pytest.approx(1.0) and d.closeness.min() >= 0


def _triangle_mode():
    p = np.array([0.5, 0.5, 0.0])
    return p, is_mode(p, K3)


def test_direction_vector_examples():
    p, cert = _triangle_mode()
    assert not cert.is_global_mode
    h = direction_vector(p, K3, uniform_seeds([0, 1]), cert)
    assert h[0] == h[1] == -0.5
    # excess (Mp)_2 - F = 1 - 0.5 on a hyperedge touching all the seed mass
    assert h[2] == pytest.approx(0.5)
    q = np.array([0.3, 0.7, 0.0, 0.0])
    M = np.zeros((4, 4))
    M[0, 1] = M[1, 0] = 1.0
    M[2, 0] = M[0, 2] = 0.2
    M[3, 1] = M[3, 0] = M[1, 3] = M[0, 3] = 1.0
    c = is_mode(q, M)
    h = direction_vector(q, M, uniform_seeds([0, 1]), c)
    assert h[0] == pytest.approx(-0.7)
    assert h[2] == 0.0  # affinity 0.06 is below F = 0.42
    assert h[3] == pytest.approx(1.0 - 0.42)
    with pytest.raises(ValueError):
        direction_vector([0.5, 0.5], np.array([[0.0, 1], [1, 0]]), uniform_seeds([0, 1]),
                         is_mode([0.5, 0.5], np.array([[0.0, 1], [1, 0]])))


def test_expansion_on_triangle():
    p, cert = _triangle_mode()
    h = direction_vector(p, K3, uniform_seeds([0, 1]), cert)
    r = expansion_step(p, K3, h)
    assert r.improved and r.expanded[2] > 0
    assert r.density_after > r.density_before
    assert abs(r.expanded.sum() - 1) < 1e-12 and r.expanded.min() >= 0
    np.testing.assert_allclose(r.delta_p, r.c_star * h)


def test_expansion_singleton_support_has_no_bound():
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    r = expansion_step(np.array([1.0, 0.0]), M, np.array([0.0, 1.0]))
    assert r.c_max == np.inf and r.improved


def test_expansion_random_improves(rng):
    hits = 0
    for _ in range(200):
        n = int(rng.integers(3, 10))
        M = random_affinity(rng, n)
        S = rng.choice(n, int(rng.integers(1, n)), replace=False)
        p = np.zeros(n)
        p[S] = rng.dirichlet(np.ones(len(S)))
        cert = is_mode(p, M)
        if cert.is_global_mode:
            continue
        h = direction_vector(p, M, dominant_seed_distribution(M, cert.support), cert)
        r = expansion_step(p, M, h)
        if r.improved:
            hits += 1
            assert r.density_after > r.density_before + 1e-12 or r.density_after > r.density_before
    assert hits > 0


def test_shift_block_mode_has_no_expansion(rng):
    A = random_affinity(rng, 5, density=1.0)
    M = np.zeros((8, 8))
    M[:5, :5] = A
    M[5:, 5:] = 0.01 * random_affinity(rng, 3, density=1.0)
    res = hypergraph_shift(M, np.r_[np.full(5, 0.2), np.zeros(3)])
    assert res.status == "mode" and res.expansions == 0
    assert set(res.certificate.support.tolist()) <= set(range(5))


def test_shift_isolated_third():
    M = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
    res = hypergraph_shift(M, np.array([0.5, 0.5, 0.0]))
    np.testing.assert_allclose(res.certificate.mode, [0.5, 0.5, 0])
    assert res.certificate.lam == pytest.approx(0.5) and res.expansions == 0
    iso = hypergraph_shift(M, np.array([0.0, 0.0, 1.0]))
    assert iso.status == "outlier" and iso.certificate.lam == 0.0


def test_shift_expands_along_chain():
    # a weak pair {0,1} next to a strong triangle {1,2,3}
    M = np.zeros((4, 4))
    M[0, 1] = 0.5
    M[1, 2] = M[2, 3] = M[1, 3] = 2.0
    M = M + M.T
    p0 = np.array([0.5, 0.5, 0.0, 0.0])
    first = is_mode(p0, M)
    assert not first.is_global_mode
    res = hypergraph_shift(M, p0)
    assert res.status == "mode" and res.expansions >= 1
    assert res.certificate.lam > first.lam
    top = enumerate_kkt_points(M)[0].lam
    assert res.certificate.lam == pytest.approx(top, abs=1e-6)


def test_shift_matches_oracle_on_random_hypergraphs(rng):
    for _ in range(20):
        g = random_hypergraph(rng, int(rng.integers(3, 10)), int(rng.integers(2, 9)))
        M = build_adjacency(g)
        lams = [c.lam for c in enumerate_kkt_points(M)]
        for s in range(g.n_edges):
            res = hypergraph_shift(M, initial_vector(M, s), g)
            assert res.status in ("mode", "outlier")
            assert min(abs(res.certificate.lam - x) for x in lams) <= 1e-6
            Fs = [t[2] for t in res.trajectory]
            assert all(b > a for a, b in zip(Fs, Fs[1:]))


def test_shift_rejects_nonisolated_zero_start():
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match="degenerate"):
        hypergraph_shift(M, np.array([1.0, 0.0]))


def test_expansion_cap_status():
    M = np.zeros((4, 4))
    M[0, 1] = 0.5
    M[1, 2] = M[2, 3] = M[1, 3] = 2.0
    M = M + M.T
    res = hypergraph_shift(M, np.array([0.5, 0.5, 0, 0]), cfg=ShiftConfig(max_expansions=0))
    assert res.status == "expansion_cap" and res.expansions == 0
