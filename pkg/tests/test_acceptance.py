"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import json
import time

import numpy as np
import pytest

from conftest import random_hypergraph
from hgshift import cli
from hgshift.clustering import cluster_points, gen_blobs, gen_crescents, nmi
from hgshift.hypergraph import Hypergraph, build_adjacency
from hgshift.matching import gen_matching_instance, match, matching_rate, run_batch
from hgshift.replicator import initial_vector, replicator_step, seek_mode
from hgshift.stqp import enumerate_kkt_points, is_mode
from hgshift.voting import (
    direction_vector,
    dominant_seed_distribution,
    expansion_step,
    hypergraph_shift,
    subset_weight,
)
from oracles import subset_weight_recursive


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, limit):
        ok = bool(ok and elapsed < limit)
        with capsys.disabled():
            print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  "
                  f"[{elapsed:.1f}s / {limit:.0f}s]")
        assert ok, detail
    return emit


def test_criterion_01_pair_affinity(report):
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for w2, w3 in rng.uniform(0.01, 10.0, (20, 2)):
        g = Hypergraph.from_members(5, [[0, 3, 4], [0, 1], [1, 2]], [1.0, w2, w3])
        M = build_adjacency(g)
        expected = (w2 + w3) / 2
        worst = max(worst, abs(M[1, 2] - expected) / expected)
    report(1, worst <= 2 * np.finfo(float).eps, f"max relative error {worst:.2e}",
           time.perf_counter() - t, 1)


def test_criterion_02_replicator_invariants(report):
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_sum, worst_neg, worst_drop, steps = 0.0, 0.0, 0.0, 0
    for _ in range(100):
        g = random_hypergraph(rng, int(rng.integers(2, 61)), int(rng.integers(2, 31)))
        M = build_adjacency(g)
        p = rng.dirichlet(np.ones(g.n_edges))
        if not p @ M @ p > 0:
            continue
        for _ in range(50):
            q = replicator_step(p, M)
            worst_sum = max(worst_sum, abs(q.sum() - 1))
            worst_neg = max(worst_neg, -q.min())
            worst_drop = max(worst_drop, p @ M @ p - q @ M @ q)
            p = q
            steps += 1
    ok = worst_sum <= 1e-9 and worst_neg <= 1e-12 and worst_drop <= 1e-12
    report(2, ok, f"{steps} steps, |sum-1| {worst_sum:.1e}, min entry {-worst_neg:.1e}, "
                  f"largest F drop {worst_drop:.1e}", time.perf_counter() - t, 10)


def test_criterion_03_kkt_certificates(report):
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    n_conv, bad = 0, 0
    for _ in range(60):
        g = random_hypergraph(rng, int(rng.integers(3, 40)), int(rng.integers(2, 25)))
        M = build_adjacency(g)
        for s in rng.choice(g.n_edges, min(5, g.n_edges), replace=False):
            p0 = initial_vector(M, int(s))
            if not p0 @ M @ p0 > 0:
                continue
            c = seek_mode(p0, M)
            if not c.converged:
                continue
            n_conv += 1
            Mp = M @ c.mode
            on = np.abs(Mp[c.support] - c.lam).max()
            off = np.delete(Mp, c.support)
            if on > 1e-4 * max(c.lam, 1.0):
                bad += 1
            elif c.is_global_mode and off.size and off.max() > c.lam + 1e-6:
                bad += 1
    report(3, n_conv > 0 and bad == 0, f"{n_conv} converged runs, {bad} failing the KKT check",
           time.perf_counter() - t, 10)


def test_criterion_04_oracle_equivalence(report):
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    runs, worst = 0, 0.0
    for _ in range(50):
        g = random_hypergraph(rng, int(rng.integers(3, 12)), int(rng.integers(2, 9)))
        M = build_adjacency(g)
        lams = np.array([c.lam for c in enumerate_kkt_points(M)])
        for s in range(g.n_edges):
            res = hypergraph_shift(M, initial_vector(M, s), g)
            worst = max(worst, np.abs(lams - res.certificate.lam).min())
            runs += 1
    report(4, worst <= 1e-6, f"{runs} shift runs, max |dF| to nearest KKT point {worst:.1e}",
           time.perf_counter() - t, 30)


def test_criterion_05_termination(report):
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    statuses, non_monotone, expansions = {}, 0, 0
    for _ in range(500):
        g = random_hypergraph(rng, int(rng.integers(3, 40)), int(rng.integers(2, 31)))
        M = build_adjacency(g)
        res = hypergraph_shift(M, initial_vector(M, int(rng.integers(g.n_edges))), g)
        statuses[res.status] = statuses.get(res.status, 0) + 1
        expansions += res.expansions
        Fs = [row[2] for row in res.trajectory]
        non_monotone += any(b <= a for a, b in zip(Fs, Fs[1:]))
    ok = non_monotone == 0 and "expansion_cap" not in statuses
    report(5, ok, f"statuses {dict(sorted(statuses.items()))}, {expansions} expansions, "
                  f"{non_monotone} non-increasing trajectories", time.perf_counter() - t, 60)


def test_criterion_06_expansion_improves(report):
    t = time.perf_counter()
    rng = np.random.default_rng(6)
    tried, improved, bad = 0, 0, 0
    while tried < 200:
        g = random_hypergraph(rng, int(rng.integers(4, 30)), int(rng.integers(3, 20)))
        M = build_adjacency(g)
        block = rng.choice(g.n_edges, int(rng.integers(1, g.n_edges)), replace=False)
        p0 = np.zeros(g.n_edges)
        p0[block] = 1.0 / block.size
        if not p0 @ M @ p0 > 0:
            continue
        c = seek_mode(p0, M)
        if c.is_global_mode or not c.converged or c.support_residual > 1e-6:
            continue
        tried += 1
        h = direction_vector(c.mode, M, dominant_seed_distribution(M, c.support), c)
        r = expansion_step(c.mode, M, h)
        if r.improved:
            improved += 1
            after = r.expanded @ M @ r.expanded
            bad += not after > c.lam
    report(6, bad == 0 and improved > 0,
           f"{tried} non-global modes, {improved} improved steps, {bad} without a density gain",
           time.perf_counter() - t, 10)


def test_criterion_07_closeness_recursion(report):
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    pair_bad, worst = 0, 0.0
    for _ in range(30):
        n = int(rng.integers(2, 13))
        A = rng.uniform(0, 1, (n, n))
        M = np.triu(A, 1) + np.triu(A, 1).T
        i, j = rng.choice(n, 2, replace=False)
        pair_bad += subset_weight(M, [i, j], i) != M[i, j]
        S = rng.choice(n, int(rng.integers(1, min(n, 10) + 1)), replace=False).tolist()
        k = int(rng.choice(S))
        worst = max(worst, abs(subset_weight(M, S, k) - subset_weight_recursive(M, S, k)))
    report(7, pair_bad == 0 and worst <= 1e-12,
           f"pair mismatches {pair_bad}, max recursion disagreement {worst:.1e}",
           time.perf_counter() - t, 10)


def test_criterion_08_clustering_sanity(report):
    t = time.perf_counter()
    blobs = gen_blobs(30, seed=8)
    blob_nmi = nmi(cluster_points(blobs).assignments, blobs.labels)
    rows = []
    for seed in range(10):
        ps = gen_crescents(600, 0.0, seed=seed)
        res = cluster_points(ps)
        rows.append((res.n_clusters, nmi(res.assignments, ps.labels)))
    ok = blob_nmi == 1.0 and all(abs(k - 5) <= 1 and v >= 0.8 for k, v in rows)
    detail = (f"blobs NMI {blob_nmi:.3f}; crescents (clusters, NMI) "
              + " ".join(f"({k},{v:.2f})" for k, v in rows))
    report(8, ok, detail, time.perf_counter() - t, 120)


def test_criterion_09_noise_trend(report):
    t = time.perf_counter()
    means = []
    for sigma in (0.0, 1.0, 2.0):
        scores = []
        for seed in range(5):
            ps = gen_crescents(600, sigma, seed=seed)
            scores.append(nmi(cluster_points(ps).assignments, ps.labels))
        means.append(float(np.mean(scores)))
    ok = means[0] >= means[1] >= means[2] and means[2] > 0.4
    report(9, ok, "mean NMI at noise variance 0, 1, 4: " + ", ".join(f"{m:.3f}" for m in means),
           time.perf_counter() - t, 180)


def test_criterion_10_matching(report):
    t = time.perf_counter()
    clean = []
    for seed in range(20):
        cs = gen_matching_instance(15, 0.0, 5, seed=seed)
        clean.append(matching_rate(match(cs).selected, cs.truth))
    noisy = run_batch(15, 0.05, 5, range(50), relative_noise=True)
    ok = min(clean) == 1.0 and noisy["mean"] >= 0.8 and len(noisy["instances"]) == 50
    report(10, ok, f"noise-free min rate {min(clean):.3f} over 20 seeds; noisy mean "
                   f"{noisy['mean']:.3f} +- {noisy['std']:.3f} over 50", time.perf_counter() - t, 180)


def test_criterion_11_cli_determinism(report, tmp_path):
    t = time.perf_counter()
    g = random_hypergraph(np.random.default_rng(11), 12, 9)
    from hgshift.hypergraph import save
    save(g, tmp_path / "g.json")
    d = tmp_path
    commands = [
        ["gen", "crescents", "--n", "300", "--noise", "1.0", "--out", f"{d}/pts.csv"],
        ["gen", "match", "--n", "15", "--outliers", "5", "--out", f"{d}/inst.json"],
        ["shift", "--input", f"{d}/g.json", "--out", f"{d}/shift.json", "--trajectory", f"{d}/traj.csv"],
        ["cluster", "--input", f"{d}/pts.csv", "--out", f"{d}/assign.csv", "--report", f"{d}/sum.json"],
        ["match", "--input", f"{d}/inst.json", "--baseline", "--out", f"{d}/match.json"],
        ["match", "--batch", "4", "--noise", "0.05", "--relative-noise", "--out", f"{d}/batch.json"],
    ]
    outputs = ["pts.csv", "inst.json", "shift.json", "traj.csv", "assign.csv", "sum.json",
               "match.json", "batch.json"]
    snaps = []
    for _ in range(2):
        for argv in commands:
            assert cli.main(argv) == 0, argv
        snaps.append({name: (d / name).read_bytes() for name in outputs})
    differing = [name for name in outputs if snaps[0][name] != snaps[1][name]]
    embedded = all("config" in json.loads((d / n).read_text())
                   for n in ("shift.json", "sum.json", "match.json", "batch.json"))
    report(11, not differing and embedded,
           f"{len(commands)} commands x2, {len(outputs)} files, differing: {differing or 'none'}",
           time.perf_counter() - t, 60)
