"""Correspondence matching as mode seeking on an association hypergraph.

Candidate correspondences ``(p, q)`` between a source and a target point set
are the vertices. Hyperedges are triplets of candidates whose pairwise
distances agree across the two sets. The dense mode of that hypergraph picks
out a geometrically consistent, one-to-one match set.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .hypergraph import Hypergraph, build_adjacency
from .replicator import initial_vector
from .stqp import ModeCertificate
from .voting import ShiftConfig, ShiftResult, hypergraph_shift


class EmptyHypergraphError(ValueError):
    """No usable hyperedge could be built from the candidates."""


@dataclass
class CorrespondenceSet:
    source: np.ndarray
    target: np.ndarray
    candidates: np.ndarray  # (c, 2) integer pairs (source index, target index)
    truth: set[tuple[int, int]] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=float).reshape(-1, 2)
        self.target = np.asarray(self.target, dtype=float).reshape(-1, 2)
        self.candidates = np.asarray(self.candidates, dtype=np.int64).reshape(-1, 2)
        if self.candidates.size:
            if self.candidates[:, 0].min() < 0 or self.candidates[:, 0].max() >= len(self.source):
                raise ValueError("candidate source index out of range")
            if self.candidates[:, 1].min() < 0 or self.candidates[:, 1].max() >= len(self.target):
                raise ValueError("candidate target index out of range")
        pairs = [tuple(c) for c in self.candidates.tolist()]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate candidate pairs")
        if self.truth is not None:
            self.truth = {(int(a), int(b)) for a, b in self.truth}

    def diameter(self) -> float:
        return float(pdist(self.source).max()) if len(self.source) > 1 else 0.0


@dataclass
class MatchConfig:
    sigma_ratio: float = 0.1  # geometric tolerance as a fraction of the source diameter
    max_hyperedges_per_candidate: int = 30
    min_weight: float = 1e-3
    membership: str = "consensus"  # or "binary"
    min_membership: float = 0.05
    membership_scale: float = 2.0  # consensus kernel width in units of sigma
    select_ratio: float = 0.5
    seed: int = 42
    shift: ShiftConfig = field(default_factory=ShiftConfig)


def _valid_triplets(cands: np.ndarray, arity: int) -> list[tuple[int, ...]]:
    out = []
    for t in combinations(range(len(cands)), arity):
        src = cands[list(t), 0]
        tgt = cands[list(t), 1]
        if len(set(src.tolist())) == arity and len(set(tgt.tolist())) == arity:
            out.append(t)
    return out


def rigid_fit(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation ``R`` and translation ``t`` with ``a @ R.T + t ~ b``."""
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    U, _, Vt = np.linalg.svd((a - ca).T @ (b - cb))
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, d]) @ U.T
    return R, cb - ca @ R.T


def build_association_hypergraph(cs: CorrespondenceSet, cfg: MatchConfig | None = None,
                                 arity: int = 3) -> Hypergraph:
    """Association hypergraph over candidate correspondences.

    Every ``arity``-subset of candidates that is one-to-one (no repeated source
    or target point) is a potential hyperedge. Its weight is
    ``exp(-delta^2 / sigma^2)`` where ``delta`` is the largest disagreement
    between a source distance and the matching target distance inside the
    subset, and ``sigma = cfg.sigma_ratio * diameter(source)``. At most
    ``cfg.max_hyperedges_per_candidate * |C|`` subsets are kept, sampled
    uniformly with ``cfg.seed``; subsets below ``cfg.min_weight`` are dropped.

    With ``cfg.membership == "binary"`` a hyperedge holds exactly its subset.
    With ``"consensus"`` the subset's rigid fit is applied to every candidate
    ``(p, q)`` and the candidate joins with membership
    ``exp(-|T(p) - q|^2 / (s sigma)^2)`` with ``s = cfg.membership_scale`` (subset members get 1; memberships under
    ``cfg.min_membership`` are dropped). Consistent subsets then share all
    their inliers, so the dense mode spreads over the whole match set.
    """
    cfg = cfg or MatchConfig()
    if cfg.membership not in ("binary", "consensus"):
        raise ValueError(f"unknown membership rule {cfg.membership!r}")
    c = len(cs.candidates)
    if c < arity:
        raise EmptyHypergraphError(f"need at least {arity} candidates, got {c}")
    sigma = cfg.sigma_ratio * cs.diameter()
    if not sigma > 0:
        raise EmptyHypergraphError("source points are degenerate (zero diameter)")
    Ds = squareform(pdist(cs.source))
    Dt = squareform(pdist(cs.target))
    P = cs.source[cs.candidates[:, 0]]
    Q = cs.target[cs.candidates[:, 1]]
    tuples = _valid_triplets(cs.candidates, arity)
    cap = cfg.max_hyperedges_per_candidate * c
    if len(tuples) > cap:
        rng = np.random.default_rng(cfg.seed)
        pick = np.sort(rng.choice(len(tuples), cap, replace=False))
        tuples = [tuples[k] for k in pick]
    iu = np.triu_indices(arity, 1)
    edges, weights = [], []
    for t in tuples:
        t = list(t)
        src = cs.candidates[t, 0]
        tgt = cs.candidates[t, 1]
        delta = np.max(np.abs(Ds[np.ix_(src, src)][iu] - Dt[np.ix_(tgt, tgt)][iu]))
        w = float(np.exp(-(delta / sigma) ** 2))
        if w < cfg.min_weight:
            continue
        if cfg.membership == "binary":
            edges.append(t)
        else:
            R, shift = rigid_fit(P[t], Q[t])
            r2 = np.sum((P @ R.T + shift - Q) ** 2, axis=1)
            h = np.exp(-r2 / (cfg.membership_scale * sigma) ** 2)
            h[t] = 1.0
            keep = np.flatnonzero(h >= cfg.min_membership)
            edges.append({int(v): float(h[v]) for v in keep})
        weights.append(w)
    if not edges:
        raise EmptyHypergraphError("no geometrically consistent candidate subsets")
    return Hypergraph.from_members(c, edges, weights)


@dataclass
class MatchResult:
    selected: list[tuple[int, int]]
    scores: np.ndarray  # per candidate
    certificate: ModeCertificate
    run: ShiftResult
    n_hyperedges: int


def _select(cs: CorrespondenceSet, g: Hypergraph, mode: np.ndarray, ratio: float):
    scores = g.incidence() @ mode
    top = scores.max()
    keep = np.flatnonzero(scores >= ratio * top) if top > 0 else np.array([], dtype=np.int64)
    order = keep[np.lexsort((keep, -scores[keep]))]
    used_s, used_t, chosen = set(), set(), []
    for k in order:
        a, b = (int(x) for x in cs.candidates[k])
        if a in used_s or b in used_t:
            continue
        used_s.add(a)
        used_t.add(b)
        chosen.append((a, b))
    return sorted(chosen), scores


def _match_with(cs: CorrespondenceSet, g: Hypergraph, cfg: MatchConfig) -> MatchResult:
    M = build_adjacency(g)
    seed = int(np.lexsort((np.arange(g.n_edges), -np.asarray(g.weights)))[0])
    run = hypergraph_shift(M, initial_vector(M, seed), g, cfg.shift)
    selected, scores = _select(cs, g, run.certificate.mode, cfg.select_ratio)
    return MatchResult(selected, scores, run.certificate, run, g.n_edges)


def match(cs: CorrespondenceSet, cfg: MatchConfig | None = None) -> MatchResult:
    """Shift from the heaviest hyperedge and read the match set off the mode.

    A candidate's score is the mode mass of the hyperedges containing it.
    Candidates scoring at least ``cfg.select_ratio`` of the best are taken
    greedily by descending score, skipping any that reuse a point.
    """
    cfg = cfg or MatchConfig()
    return _match_with(cs, build_association_hypergraph(cs, cfg), cfg)


def pairwise_baseline(cs: CorrespondenceSet, cfg: MatchConfig | None = None) -> MatchResult:
    """Same pipeline with ordinary two-candidate edges instead of triplets."""
    cfg = cfg or MatchConfig()
    return _match_with(cs, build_association_hypergraph(cs, cfg, arity=2), cfg)


def matching_rate(selected, truth) -> float:
    truth = {tuple(int(x) for x in t) for t in truth}
    if not truth:
        raise ValueError("truth must be nonempty")
    sel = {tuple(int(x) for x in s) for s in selected}
    return len(sel & truth) / len(truth)


def gen_matching_instance(n: int, noise_sigma: float = 0.0, n_outliers: int = 0, seed: int = 42,
                          distractors: bool = True, relative_noise: bool = False) -> CorrespondenceSet:
    """Random rigid matching problem with known ground truth.

    Source points are uniform in the unit square. The target is a random
    rotation and translation of the source, perturbed by Gaussian noise of std
    ``noise_sigma``, plus ``n_outliers`` uniform clutter points, in shuffled
    order. Candidates are the true pairs and, when ``distractors`` is set and
    clutter exists, one pair per source point to the clutter point nearest its
    true target. With ``relative_noise`` the noise std is ``noise_sigma``
    times the source diameter.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    if noise_sigma < 0 or n_outliers < 0:
        raise ValueError("noise_sigma and n_outliers must be nonnegative")
    rng = np.random.default_rng(seed)
    src = rng.uniform(0.0, 1.0, (n, 2))
    theta = rng.uniform(0.0, 2 * np.pi)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = rng.uniform(-2.0, 2.0, 2)
    moved = src @ R.T + shift
    sd = noise_sigma * float(pdist(src).max()) if relative_noise else noise_sigma
    if sd > 0:
        moved = moved + rng.normal(0.0, sd, moved.shape)
    lo, hi = moved.min(axis=0), moved.max(axis=0)
    clutter = rng.uniform(lo, hi, (n_outliers, 2))
    tgt_all = np.vstack([moved, clutter])
    perm = rng.permutation(len(tgt_all))  # perm[new] = old
    where = np.argsort(perm)  # where[old] = new
    target = tgt_all[perm]
    truth = {(i, int(where[i])) for i in range(n)}
    cands = [(i, int(where[i])) for i in range(n)]
    if distractors and n_outliers > 0:
        for i in range(n):
            d = np.linalg.norm(clutter - moved[i], axis=1)
            cands.append((i, int(where[n + int(np.argmin(d))])))
    params = {"generator": "matching", "n": n, "noise_sigma": noise_sigma,
              "n_outliers": n_outliers, "seed": seed, "distractors": distractors,
              "relative_noise": relative_noise, "noise_std": sd,
              "rotation": float(theta), "translation": [float(x) for x in shift]}
    return CorrespondenceSet(src, target, np.array(cands), truth, params)


def _batch_one(args):
    n, noise, outliers, seed, relative, cfg, baseline = args
    cs = gen_matching_instance(n, noise, outliers, seed, relative_noise=relative)
    row = {"seed": seed, "rate": matching_rate(match(cs, cfg).selected, cs.truth)}
    if baseline:
        row["baseline_rate"] = matching_rate(pairwise_baseline(cs, cfg).selected, cs.truth)
    return row


def run_batch(n: int, noise_sigma: float, n_outliers: int, seeds, cfg: MatchConfig | None = None,
              baseline: bool = False, relative_noise: bool = False, workers: int = 1) -> dict:
    """Match one generated instance per seed and aggregate the rates.

    Returns per-instance rows plus mean and (population) standard deviation,
    with a pairwise-baseline column when ``baseline`` is set.
    """
    cfg = cfg or MatchConfig()
    jobs = [(n, noise_sigma, n_outliers, int(s), relative_noise, cfg, baseline) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_batch_one, jobs))
    else:
        rows = [_batch_one(j) for j in jobs]
    rates = np.array([r["rate"] for r in rows])
    out = {"instances": rows, "mean": float(rates.mean()), "std": float(rates.std())}
    if baseline:
        base = np.array([r["baseline_rate"] for r in rows])
        out["baseline_mean"] = float(base.mean())
        out["baseline_std"] = float(base.std())
    return out


# --- instance I/O -------------------------------------------------------------


def dumps_instance(cs: CorrespondenceSet) -> str:
    doc = {
        "source": cs.source.tolist(),
        "target": cs.target.tolist(),
        "candidates": cs.candidates.tolist(),
        "truth": sorted(list(t) for t in cs.truth) if cs.truth is not None else None,
        "params": cs.params,
    }
    return json.dumps(doc, indent=1)


def loads_instance(text: str) -> CorrespondenceSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    for key in ("source", "target", "candidates"):
        if key not in doc:
            raise ValueError(f"instance is missing '{key}'")
    truth = doc.get("truth")
    return CorrespondenceSet(
        np.array(doc["source"], dtype=float),
        np.array(doc["target"], dtype=float),
        np.array(doc["candidates"], dtype=np.int64),
        {tuple(t) for t in truth} if truth is not None else None,
        doc.get("params", {}),
    )


def load_instance(path: str | Path) -> CorrespondenceSet:
    return loads_instance(Path(path).read_text())


def save_instance(cs: CorrespondenceSet, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(cs) + "\n")
