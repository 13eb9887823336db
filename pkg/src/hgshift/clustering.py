"""Point clustering with hypergraph shift.

Each point spawns a hyperedge made of itself and its ``k`` nearest
neighbours. Shifting from every hyperedge gives a mode per seed; seeds whose
modes coincide form a cluster, and points take the cluster that claims most
of their membership mass.
"""
from __future__ import annotations

import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .hypergraph import Hypergraph, build_adjacency, intersection_matrix
from .replicator import initial_vector
from .stqp import ModeCertificate
from .voting import ShiftConfig, ShiftResult, hypergraph_shift

OUTLIER = -1


@dataclass
class PointSet:
    points: np.ndarray
    labels: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point coordinates must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.points),):
                raise ValueError("labels must cover every point")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class KnnHypergraph:
    """A kNN hypergraph plus the map from input points to its vertices."""

    hypergraph: Hypergraph
    vertex_of_point: np.ndarray
    sigma: float
    k: int


def knn_hyperedges(ps: PointSet | np.ndarray, k: int = 8, sigma: float | str = "auto") -> KnnHypergraph:
    """One hyperedge per distinct point: the point and its ``k`` nearest neighbours.

    Membership of a vertex decays as ``exp(-d^2 / sigma^2)`` with its distance
    to the hyperedge centroid, rescaled so the largest membership is 1. The
    weight is the mean pairwise similarity ``exp(-d^2 / sigma^2)`` among the
    members. ``sigma="auto"`` uses the mean distance to the ``k`` neighbours.
    Coincident points share one vertex.
    """
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=float).reshape(-1, 2)
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n = len(uniq)
    if not 2 <= k < n:
        raise ValueError(f"k must satisfy 2 <= k < number of distinct points ({n}), got {k}")
    D = squareform(pdist(uniq))
    order = np.argsort(D, axis=1, kind="stable")
    nbrs = np.empty((n, k + 1), dtype=np.int64)
    for i in range(n):
        row = order[i][order[i] != i][:k]
        nbrs[i, 0] = i
        nbrs[i, 1:] = row
    if sigma == "auto":
        sigma = float(np.mean(D[np.arange(n)[:, None], nbrs[:, 1:]]))
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError("sigma must be positive")

    edges, weights = [], []
    for i in range(n):
        mem = np.sort(nbrs[i])
        X = uniq[mem]
        d2 = ((X - X.mean(axis=0)) ** 2).sum(axis=1)
        h = np.exp(-d2 / sigma**2)
        h /= h.max()
        edges.append({int(v): float(x) for v, x in zip(mem, h)})
        sim = np.exp(-pdist(X, "sqeuclidean") / sigma**2)
        weights.append(float(sim.mean()))
    g = Hypergraph.from_members(n, edges, weights)
    return KnnHypergraph(g, inverse, sigma, k)


def merge_modes(certs: list[ModeCertificate], tol: float = 0.1) -> list[list[int]]:
    """Group certificates whose mode vectors are within L1 distance ``tol``.

    Groups are closed transitively. Each group lists certificate indices, the
    highest-density member first.
    """
    n = len(certs)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    vecs = [np.asarray(c.mode, dtype=float) for c in certs]
    for a in range(n):
        for b in range(a + 1, n):
            if find(a) != find(b) and np.abs(vecs[a] - vecs[b]).sum() <= tol:
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    out = [sorted(grp, key=lambda a: (-certs[a].lam, a)) for grp in groups.values()]
    out.sort(key=lambda grp: grp[0])
    return out


@dataclass
class ClusterResult:
    assignments: np.ndarray  # per vertex (per input point after cluster_points); OUTLIER marks outliers
    modes: list[ModeCertificate]  # highest-density mode of each cluster
    edge_cluster: np.ndarray  # per hyperedge
    runs: list[ShiftResult]
    params: dict
    mode_groups: list[list[int]] = field(default_factory=list)  # seed indices per merged mode

    @property
    def n_clusters(self) -> int:
        return len(self.modes)


@dataclass
class ClusterConfig:
    k: int = 8
    sigma: float | str = "auto"
    merge_tol: float = 0.1
    link_ratio: float | None = 0.55
    shift: ShiftConfig = field(default_factory=ShiftConfig)


def affinity_heights(M) -> np.ndarray:
    """Total affinity of each hyperedge, ``M @ 1``: a local cohesiveness score."""
    return np.asarray(M, dtype=float).sum(axis=1)


def link_basins(M, edge_cluster: np.ndarray, heights: np.ndarray, ratio: float) -> np.ndarray:
    """Join basins whose best contact is nearly as dense as the lower peak.

    Two basins touch where a hyperedge of one has positive affinity with a
    hyperedge of the other; the contact height is the smaller of the two
    hyperedge heights. Contacts are visited from highest to lowest and basins are joined
    when the contact reaches ``ratio`` times the lower of the two peaks
    (persistence-style merging). Returns the new label of each old basin.
    """
    M = np.asarray(M)
    k = int(edge_cluster.max()) + 1 if edge_cluster.size and edge_cluster.max() >= 0 else 0
    peak = np.zeros(k)
    for c in range(k):
        peak[c] = heights[edge_cluster == c].max()
    ii, jj = np.nonzero(np.triu(M > 0, 1))
    ca, cb = edge_cluster[ii], edge_cluster[jj]
    keep = (ca != cb) & (ca >= 0) & (cb >= 0)
    contact: dict[tuple[int, int], float] = {}
    for a, b, hgt in zip(ca[keep], cb[keep], np.minimum(heights[ii], heights[jj])[keep]):
        key = (min(a, b), max(a, b))
        if hgt > contact.get(key, -np.inf):
            contact[key] = hgt
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (a, b), hgt in sorted(contact.items(), key=lambda kv: (-kv[1], kv[0])):
        ra, rb = find(a), find(b)
        if ra != rb and hgt >= ratio * min(peak[ra], peak[rb]):
            parent[rb] = ra
            peak[ra] = max(peak[ra], peak[rb])
    roots = sorted({find(a) for a in range(k)})
    relabel = {r: t for t, r in enumerate(roots)}
    return np.array([relabel[find(a)] for a in range(k)], dtype=np.int64)


_POOL_STATE: dict = {}


def _pool_init(M, overlap, shift_cfg):
    _POOL_STATE.update(M=M, overlap=overlap, cfg=shift_cfg)


def _pool_run(seeds):
    M, overlap, cfg = _POOL_STATE["M"], _POOL_STATE["overlap"], _POOL_STATE["cfg"]
    return [hypergraph_shift(M, initial_vector(M, s), cfg=cfg, overlap=overlap) for s in seeds]


def shift_all_seeds(M, overlap, shift_cfg: ShiftConfig, workers: int = 1) -> list[ShiftResult]:
    """One shift run per hyperedge seed, in seed order.

    With ``workers > 1`` the seeds are split into contiguous chunks and run in
    worker processes; results are identical to the serial run.
    """
    n = M.shape[0]
    if workers <= 1 or n < 2:
        _pool_init(M, overlap, shift_cfg)
        try:
            return _pool_run(range(n))
        finally:
            _POOL_STATE.clear()
    chunks = [c.tolist() for c in np.array_split(np.arange(n), min(workers, n) * 4) if c.size]
    with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                             initargs=(M, overlap, shift_cfg)) as ex:
        return [r for part in ex.map(_pool_run, chunks) for r in part]


def cluster(g: Hypergraph, cfg: ClusterConfig | None = None, M=None, workers: int = 1) -> ClusterResult:
    """Shift from every hyperedge, merge coinciding modes, label the vertices.

    Hyperedges whose runs reach the same (merged) mode form a basin. With
    ``cfg.link_ratio`` set, adjacent basins are then joined by
    :func:`link_basins`. A vertex takes the cluster holding most of its
    membership mass; vertices whose hyperedges all reach zero-density modes
    are outliers.
    """
    cfg = cfg or ClusterConfig()
    M = build_adjacency(g) if M is None else np.asarray(M, dtype=float)
    overlap = intersection_matrix(g) > 0
    n = g.n_edges
    runs = shift_all_seeds(M, overlap, cfg.shift, workers)
    certs = [r.certificate for r in runs]

    live = [s for s in range(n) if not certs[s].is_outlier]
    groups = [[live[a] for a in grp] for grp in merge_modes([certs[s] for s in live], cfg.merge_tol)]
    edge_cluster = np.full(n, OUTLIER, dtype=np.int64)
    for c, members in enumerate(groups):
        edge_cluster[members] = c
    if cfg.link_ratio is not None and groups:
        relabel = link_basins(M, edge_cluster, affinity_heights(M), cfg.link_ratio)
        edge_cluster = np.where(edge_cluster >= 0, relabel[np.maximum(edge_cluster, 0)], OUTLIER)
    k = int(edge_cluster.max()) + 1 if groups else 0
    modes = []
    for c in range(k):
        best = max(np.flatnonzero(edge_cluster == c), key=lambda s: (certs[s].lam, -s))
        modes.append(certs[best])

    H = g.incidence()  # |V| x |E|
    if k:
        onehot = np.zeros((n, k))
        hit = edge_cluster >= 0
        onehot[np.flatnonzero(hit), edge_cluster[hit]] = 1.0
        votes = H @ onehot
        best = np.argmax(votes, axis=1)
        assign = np.where(votes[np.arange(g.vertex_count), best] > 0, best, OUTLIER)
    else:
        assign = np.full(g.vertex_count, OUTLIER, dtype=np.int64)
    params = {"merge_tol": cfg.merge_tol, "link_ratio": cfg.link_ratio, "eps": cfg.shift.eps,
              "mode_tol": cfg.shift.mode_tol, "support_tol": cfg.shift.support_tol,
              "max_iter": cfg.shift.max_iter}
    return ClusterResult(assign.astype(np.int64), modes, edge_cluster, runs, params, groups)


def cluster_points(ps: PointSet, cfg: ClusterConfig | None = None, workers: int = 1) -> ClusterResult:
    """Build the kNN hypergraph for ``ps`` and cluster it; assignments are per point."""
    cfg = cfg or ClusterConfig()
    kh = knn_hyperedges(ps, cfg.k, cfg.sigma)
    res = cluster(kh.hypergraph, cfg, workers=workers)
    res.assignments = res.assignments[kh.vertex_of_point]
    res.params.update({"k": cfg.k, "sigma": kh.sigma, "sigma_rule": str(cfg.sigma)})
    return res


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth, outlier: int | None = OUTLIER) -> float:
    """Normalized mutual information ``I / sqrt(H(pred) H(truth))``.

    Points marked ``outlier`` in either labelling are dropped from both. When
    either side has zero entropy the score is 1 for identical partitions and
    0 otherwise.
    """
    a = np.asarray(pred)
    b = np.asarray(truth)
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    if outlier is not None:
        keep = (a != outlier) & (b != outlier)
        a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    ha, hb = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if ha == 0.0 or hb == 0.0:
        return 1.0 if table.shape[0] == table.shape[1] == 1 else 0.0
    pij = table / table.sum()
    pa = pij.sum(axis=1, keepdims=True)
    pb = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / (pa @ pb)[nz])).sum())
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


CRESCENT_RADIUS = 10.0
CRESCENT_WIDTH = 1.0


def gen_crescents(n_points: int, noise_sigma: float = 0.0, seed: int = 42,
                  radius: float = CRESCENT_RADIUS, width: float = CRESCENT_WIDTH) -> PointSet:
    """Five interleaved half-annuli, alternately opening down and up.

    Crescent ``c`` has its circle centre at ``(1.25 c radius, (c % 2) radius / 2)``
    and covers the upper half for even ``c``, the lower half for odd ``c``.
    Points are spread evenly over the crescents (the first ``n % 5`` get one
    extra), one per equal slice of the arc at a random angle within the slice
    and a uniform radius, then perturbed by isotropic Gaussian noise of std
    ``noise_sigma``.
    """
    if n_points < 50:
        raise ValueError("n_points must be at least 50")
    rng = np.random.default_rng(seed)
    counts = np.full(5, n_points // 5)
    counts[: n_points % 5] += 1
    pts, labels = [], []
    for c, m in enumerate(counts):
        # jittered strata along the arc keep the sampling free of large gaps
        theta = np.pi * (np.arange(m) + rng.uniform(0.0, 1.0, m)) / m
        r = radius + rng.uniform(-width / 2, width / 2, m)
        sign = 1.0 if c % 2 == 0 else -1.0
        cx, cy = 1.25 * c * radius, (c % 2) * radius / 2
        pts.append(np.column_stack([cx + r * np.cos(theta), cy + sign * r * np.sin(theta)]))
        labels.append(np.full(m, c))
    X = np.concatenate(pts)
    if noise_sigma > 0:
        X = X + rng.normal(0.0, noise_sigma, X.shape)
    params = {"generator": "crescents", "n_points": n_points, "noise_sigma": noise_sigma,
              "seed": seed, "radius": radius, "width": width,
              "angles": "stratified"}
    return PointSet(X, np.concatenate(labels), params)


def gen_blobs(n_per: int = 30, centers=((0.0, 0.0), (10.0, 0.0), (5.0, 9.0)),
              sigma: float = 1.0 / 3.0, seed: int = 42) -> PointSet:
    """Isotropic Gaussian blobs, for sanity checks."""
    rng = np.random.default_rng(seed)
    pts = [rng.normal(c, sigma, (n_per, 2)) for c in centers]
    labels = np.repeat(np.arange(len(centers)), n_per)
    return PointSet(np.concatenate(pts), labels,
                    {"generator": "blobs", "n_per": n_per, "sigma": sigma, "seed": seed})


# --- text I/O -----------------------------------------------------------------


def read_points(path: str | Path) -> PointSet:
    """Read ``x,y[,label]`` lines. Blank lines and ``#`` comments are skipped."""
    pts, labels = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            if len(parts) not in (2, 3):
                raise ValueError
            pts.append((float(parts[0]), float(parts[1])))
            labels.append(int(parts[2]) if len(parts) == 3 else None)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected 'x,y[,label]', got {line!r}") from None
    if any(lab is None for lab in labels):
        if any(lab is not None for lab in labels):
            raise ValueError(f"{path}: labels must be given for all points or none")
        return PointSet(np.array(pts))
    return PointSet(np.array(pts), np.array(labels))


def format_points(ps: PointSet, labels=None) -> str:
    labels = ps.labels if labels is None else labels
    buf = io.StringIO()
    for k, (x, y) in enumerate(ps.points):
        if labels is None:
            buf.write(f"{x:.10g},{y:.10g}\n")
        else:
            buf.write(f"{x:.10g},{y:.10g},{int(labels[k])}\n")
    return buf.getvalue()


def summary(res: ClusterResult, truth=None) -> dict:
    out = {
        "n_clusters": res.n_clusters,
        "n_outliers": int(np.sum(res.assignments == OUTLIER)),
        "lambdas": [round(float(m.lam), 12) for m in res.modes],
        "statuses": _count([r.status for r in res.runs]),
        "params": res.params,
    }
    if truth is not None:
        out["nmi"] = round(nmi(res.assignments, truth), 12)
    return out


def _count(items) -> dict:
    out: dict[str, int] = {}
    for x in items:
        out[x] = out.get(x, 0) + 1
    return dict(sorted(out.items()))


def format_summary(res: ClusterResult, truth=None) -> str:
    return json.dumps(summary(res, truth), indent=1, sort_keys=True)
