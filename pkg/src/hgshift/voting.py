"""Probabilistic voting and the hypergraph shift loop.

A converged mode that fails the off-support KKT test is expanded along a
direction that lowers mass on the current support and raises it on violating
hyperedges next to the dominant seeds. Mode seeking then resumes from the
expanded vector. The loop ends at a point that passes the test.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hypergraph import Hypergraph, intersection_matrix
from .replicator import EPS, MAX_ITER, DegenerateStartError, format_trace, seek_mode
from .stqp import MODE_TOL, SUPPORT_TOL, ModeCertificate, _check_dims, is_mode, support

EXACT_CAP = 16


class SubsetTooLarge(ValueError):
    """The exact closeness recursion was asked for a subset above its cap."""


def _as_index_list(s) -> list[int]:
    out = [int(i) for i in s]
    if not out:
        raise ValueError("subset must be nonempty")
    return out


def avg_weighted_degree(M, s, k: int) -> float:
    """Mean affinity of hyperedge ``k`` to the members of ``s``."""
    s = _as_index_list(s)
    return float(np.mean(np.asarray(M)[k, s]))


def relative_closeness(M, s, i: int, j: int) -> float:
    """``M[i, j]`` minus the average affinity of ``i`` within ``s``. May be negative."""
    s = _as_index_list(s)
    if i not in s:
        raise ValueError(f"hyperedge {i} is not in the subset")
    return float(np.asarray(M)[i, j]) - avg_weighted_degree(M, s, i)


def _exact_weights(M, s: list[int]) -> np.ndarray:
    """Closeness weight of every member of ``s`` via bitmask dynamic programming.

    ``W[T, i]`` holds the weight of member ``i`` inside the sub-subset ``T``;
    subsets are processed by increasing size so ``T - {i}`` is always ready.
    """
    m = len(s)
    A = np.asarray(M, dtype=float)[np.ix_(s, s)]
    masks = np.arange(1 << m)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    size = bits.sum(axis=1)
    rowsum = bits @ A  # rowsum[U, j] = sum_{k in U} A[j, k]
    W = np.zeros((1 << m, m))
    W[1 << np.arange(m), np.arange(m)] = 1.0
    for c in range(2, m + 1):
        layer = masks[size == c]
        for i in range(m):
            T = layer[bits[layer, i]]
            U = T ^ (1 << i)
            psi = A[:, i][None, :] - rowsum[U] / (c - 1)
            W[T, i] = (psi * W[U]).sum(axis=1)
    return W[-1]


def _approx_weights(M, s: list[int]) -> np.ndarray:
    """One-level closeness: inner weights of the recursion replaced by 1."""
    m = len(s)
    if m == 1:
        return np.ones(1)
    A = np.asarray(M, dtype=float)[np.ix_(s, s)]
    rowsum = A.sum(axis=1)
    out = np.empty(m)
    for i in range(m):
        rest = np.arange(m) != i
        g = (rowsum[rest] - A[rest, i]) / (m - 1)
        out[i] = np.sum(A[rest, i] - g)
    return out


def subset_weight(M, s, i: int, cap: int = EXACT_CAP) -> float:
    """Recursive closeness weight of member ``i`` within subset ``s``.

    Exact and memoized; raises :class:`SubsetTooLarge` above ``cap`` members
    (use :func:`approx_subset_weight` there).
    """
    s = sorted(set(_as_index_list(s)))
    if i not in s:
        raise ValueError(f"hyperedge {i} is not in the subset")
    if len(s) > cap:
        raise SubsetTooLarge(f"|S| = {len(s)} exceeds exact recursion cap {cap}")
    return float(_exact_weights(M, s)[s.index(i)])


def approx_subset_weight(M, s, i: int) -> float:
    s = sorted(set(_as_index_list(s)))
    if i not in s:
        raise ValueError(f"hyperedge {i} is not in the subset")
    return float(_approx_weights(M, s)[s.index(i)])


@dataclass
class SeedDistribution:
    """Normalized closeness of each member of ``subset``.

    ``raw`` keeps the unclamped recursive weights; ``exact`` says whether the
    exact recursion or the one-level approximation produced them.
    """

    subset: np.ndarray
    closeness: np.ndarray
    raw: np.ndarray
    exact: bool = True
    uniform_fallback: bool = False

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(c) for i, c in zip(self.subset, self.closeness)}

    @property
    def dominant(self) -> np.ndarray:
        """Members whose closeness is maximal."""
        top = self.closeness.max()
        return self.subset[np.isclose(self.closeness, top, rtol=1e-12, atol=0.0)]

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.subset] = self.closeness
        return out


def dominant_seed_distribution(M, s, cap: int = EXACT_CAP) -> SeedDistribution:
    s = np.array(sorted(set(_as_index_list(s))), dtype=np.int64)
    exact = len(s) <= cap
    raw = _exact_weights(M, list(s)) if exact else _approx_weights(M, list(s))
    # closeness is a distribution: negative weights carry no vote
    pos = np.clip(raw, 0.0, None)
    total = pos.sum()
    if total > 0 and np.isfinite(total):
        return SeedDistribution(s, pos / total, raw, exact)
    return SeedDistribution(s, np.full(len(s), 1.0 / len(s)), raw, exact, uniform_fallback=True)


def uniform_seeds(s) -> SeedDistribution:
    s = np.array(sorted(set(_as_index_list(s))), dtype=np.int64)
    flat = np.full(len(s), 1.0 / len(s))
    return SeedDistribution(s, flat, flat.copy(), exact=True, uniform_fallback=True)


def direction_vector(p_star, M, seeds: SeedDistribution, cert: ModeCertificate,
                     overlap=None) -> np.ndarray:
    """Voting direction ``h``.

    On the mode's support ``h_i = p*_i - 1``. Off it, ``h_i`` is the KKT excess
    ``(M p*)_i - F(p*)`` scaled by the closeness mass of the seeds that share a
    vertex with hyperedge ``i``, clamped at zero. ``overlap[i, j]`` says whether
    hyperedges ``i`` and ``j`` share a vertex; it defaults to ``M > 0``.
    """
    if cert.is_global_mode:
        raise ValueError("direction_vector called on a certified global mode")
    p = np.asarray(p_star, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, p)
    n = p.size
    if overlap is None:
        overlap = M > 0
    excess = M @ p - float(p @ M @ p)
    on = np.zeros(n, dtype=bool)
    on[cert.support] = True
    mass = overlap[:, seeds.subset].astype(float) @ seeds.closeness
    h = np.where(on, p - 1.0, np.maximum(mass * excess, 0.0))
    return h


@dataclass
class ExpansionResult:
    direction: np.ndarray
    eta: float
    slope: float  # (p*)^T M h
    c_star: float
    c_max: float
    delta_p: np.ndarray
    expanded: np.ndarray
    improved: bool
    q_value: float  # F(p* + c* h) - F(p*), before renormalization
    density_before: float
    density_after: float
    c_vertex: float  # vertex of the unnormalized parabola, for audit
    c_ratio: float  # (p*)^T M h / F(p*), for audit


def expansion_step(p_star, M, h, support_tol: float = SUPPORT_TOL) -> ExpansionResult:
    """Step along ``h`` and renormalize onto the simplex.

    The step length maximizes the density of the renormalized point
    ``(p* + c h) / (1 + c sum(h))`` over ``0 <= c <= c_max``, where ``c_max``
    keeps the support entries nonnegative. That ratio of quadratics has a
    single critical point, so the search is closed-form.
    """
    p = np.asarray(p_star, dtype=float)
    M = np.asarray(M, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_dims(M, p, h)
    Mh = M @ h
    eta = float(h @ Mh)
    b = float(p @ Mh)
    lam = float(p @ M @ p)
    sigma = float(h.sum())

    on = support(p, support_tol)
    bounded = on[p[on] < 1.0]
    with np.errstate(divide="ignore"):
        c_max = float(np.min(p[bounded] / (1.0 - p[bounded]))) if bounded.size else np.inf
    c_vertex = b / -eta if eta < 0 else np.inf
    c_ratio = b / lam if lam > 0 else np.inf

    def G(c):
        return (lam + 2 * b * c + eta * c * c) / (1 + sigma * c) ** 2

    rise = b - sigma * lam  # sign of dG/dc at c = 0
    if not rise > 0:
        c_star = 0.0
    else:
        curv = sigma * b - eta
        c_crit = rise / curv if curv > 0 else np.inf
        c_star = min(c_crit, c_max)

    if np.isinf(c_star):
        # density keeps rising with c; take the limit point h / sum(h)
        expanded = np.clip(h, 0.0, None)
        expanded /= expanded.sum()
        delta_p = expanded - p
        q_value = np.inf
    else:
        delta_p = c_star * h
        raw = np.clip(p + delta_p, 0.0, None)
        expanded = raw / raw.sum()
        q_value = eta * c_star**2 + 2 * b * c_star
    after = float(expanded @ M @ expanded)
    return ExpansionResult(
        direction=h,
        eta=eta,
        slope=b,
        c_star=float(c_star),
        c_max=c_max,
        delta_p=delta_p,
        expanded=expanded,
        improved=bool(c_star > 0 and after > lam),
        q_value=float(q_value),
        density_before=lam,
        density_after=after,
        c_vertex=float(c_vertex),
        c_ratio=float(c_ratio),
    )


def convex_step(p_star, M, h) -> ExpansionResult:
    """Fallback expansion that stays on the simplex.

    Moves from ``p*`` toward ``w = h_off / sum(h_off)``, the off-support votes
    of ``h``, with an exact line search on ``F((1 - t) p* + t w)``. The slope at
    ``t = 0`` is ``2 (w^T M p* - F(p*))``, positive whenever ``h`` only votes
    for hyperedges violating the KKT test, however loosely ``p*`` converged.
    """
    p = np.asarray(p_star, dtype=float)
    M = np.asarray(M, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_dims(M, p, h)
    lam = float(p @ M @ p)
    votes = np.where(h > 0, h, 0.0)  # support entries of h are never positive
    nan = float("nan")
    if not votes.sum() > 0:
        return ExpansionResult(h, nan, nan, 0.0, 1.0, np.zeros_like(p), p.copy(), False,
                               0.0, lam, lam, nan, nan)
    w = votes / votes.sum()
    a = float(w @ M @ p)
    beta = float(w @ M @ w)
    curv = 2 * a - lam - beta  # F(t) = lam + 2 t (a - lam) - t^2 curv
    t = min(1.0, (a - lam) / curv) if curv > 0 else 1.0
    t = max(t, 0.0)
    expanded = (1 - t) * p + t * w
    expanded /= expanded.sum()
    after = float(expanded @ M @ expanded)
    d = w - p
    return ExpansionResult(
        direction=d,
        eta=float(d @ M @ d),
        slope=float(p @ M @ d),
        c_star=t,
        c_max=1.0,
        delta_p=t * d,
        expanded=expanded,
        improved=bool(t > 0 and after > lam),
        q_value=after - lam,
        density_before=lam,
        density_after=after,
        c_vertex=nan,
        c_ratio=nan,
    )


@dataclass
class ShiftConfig:
    eps: float = EPS
    max_iter: int = MAX_ITER
    mode_tol: float = MODE_TOL
    support_tol: float = SUPPORT_TOL
    exact_cap: int = EXACT_CAP
    max_expansions: int | None = None  # None means |E|
    max_seek_rounds: int = 10


@dataclass
class ShiftResult:
    certificate: ModeCertificate
    trajectory: list[tuple[int, str, float, int]]
    expansions: int
    status: str
    audit: list[dict] = field(default_factory=list)

    def trajectory_text(self) -> str:
        return format_trace(self.trajectory, header=("step", "phase", "F", "support_size"))


def _seek(p, M, cfg: ShiftConfig) -> tuple[ModeCertificate, int]:
    """Run seek_mode rounds until convergence or ``cfg.max_seek_rounds``.

    Between rounds, support entries whose affinity still exceeds the density
    (a slow escape from a saddle) get a line-search step toward them.
    """
    rounds, total = 0, 0
    while True:
        cert = seek_mode(p, M, eps=cfg.eps, max_iter=cfg.max_iter,
                         tol=cfg.mode_tol, support_tol=cfg.support_tol)
        rounds += 1
        total += cert.iterations
        if cert.converged or rounds >= cfg.max_seek_rounds:
            cert.iterations = total
            return cert, rounds
        p = cert.mode
        excess = M @ p - cert.lam
        rising = np.zeros(p.size)
        rising[cert.support] = np.maximum(excess[cert.support] - cfg.mode_tol, 0.0)
        if rising.any():
            step = convex_step(p, M, rising)
            if step.improved:
                p = step.expanded


def hypergraph_shift(M, p0, g: Hypergraph | None = None, cfg: ShiftConfig | None = None,
                     overlap=None) -> ShiftResult:
    """Alternate mode seeking and voting expansion until the KKT test passes.

    ``status`` is one of ``"mode"`` (passes the test), ``"outlier"`` (isolated
    start, zero density), ``"stuck"`` (no ascent direction found),
    ``"expansion_cap"`` or ``"not_converged"``.
    """
    cfg = cfg or ShiftConfig()
    M = np.asarray(M, dtype=float)
    p = np.asarray(p0, dtype=float)
    _check_dims(M, p)
    n = M.shape[0]
    if overlap is None:
        overlap = intersection_matrix(g) > 0 if g is not None else M > 0
    cap = n if cfg.max_expansions is None else cfg.max_expansions

    F0 = float(p @ M @ p)
    if not F0 > 0:
        cert = is_mode(p, M, tol=cfg.mode_tol, support_tol=cfg.support_tol)
        if cert.support.size == 1 and not np.any(M[cert.support[0]] > 0):
            return ShiftResult(cert, [(0, "start", 0.0, 1)], 0, "outlier")
        raise DegenerateStartError("degenerate start: zero density at a non-isolated start")

    traj = [(0, "start", F0, int(support(p, cfg.support_tol).size))]
    audit = []
    expansions = 0
    while True:
        cert, _ = _seek(p, M, cfg)
        if cert.lam > traj[-1][2]:
            traj.append((len(traj), "seek", cert.lam, int(cert.support.size)))
        if not cert.converged:
            return ShiftResult(cert, traj, expansions, "not_converged", audit)
        if cert.max_violation <= cfg.mode_tol:
            return ShiftResult(cert, traj, expansions, "mode", audit)
        if expansions >= cap:
            return ShiftResult(cert, traj, expansions, "expansion_cap", audit)

        seeds = dominant_seed_distribution(M, cert.support, cap=cfg.exact_cap)
        h = direction_vector(cert.mode, M, seeds, cert, overlap)
        step = expansion_step(cert.mode, M, h, cfg.support_tol)
        kind = "vote"
        if not step.improved:
            if not np.any(h > 0):
                # the violators only touch seeds with zero closeness
                seeds = uniform_seeds(cert.support)
                h = direction_vector(cert.mode, M, seeds, cert, overlap)
            step = convex_step(cert.mode, M, h)
            kind = "convex"
        audit.append({
            "expansion": expansions,
            "kind": kind,
            "seeds_exact": seeds.exact,
            "uniform_seeds": seeds.uniform_fallback,
            "eta": step.eta,
            "slope": step.slope,
            "c_star": step.c_star,
            "c_max": step.c_max,
            "c_vertex": step.c_vertex,
            "c_ratio": step.c_ratio,
            "q_value": step.q_value,
            "improved": step.improved,
        })
        if not step.improved:
            return ShiftResult(cert, traj, expansions, "stuck", audit)
        expansions += 1
        p = step.expanded
        traj.append((len(traj), "expand", step.density_after,
                     int(support(p, cfg.support_tol).size)))
