"""Density on the simplex, KKT mode certificates and an exhaustive KKT oracle.

Vectors ``p`` live on the probability simplex over hyperedges. The density of
``p`` is the quadratic form ``p @ M @ p``; its local maximizers are the modes.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

SUPPORT_TOL = 1e-8
MODE_TOL = 1e-6
SIMPLEX_TOL = 1e-9


def _check_dims(M: np.ndarray, *vecs: np.ndarray) -> None:
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ValueError(f"adjacency must be square, got shape {M.shape}")
    for v in vecs:
        if v.shape != (n,):
            raise ValueError(f"dimension mismatch: vector of shape {v.shape} for {n}x{n} adjacency")


def density(p, M) -> float:
    """Self-cohesiveness ``p^T M p`` of the probabilistic subhypergraph ``p``."""
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, p)
    return float(p @ M @ p)


def affinity(x, y, M) -> float:
    """Bilinear affinity ``x^T M y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, x, y)
    return float(x @ M @ y)


def support(p, threshold: float = SUPPORT_TOL) -> np.ndarray:
    """Indices of entries strictly above ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.flatnonzero(np.asarray(p, dtype=float) > threshold)


def unit_indicator(j: int, n: int) -> np.ndarray:
    if not 0 <= j < n:
        raise IndexError(f"index {j} out of range for dimension {n}")
    out = np.zeros(n)
    out[j] = 1.0
    return out


def on_simplex(p, tol: float = SIMPLEX_TOL) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(np.all(p >= -tol) and abs(p.sum() - 1.0) <= tol)


@dataclass
class ModeCertificate:
    """Outcome of the KKT check at a point ``mode`` of the simplex.

    ``max_violation`` is the largest off-support excess ``(M p)_j - lambda``
    (``-inf`` when the support is everything) and ``support_residual`` the
    largest on-support deviation ``|(M p)_i - lambda|``.
    """

    mode: np.ndarray
    support: np.ndarray
    lam: float
    is_global_mode: bool
    max_violation: float
    support_residual: float
    tol: float = MODE_TOL
    converged: bool = True
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def is_outlier(self) -> bool:
        """Zero-density modes (isolated hyperedges) are treated as outliers."""
        return self.lam <= 0.0

    @property
    def violators(self) -> np.ndarray:
        return np.asarray(self.extra.get("violators", []), dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "support": [int(i) for i in self.support],
            "lambda": float(self.lam),
            "max_violation": float(self.max_violation) if np.isfinite(self.max_violation) else None,
            "support_residual": float(self.support_residual),
            "is_global_mode": bool(self.is_global_mode),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "mode": {str(int(i)): float(self.mode[i]) for i in self.support},
        }

    def report(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def is_mode(p, M, tol: float = MODE_TOL, support_tol: float = SUPPORT_TOL) -> ModeCertificate:
    """Check both KKT branches at ``p`` against the full adjacency ``M``.

    On the support the affinities ``(M p)_i`` must equal the density within
    ``tol``; off the support they must not exceed it by more than ``tol``.
    """
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, p)
    Mp = M @ p
    lam = float(p @ Mp)
    sup = support(p, support_tol)
    off = np.ones(p.size, dtype=bool)
    off[sup] = False
    excess = Mp[off] - lam
    max_violation = float(excess.max()) if excess.size else -np.inf
    residual = float(np.abs(Mp[sup] - lam).max()) if sup.size else 0.0
    ok = max_violation <= tol and residual <= tol
    violators = np.flatnonzero(off)[excess > tol]
    return ModeCertificate(
        mode=p.copy(),
        support=sup,
        lam=lam,
        is_global_mode=bool(ok),
        max_violation=max_violation,
        support_residual=residual,
        tol=tol,
        extra={"violators": violators},
    )


@dataclass
class KKTEnumeration:
    points: list[ModeCertificate]
    skipped: list[tuple[int, ...]]

    def __iter__(self):
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, k: int) -> ModeCertificate:
        return self.points[k]


MAX_ENUM = 12


def enumerate_kkt_points(M, off_tol: float = 1e-9, pos_tol: float = 1e-12,
                         off_support: bool = True) -> KKTEnumeration:
    """Brute-force every isolated KKT point of ``max p^T M p`` on the simplex.

    For each nonempty support ``S`` solve ``M_S p_S = lambda * 1``,
    ``sum(p_S) = 1`` and keep strictly positive solutions whose off-support
    affinities do not exceed ``lambda``. With ``off_support=False`` that last
    filter is skipped, which lists every point that is stationary on its own
    face. Supports whose system is singular are skipped and listed in
    ``skipped``. Points come back sorted by ``lambda`` descending.
    """
    M = np.asarray(M, dtype=float)
    _check_dims(M)
    n = M.shape[0]
    if n > MAX_ENUM:
        raise ValueError(f"enumeration is exponential; refusing n={n} > {MAX_ENUM}")
    points, skipped = [], []
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            idx = list(S)
            A = np.zeros((r + 1, r + 1))
            A[:r, :r] = M[np.ix_(idx, idx)]
            A[:r, r] = -1.0
            A[r, :r] = 1.0
            rhs = np.zeros(r + 1)
            rhs[r] = 1.0
            if np.linalg.cond(A) > 1e12:
                skipped.append(S)
                continue
            sol = np.linalg.solve(A, rhs)
            pS, lam = sol[:r], sol[r]
            if np.any(pS <= pos_tol):
                continue
            p = np.zeros(n)
            p[idx] = pS
            Mp = M @ p
            mask = np.ones(n, dtype=bool)
            mask[idx] = False
            if off_support and mask.any() and np.max(Mp[mask]) > lam + off_tol:
                continue
            points.append(is_mode(p, M, tol=max(off_tol, MODE_TOL), support_tol=0.0))
    points.sort(key=lambda c: -c.lam)
    return KKTEnumeration(points, skipped)
