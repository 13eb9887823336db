"""Discrete replicator dynamics for mode seeking on a subhypergraph."""
from __future__ import annotations

import io
from typing import Iterable

import numpy as np

from .stqp import MODE_TOL, SUPPORT_TOL, ModeCertificate, _check_dims, is_mode, support

EPS = 1e-9
MAX_ITER = 1000


class DegenerateStartError(ValueError):
    """The starting vector has zero density, so the update is undefined."""


def replicator_step(p, M) -> np.ndarray:
    """One update ``p_i <- p_i (M p)_i / (p^T M p)``."""
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, p)
    Mp = M @ p
    F = float(p @ Mp)
    if not F > 0.0:
        raise DegenerateStartError(f"degenerate start: density {F!r} is not positive")
    return p * Mp / F


def initial_vector(M, seed: int) -> np.ndarray:
    """Uniform distribution over ``seed`` and its affinity neighbours.

    An isolated seed yields its indicator vector, which has zero density;
    callers treat that as a trivial outlier mode.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if not 0 <= seed < n:
        raise IndexError(f"seed {seed} out of range for {n} hyperedges")
    mask = M[seed] > 0
    mask[seed] = True
    return mask / mask.sum()


def seek_mode(
    p0,
    M,
    eps: float = EPS,
    max_iter: int = MAX_ITER,
    tol: float = MODE_TOL,
    support_tol: float = SUPPORT_TOL,
    trace: list | None = None,
) -> ModeCertificate:
    """Iterate replicator dynamics from ``p0`` until the density stalls.

    Stops when ``|F(t+1) - F(t)| < eps`` or after ``max_iter`` updates. The
    returned certificate is checked against the full matrix ``M``; its
    ``iterations`` and ``converged`` fields report how the run ended. Hitting
    ``max_iter`` is not an error.

    Only the nonzero block of ``p0`` is iterated, since zero entries stay zero.
    If ``trace`` is a list, ``(iteration, F, support_size)`` tuples are appended.
    """
    p = np.asarray(p0, dtype=float)
    M = np.asarray(M, dtype=float)
    _check_dims(M, p)
    if eps <= 0:
        raise ValueError("eps must be positive")
    idx = np.flatnonzero(p > 0)
    q = p[idx] / p[idx].sum()
    A = M[np.ix_(idx, idx)]
    Aq = A @ q
    F = float(q @ Aq)
    if not F > 0.0:
        raise DegenerateStartError(f"degenerate start: density {F!r} is not positive")
    if trace is not None:
        trace.append((0, F, int(np.count_nonzero(q > support_tol))))

    # dying entries are only pruned once the density has nearly stalled
    prune_below = np.sqrt(eps)
    converged = False
    it = 0
    while it < max_iter:
        q = q * Aq / F
        q /= q.sum()
        Aq = A @ q
        F_new = float(q @ Aq)
        it += 1
        dF = abs(F_new - F)
        F = F_new
        if dF < prune_below:
            q, Aq, F = _prune(q, A, Aq, F, tol, support_tol)
        if dF < eps:
            live = q > support_tol
            converged = bool(np.max(np.abs(Aq[live] - F)) <= tol)
            if converged and np.any(Aq[~live] > F + tol):
                # a pruned entry became profitable again: step back toward it
                q, Aq, F = _reinstate(q, A, Aq, F, (~live) & (Aq > F + tol))
                converged = False
        if trace is not None:
            trace.append((it, F, int(np.count_nonzero(q > support_tol))))
        if converged:
            break

    full = np.zeros_like(p)
    full[idx] = q
    cert = is_mode(full, M, tol=tol, support_tol=support_tol)
    cert.converged = converged
    cert.iterations = it
    return cert


def _prune(q, A, Aq, F, tol, support_tol):
    """Zero out dying entries when doing so cannot lower the density.

    Removing entry ``i`` and renormalizing gives ``(F - 2 q_i a_i) / (1 - q_i)^2``
    (zero diagonal), which is ``>= F`` iff ``q_i F <= 2 (F - a_i)``.
    """
    dying = (q > 0) & (Aq < F - tol) & (q * F <= 2.0 * (F - Aq))
    if not dying.any():
        return q, Aq, F
    for drop in (dying, np.eye(q.size, dtype=bool)[np.argmin(np.where(dying, Aq - F, np.inf))]):
        r = np.where(drop, 0.0, q)
        r /= r.sum()
        Ar = A @ r
        Fr = float(r @ Ar)
        if Fr >= F:
            return r, Ar, Fr
    return q, Aq, F


def _reinstate(q, A, Aq, F, mask):
    """Exact line search from ``q`` toward the uniform vector on ``mask``.

    Along ``(1 - t) q + t u`` the density is
    ``F + 2 t (a - F) - t^2 (2 a - F - b)`` with ``a = u^T A q`` and
    ``b = u^T A u``; ``a > F`` makes the step an ascent.
    """
    u = mask / mask.sum()
    Au = A @ u
    a = float(u @ Aq)
    b = float(u @ Au)
    curv = 2 * a - F - b
    t = min(1.0, (a - F) / curv) if curv > 0 else 1.0
    r = (1 - t) * q + t * u
    r /= r.sum()
    Ar = A @ r
    return r, Ar, float(r @ Ar)


def format_trace(rows: Iterable[tuple], header: Iterable[str] = ("iteration", "F", "support_size")) -> str:
    """Render trace rows as comma-delimited text with a header line."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(f"{x:.12g}" if isinstance(x, float) else str(x) for x in row) + "\n")
    return buf.getvalue()
