"""Probabilistic hypergraphs and the hyperedge-adjacency matrix.

A hypergraph is stored as an ordered list of sparse membership maps, one per
hyperedge, plus a weight per hyperedge. Everything downstream (density,
replicator dynamics, shifting) works on the dense ``|E| x |E|`` matrix
returned by :func:`build_adjacency`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class HypergraphFormatError(ValueError):
    """Raised when a hypergraph file or object violates an invariant."""


@dataclass(frozen=True)
class Hypergraph:
    """Weighted hypergraph with probabilistic incidence.

    Parameters
    ----------
    vertex_count : int
        Number of vertices ``|V|``.
    hyperedges : sequence of mappings
        ``hyperedges[e][v]`` is the membership probability of vertex ``v`` in
        hyperedge ``e``, in ``(0, 1]``. Absent vertices have membership 0.
    weights : sequence of float
        Nonnegative weight per hyperedge.

    Construct with :meth:`from_members` to have the input checked.
    """

    vertex_count: int
    hyperedges: tuple[Mapping[int, float], ...]
    weights: tuple[float, ...]
    _arrays: list = field(default_factory=list, init=False, repr=False, compare=False)

    @classmethod
    def from_members(
        cls,
        vertex_count: int,
        hyperedges: Sequence[Mapping[int, float] | Sequence[int]],
        weights: Sequence[float] | None = None,
    ) -> "Hypergraph":
        """Build and validate. A plain vertex list means binary membership."""
        edges = []
        for e in hyperedges:
            if isinstance(e, Mapping):
                edges.append({int(v): float(h) for v, h in e.items()})
            else:
                edges.append({int(v): 1.0 for v in e})
        if weights is None:
            weights = [1.0] * len(edges)
        g = cls(int(vertex_count), tuple(edges), tuple(float(w) for w in weights))
        problem = validate(g)
        if problem is not None:
            raise HypergraphFormatError(problem)
        return g

    @property
    def n_edges(self) -> int:
        return len(self.hyperedges)

    def members(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted member indices of hyperedge ``i`` and their probabilities."""
        if not self._arrays:
            for e in self.hyperedges:
                idx = np.array(sorted(e), dtype=np.int64)
                self._arrays.append((idx, np.array([e[v] for v in idx], dtype=float)))
        return self._arrays[i]

    def incidence(self) -> np.ndarray:
        """Dense ``|V| x |E|`` incidence matrix ``H``."""
        H = np.zeros((self.vertex_count, self.n_edges))
        for j in range(self.n_edges):
            idx, h = self.members(j)
            H[idx, j] = h
        return H


def validate(g: Hypergraph) -> str | None:
    """Return a description of the first violated invariant, or ``None``."""
    if g.vertex_count < 0:
        return f"negative vertex_count {g.vertex_count}"
    if len(g.weights) != len(g.hyperedges):
        return f"{len(g.weights)} weights for {len(g.hyperedges)} hyperedges"
    for k, (e, w) in enumerate(zip(g.hyperedges, g.weights)):
        if not e:
            return f"empty hyperedge at index {k}"
        for v, h in e.items():
            if not 0 <= v < g.vertex_count:
                return f"vertex index {v} out of range in hyperedge {k}"
            if not (math.isfinite(h) and 0.0 < h <= 1.0):
                return f"probability out of range: h[{v},{k}] = {h}"
        if not (math.isfinite(w) and w >= 0.0):
            return f"invalid weight {w} at hyperedge {k}"
    return None


def _check_edge(g: Hypergraph, i: int) -> None:
    if not 0 <= i < g.n_edges:
        raise IndexError(f"hyperedge index {i} out of range for {g.n_edges} hyperedges")


def hyperedge_degree(g: Hypergraph, i: int) -> float:
    """Sum of membership probabilities of hyperedge ``i``."""
    _check_edge(g, i)
    return float(math.fsum(g.hyperedges[i].values()))


def vertex_degree(g: Hypergraph, v: int) -> float:
    """Weighted membership sum of vertex ``v`` over all hyperedges."""
    if not 0 <= v < g.vertex_count:
        raise IndexError(f"vertex index {v} out of range for {g.vertex_count} vertices")
    return float(math.fsum(e.get(v, 0.0) * w for e, w in zip(g.hyperedges, g.weights)))


def intersection_mass(g: Hypergraph, i: int, j: int) -> float:
    """Overlap of two hyperedges: sum over shared vertices of the smaller membership.

    With binary memberships this is the number of shared vertices.
    """
    _check_edge(g, i)
    _check_edge(g, j)
    a, b = g.hyperedges[i], g.hyperedges[j]
    if len(a) > len(b):
        a, b = b, a
    return float(math.fsum(min(h, b[v]) for v, h in a.items() if v in b))


def intersection_matrix(g: Hypergraph) -> np.ndarray:
    """All pairwise intersection masses, with the diagonal set to zero."""
    n = g.n_edges
    H = g.incidence()
    out = np.zeros((n, n))
    # min(a, b) summed over vertices; loop over hyperedges, vectorize the rest
    for i in range(n):
        idx, h = g.members(i)
        out[i] = np.minimum(h[:, None], H[idx]).sum(axis=0)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def build_adjacency(g: Hypergraph) -> np.ndarray:
    """Hyperedge-adjacency matrix ``M``.

    ``M[i, j] = |e_i & e_j| * (w_i / deg(e_i) + w_j / deg(e_j))`` for ``i != j``
    and zero on the diagonal. The result is symmetric by construction.
    """
    problem = validate(g)
    if problem is not None:
        raise HypergraphFormatError(problem)
    inter = intersection_matrix(g)
    deg = np.array([hyperedge_degree(g, i) for i in range(g.n_edges)])
    r = np.asarray(g.weights, dtype=float) / deg
    M = inter * (r[:, None] + r[None, :])
    np.fill_diagonal(M, 0.0)
    return M


# --- JSON file format -------------------------------------------------------


def _line_of(text: str, needle: str, start: int = 0) -> int:
    pos = text.find(needle, start)
    return text.count("\n", 0, pos) + 1 if pos >= 0 else 0


def loads(text: str) -> Hypergraph:
    """Parse the JSON hypergraph format.

    Errors carry the line of the offending hyperedge where it can be located.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HypergraphFormatError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise HypergraphFormatError("line 1: top level must be an object")
    if not isinstance(doc.get("vertex_count"), int) or isinstance(doc.get("vertex_count"), bool):
        line = _line_of(text, '"vertex_count"') or 1
        raise HypergraphFormatError(f"line {line}: vertex_count must be an integer")
    raw = doc.get("hyperedges")
    if not isinstance(raw, list):
        line = _line_of(text, '"hyperedges"') or 1
        raise HypergraphFormatError(f"line {line}: hyperedges must be an array")

    # approximate line numbers: the k-th occurrence of "members" belongs to hyperedge k
    lines, pos = [], 0
    for _ in raw:
        p = text.find('"members"', pos)
        lines.append(text.count("\n", 0, p) + 1 if p >= 0 else 0)
        pos = p + 1 if p >= 0 else pos

    edges, weights = [], []
    for k, obj in enumerate(raw):
        where = f"line {lines[k]}: hyperedge {k}"
        if not isinstance(obj, dict) or not isinstance(obj.get("members"), dict):
            raise HypergraphFormatError(f"{where}: expected object with a 'members' map")
        w = obj.get("weight", 1.0)
        if not isinstance(w, (int, float)) or isinstance(w, bool):
            raise HypergraphFormatError(f"{where}: weight must be a number")
        members = {}
        for key, h in obj["members"].items():
            try:
                v = int(key)
            except ValueError:
                raise HypergraphFormatError(f"{where}: vertex key {key!r} is not an integer") from None
            if not isinstance(h, (int, float)) or isinstance(h, bool):
                raise HypergraphFormatError(f"{where}: membership of vertex {v} must be a number")
            members[v] = float(h)
        edges.append(members)
        weights.append(float(w))
    g = Hypergraph(doc["vertex_count"], tuple(edges), tuple(weights))
    problem = validate(g)
    if problem is not None:
        k = _edge_in_message(problem)
        prefix = f"line {lines[k]}: " if k is not None and k < len(lines) else ""
        raise HypergraphFormatError(prefix + problem)
    return g


def _edge_in_message(msg: str) -> int | None:
    for marker in ("at index ", "in hyperedge ", "at hyperedge "):
        if marker in msg:
            return int(msg.split(marker)[1].split()[0].rstrip(","))
    if msg.startswith("probability out of range"):
        return int(msg.split(",")[1].split("]")[0])
    return None


def dumps(g: Hypergraph) -> str:
    doc = {
        "vertex_count": g.vertex_count,
        "hyperedges": [
            {"weight": w, "members": {str(v): h for v, h in sorted(e.items())}}
            for e, w in zip(g.hyperedges, g.weights)
        ],
    }
    return json.dumps(doc, indent=1)


def load(path: str | Path) -> Hypergraph:
    return loads(Path(path).read_text())


def save(g: Hypergraph, path: str | Path) -> None:
    Path(path).write_text(dumps(g) + "\n")
