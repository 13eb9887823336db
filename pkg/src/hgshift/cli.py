"""Command-line entry point: ``hgshift {gen,shift,cluster,match}``.

Every report is JSON with sorted keys and embeds the effective configuration,
so identical inputs and flags give byte-identical files. Failures print one
JSON line on stderr and exit nonzero (2 for usage errors, 1 for run errors,
3 when an internal invariant check fails).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import clustering, hypergraph, matching
from .hypergraph import build_adjacency, intersection_matrix
from .replicator import format_trace, initial_vector
from .stqp import on_simplex
from .voting import ShiftConfig, hypergraph_shift


class UsageError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


def worker_count() -> int:
    """Parallelism cap from ``HGSHIFT_THREADS`` (unset or 0 means all cores)."""
    raw = os.environ.get("HGSHIFT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"HGSHIFT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("HGSHIFT_THREADS must be nonnegative")
    return n or (os.cpu_count() or 1)


def _positive(name):
    def parse(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not x > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive, got {text!r}")
        return x
    return parse


def _nonneg_float(text):
    x = float(text)
    if x < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return x


def _sigma(text):
    if text == "auto":
        return text
    return _positive("--sigma")(text)


def _add_shift_flags(p):
    p.add_argument("--eps", type=_positive("--eps"), default=1e-9)
    p.add_argument("--mode-tol", type=_positive("--mode-tol"), default=1e-6)
    p.add_argument("--support-tol", type=_positive("--support-tol"), default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hgshift", description="Mode seeking on hypergraphs.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a point set or a matching instance")
    g.add_argument("kind", choices=["crescents", "blobs", "match"])
    g.add_argument("--n", type=int, default=None, help="points (crescents) or inliers (match)")
    g.add_argument("--noise", type=_nonneg_float, default=0.0)
    g.add_argument("--relative-noise", action="store_true",
                   help="match: noise is a fraction of the source diameter")
    g.add_argument("--outliers", type=int, default=0)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--out", required=True)

    s = sub.add_parser("shift", help="run hypergraph shift on a hypergraph file")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True, help="report path")
    s.add_argument("--start", default="all", help="seed hyperedge index, or 'all'")
    s.add_argument("--trajectory", default=None, help="optional delimited trajectory file")
    s.add_argument("--seed", type=int, default=42)
    _add_shift_flags(s)

    c = sub.add_parser("cluster", help="cluster a point file")
    c.add_argument("--input", required=True)
    c.add_argument("--out", required=True, help="assignment file (x,y,cluster_id)")
    c.add_argument("--report", default=None, help="summary report path (default: <out>.json)")
    c.add_argument("--k", type=int, default=8)
    c.add_argument("--sigma", type=_sigma, default="auto")
    c.add_argument("--merge-tol", type=_positive("--merge-tol"), default=0.1)
    c.add_argument("--link-ratio", type=float, default=clustering.ClusterConfig.link_ratio)
    c.add_argument("--seed", type=int, default=42)
    _add_shift_flags(c)

    m = sub.add_parser("match", help="match an instance file or generated instances")
    m.add_argument("--input", default=None, help="instance file; omit to generate")
    m.add_argument("--out", required=True, help="report path")
    m.add_argument("--n", type=int, default=15)
    m.add_argument("--noise", type=_nonneg_float, default=0.0)
    m.add_argument("--relative-noise", action="store_true")
    m.add_argument("--outliers", type=int, default=5)
    m.add_argument("--batch", type=int, default=1, help="number of generated instances")
    m.add_argument("--baseline", action="store_true", help="add the pairwise-edge column")
    m.add_argument("--seed", type=int, default=42, help="first generator seed")
    _add_shift_flags(m)
    return ap


def _shift_cfg(a) -> ShiftConfig:
    return ShiftConfig(eps=a.eps, max_iter=a.max_iter, mode_tol=a.mode_tol, support_tol=a.support_tol)


def _config(a) -> dict:
    return {k: v for k, v in sorted(vars(a).items())}


def _write(path, text: str) -> None:
    Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True)


def cmd_gen(a) -> dict:
    if a.kind == "crescents":
        ps = clustering.gen_crescents(600 if a.n is None else a.n, a.noise, a.seed)
        _write(a.out, clustering.format_points(ps))
        params = ps.params
    elif a.kind == "blobs":
        ps = clustering.gen_blobs(30 if a.n is None else a.n, seed=a.seed)
        _write(a.out, clustering.format_points(ps))
        params = ps.params
    else:
        cs = matching.gen_matching_instance(15 if a.n is None else a.n, a.noise, a.outliers, a.seed,
                                            relative_noise=a.relative_noise)
        matching.save_instance(cs, a.out)
        params = cs.params
    print(_dump(params))
    return params


def cmd_shift(a) -> dict:
    g = hypergraph.load(a.input)
    M = build_adjacency(g)
    overlap = intersection_matrix(g) > 0
    n = g.n_edges
    if a.start == "all":
        starts = list(range(n))
    else:
        try:
            starts = [int(a.start)]
        except ValueError:
            raise UsageError(f"--start must be an integer or 'all', got {a.start!r}") from None
        if not 0 <= starts[0] < n:
            raise UsageError(f"--start {starts[0]} out of range for {n} hyperedges")
    cfg = _shift_cfg(a)
    runs, rows = [], []
    for s in starts:
        res = hypergraph_shift(M, initial_vector(M, s), g, cfg, overlap=overlap)
        Fs = [t[2] for t in res.trajectory]
        if not on_simplex(res.certificate.mode, 1e-9) or any(y <= x for x, y in zip(Fs, Fs[1:])):
            raise InvariantError(f"run from seed {s} broke the simplex or monotone-density invariant")
        entry = {"seed": s, "status": res.status, "expansions": res.expansions,
                 "outlier": bool(res.certificate.is_outlier),
                 "certificate": res.certificate.to_dict(),
                 "trajectory": [list(t) for t in res.trajectory]}
        runs.append(entry)
        rows.extend((s,) + tuple(t) for t in res.trajectory)
    report = {"config": _config(a), "n_hyperedges": n, "vertex_count": g.vertex_count, "runs": runs}
    _write(a.out, _dump(report))
    if a.trajectory:
        _write(a.trajectory, format_trace(rows, header=("seed", "step", "phase", "F", "support_size")))
    return report


def cmd_cluster(a) -> dict:
    ps = clustering.read_points(a.input)
    if not 2 <= a.k < len(ps):
        raise UsageError(f"--k must satisfy 2 <= k < {len(ps)}, got {a.k}")
    link = None if a.link_ratio <= 0 else a.link_ratio
    cfg = clustering.ClusterConfig(k=a.k, sigma=a.sigma, merge_tol=a.merge_tol, link_ratio=link,
                                   shift=_shift_cfg(a))
    res = clustering.cluster_points(ps, cfg, workers=worker_count())
    if res.assignments.shape != (len(ps),) or res.assignments.max(initial=-1) >= res.n_clusters:
        raise InvariantError("cluster assignment is inconsistent with the cluster count")
    _write(a.out, clustering.format_points(ps, res.assignments))
    doc = clustering.summary(res, ps.labels)
    doc["config"] = _config(a)
    _write(a.report or a.out + ".json", _dump(doc))
    return doc


def _check_one_to_one(pairs) -> None:
    src = [p for p, _ in pairs]
    tgt = [q for _, q in pairs]
    if len(set(src)) != len(src) or len(set(tgt)) != len(tgt):
        raise InvariantError("selected pairs are not one-to-one")


def _match_doc(cs, cfg, baseline: bool) -> dict:
    res = matching.match(cs, cfg)
    _check_one_to_one(res.selected)
    doc = {"selected": [list(p) for p in res.selected], "status": res.run.status,
           "n_hyperedges": res.n_hyperedges, "lambda": float(res.certificate.lam)}
    if cs.truth:
        doc["rate"] = matching.matching_rate(res.selected, cs.truth)
    if baseline:
        base = matching.pairwise_baseline(cs, cfg)
        _check_one_to_one(base.selected)
        doc["baseline_selected"] = [list(p) for p in base.selected]
        if cs.truth:
            doc["baseline_rate"] = matching.matching_rate(base.selected, cs.truth)
    return doc


def cmd_match(a) -> dict:
    cfg = matching.MatchConfig(shift=_shift_cfg(a))
    if a.batch < 1:
        raise UsageError("--batch must be at least 1")
    if a.input:
        if a.batch != 1:
            raise UsageError("--batch applies to generated instances only")
        cs = matching.load_instance(a.input)
        body = _match_doc(cs, cfg, a.baseline)
    elif a.batch == 1:
        cs = matching.gen_matching_instance(a.n, a.noise, a.outliers, a.seed,
                                            relative_noise=a.relative_noise)
        body = _match_doc(cs, cfg, a.baseline)
        body["instance"] = cs.params
    else:
        body = matching.run_batch(a.n, a.noise, a.outliers, range(a.seed, a.seed + a.batch), cfg,
                                  baseline=a.baseline, relative_noise=a.relative_noise,
                                  workers=worker_count())
    report = {"config": _config(a), **body}
    _write(a.out, _dump(report))
    return report


COMMANDS = {"gen": cmd_gen, "shift": cmd_shift, "cluster": cmd_cluster, "match": cmd_match}


def _fail(kind: str, msg: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": " ".join(str(msg).split())}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        COMMANDS[a.command](a)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except InvariantError as exc:
        return _fail("invariant", exc, 3)
    except (ValueError, IndexError, OSError, KeyError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
