"""Follow one hypergraph shift run: local mode, vote, expansion, repeat.

A random hypergraph is seeded from a single hyperedge. Replicator dynamics
settle inside the current support; when that point is not a mode of the whole
hypergraph, the closeness-weighted vote picks a direction and the line search
moves the distribution outward. The trajectory records every phase.

Run: python3 demos/02_expansion_walkthrough.py
"""
import numpy as np

from hgshift import Hypergraph, build_adjacency, hypergraph_shift, initial_vector, seek_mode
from hgshift.voting import direction_vector, dominant_seed_distribution, expansion_step

rng = np.random.default_rng(7)
n_vertices, n_edges = 30, 20
members = [rng.choice(n_vertices, rng.integers(2, 5), replace=False).tolist() for _ in range(n_edges)]

g = Hypergraph.from_members(n_vertices, members, rng.uniform(0.5, 2.0, n_edges))
M = build_adjacency(g)

# one manual round
cert = seek_mode(initial_vector(M, 0), M)
print(f"local mode from seed 0: density {cert.lam:.4f}, support {cert.support.tolist()}, "
      f"global mode: {cert.is_global_mode}")
if not cert.is_global_mode:
    seeds = dominant_seed_distribution(M, cert.support)
    h = direction_vector(cert.mode, M, seeds, cert)
    step = expansion_step(cert.mode, M, h)
    print(f"expansion step size {step.c_star:.4f}, improved: {step.improved}, "
          f"density after step {step.expanded @ M @ step.expanded:.4f}")

# the full loop
res = hypergraph_shift(M, initial_vector(M, 0), g)
print(f"\nfull run: {res.status}, {res.expansions} expansions")
for step, phase, F, size in res.trajectory:
    print(f"  {step:4d} {phase:10s} F={F:.6f} support={size}")
