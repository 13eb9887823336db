"""Build a small weighted hypergraph and look at its adjacency and modes.

Run: python3 demos/01_toy_hypergraph.py
"""
import numpy as np

from hgshift import Hypergraph, build_adjacency, enumerate_kkt_points, hypergraph_shift, initial_vector

# five vertices, three hyperedges; the last two share only vertex 1
g = Hypergraph.from_members(5, [[0, 3, 4], [0, 1], [1, 2]], weights=[1.0, 2.0, 4.0])
M = build_adjacency(g)
np.set_printoptions(precision=3, suppress=True)
print("hyperedge adjacency\n", M)
print("M[1,2] =", M[1, 2], "which is the mean of the two pair weights:", (2.0 + 4.0) / 2)

print("\nKKT points of the density over the simplex:")
for c in enumerate_kkt_points(M):
    print(f"  support {c.support.tolist()}  density {c.lam:.4f}")

print("\nshift from every hyperedge:")
for s in range(g.n_edges):
    res = hypergraph_shift(M, initial_vector(M, s), g)
    print(f"  seed {s}: {res.status:8s} density {res.certificate.lam:.4f} "
          f"support {res.certificate.support.tolist()} after {res.expansions} expansions")
