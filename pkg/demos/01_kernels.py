"""
Kernels, stationary laws and the pair measure
=============================================

Build a few walks from the zoo, look at their stationary distribution and
at the law of an ordered pair of neighbours, then round-trip one kernel
through the text file format.
"""
import os
import tempfile

import numpy as np

import voterwf as vw

# the zoo: complete graph, 2-d torus, hypercube and a random 4-regular multigraph
kernels = {
    "moran(10)": vw.moran(10),
    "torus_nn(6,2)": vw.torus_nn(6, 2),
    "hypercube(5)": vw.hypercube(5),
    "random_regular_perm(30,4)": vw.random_regular_perm(30, 4, seed=1),
}
for name, k in kernels.items():
    print(f"{name:28s} n={k.n:3d}  sum pi^2={k.pi_diag:.4f}  nu(1)={k.nu_total:.4f}  reversible={k.reversible}")

# an irregular graph has a non-uniform stationary law, proportional to degree
adj = np.array([[0, 1, 1, 1], [1, 0, 1, 0], [1, 1, 0, 0], [1, 0, 0, 0]])
star = vw.build_from_adjacency(adj)
print("degrees", adj.sum(1), "-> pi", np.round(star.pi, 4))

# ordered pairs (V, V') with law proportional to pi(x)^2 q(x, y)
rng = np.random.default_rng(0)
v, w = vw.sample_pair(star, "VV'", rng, size=100_000)
emp = np.zeros((4, 4))
np.add.at(emp, (v, w), 1)
pm = vw.pair_measure(star)
exact = np.zeros((4, 4))
exact[pm.rows, pm.cols] = pm.weights
print("largest deviation of empirical pair law:", np.abs(emp / emp.sum() - exact).max())

# kernels are stored as "n" followed by "x y rate" lines
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "torus.kernel")
    vw.save_kernel(kernels["torus_nn(6,2)"], path)
    back = vw.load_kernel(path)
    print("file round trip equal:", np.array_equal(back.rates.toarray(), kernels["torus_nn(6,2)"].rates.toarray()))
