"""
Coalescing walks and Kingman's coalescent
=========================================

Run coalescing random walks from distinct sites and compare the scaled
coalescence times with those of Kingman's coalescent.
"""
import numpy as np

import voterwf as vw
from voterwf.coalescent import full_ensemble, partial_ensemble

k = vw.torus_nn(12, 2)
t_meet = vw.meeting_moments(k).t_meet
times = partial_ensemble(k, 4, 2000, master_seed=5) / t_meet
rng = np.random.default_rng(6)
ref = vw.kingman_sampler(4, 1, rng, 2000)
print("C_{4,1}: walks mean", times[:, 1].mean().round(3), " Kingman mean", ref.mean().round(3))
r = vw.ks_two_sample(times[:, 1], ref)
print(f"two-sample KS {r.statistic:.4f} (1% threshold {r.threshold:.4f})")

# the gap C_{4,3} is roughly Exp(6)
d = vw.ks_one_sample(times[:, 3], lambda t: 1 - np.exp(-6 * np.maximum(t, 0)))
print(f"C_{{4,3}} vs Exp(6): KS {d.statistic:.4f} (1% threshold {d.threshold:.4f}); finite tori sit above the limit")

# full coalescence on the complete graph: tree height has mean 2 - 2/n
k = vw.moran(40)
full = full_ensemble(k, 1000, master_seed=7) / vw.meeting_moments(k).t_meet
print(f"moran(40) full coalescence: mean {full[:, 1].mean():.3f}, Kingman {2 - 2 / 40:.3f}")

# which starting walkers merged into one block
rec = vw.run_partial(vw.torus_nn(12, 2), 6, rng, stop_at=3)
print("blocks with 3 left:", rec.partition())
