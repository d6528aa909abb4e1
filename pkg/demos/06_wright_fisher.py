"""
Wright-Fisher reference values
==============================

Moments of the Wright-Fisher diffusion through its dual death chain, an
Euler-Maruyama check, and the law of a time mixed with an atom at zero.
"""
import numpy as np

import voterwf as vw
from voterwf.wright_fisher import death_chain_law, wf_moment_expm

u, t = 0.3, 0.8
for k in (1, 2, 5, 20):
    print(f"E[Y_t^{k}] = {vw.wf_moment(u, k, t):.10f}   via expm {wf_moment_expm(u, k, t):.10f}")

# the death chain from 5 lineages at time t
print("P(D_t = j), j = 1..5:", np.round(death_chain_law(5, t), 5))
rng = np.random.default_rng(0)
d = vw.death_chain_sample(5, t, rng, 100_000)
print("sampled:             ", np.round(np.bincount(d, minlength=6)[1:] / d.size, 5))

# the SDE by Euler-Maruyama
_, paths = vw.wf_simulate(u, t, 1e-3 * t, rng, 20_000)
y = paths[:, -1]
print(f"simulated E[Y(1-Y)] = {np.mean(y * (1 - y)):.4f}, exact {vw.wf_moment(u, 1, t) - vw.wf_moment(u, 2, t):.4f}")
print("bootstrap 99% interval for E[Y]:", vw.bootstrap_mean_ci(y, 0.99, 2000, rng))

# an exponential time with an atom of mass delta at zero
law = vw.MixtureExpLaw(0.2)
print("mixture cdf at 1:", law.cdf(1.0), "mean of samples:", law.sample(rng, 50_000).mean())
