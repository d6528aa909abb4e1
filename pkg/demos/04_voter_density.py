"""
Voter densities against Wright-Fisher
=====================================

Simulate the voter model from product Bernoulli(u) opinions and compare
the density at time t_meet * s with the Wright-Fisher diffusion.
"""
import numpy as np

import voterwf as vw

u = 0.5
grid = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
for k, name in ((vw.moran(100), "moran(100)"), (vw.torus_nn(12, 2), "torus_nn(12,2)")):
    t_meet = vw.meeting_moments(k).t_meet
    s = vw.ensemble(k, u, t_meet, grid[-1], 2000, master_seed=1, grid=grid)
    exact = u * (1 - u) * vw.meeting_tail(k, "UU'", t_meet * grid)
    wf = [u - vw.wf_moment(u, 2, t) for t in grid]
    print(f"\n{name}, t_meet = {t_meet:.2f}")
    print("  s     E[p1 p0] sim     exact      WF")
    for j, t in enumerate(grid):
        print(f"  {t:4.2f}  {s.mean_p1p0[j]:.4f}+-{s.se('p1p0')[j]:.4f}  {exact[j]:.4f}  {wf[j]:.4f}")
    print("  mean density stays at u:", np.round(s.mean_p1, 3))
    print("  mean |mean-field residual| at s = 2:", float(np.mean(np.abs(s.residuals))))

# a single trajectory, step by step
k = vw.torus_nn(5, 2)
rng = np.random.default_rng(3)
st = vw.init_bernoulli(k, 0.5, rng)
n = 0
while not st.absorbed:
    vw.step(st, k, rng)
    n += 1
print(f"\ntorus_nn(5,2) reached consensus on opinion {int(st.p1)} after {n} events")
