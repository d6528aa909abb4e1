"""
Mixing, spectral gaps and bottlenecks
=====================================

Compare how fast a walk forgets its start with how long two walkers take
to meet.  When mixing is much faster than meeting, the voter density is
well approximated by a Wright-Fisher diffusion.
"""
import numpy as np

import voterwf as vw

# the hypercube gap is 2/n_dim exactly
for d in (4, 6, 8):
    print(f"hypercube({d}): gap {vw.spectral_gap(vw.hypercube(d)):.6f}  (2/d = {2 / d:.6f})")

# total variation from the worst start decays with t
k = vw.torus_nn(8, 2)
for t in (0.5, 2.0, 8.0, 32.0):
    print(f"torus_nn(8,2) d_E({t:4.1f}) = {vw.tv_distance(k, t):.4f}")

# the ratio t_mix / t_meet shrinks along a size ladder: the first mixing condition
print("\n L   t_mix    t_meet   t_mix/t_meet   g*t_meet")
for L in (6, 10, 14):
    k = vw.torus_nn(L, 2)
    t_meet = vw.meeting_moments(k).t_meet
    rep = vw.condition_report(k, t_meet)
    print(f"{L:2d}  {rep.t_mix:7.3f}  {t_meet:8.3f}  {rep.ratio_mix:12.4f}  {rep.gap_times_meet:9.3f}")

# a long-range cycle: the worst set is an arc of half the sites
k = vw.torus_range(30, 3)
phi, witness = vw.bottleneck_optimum(k, "intervals_1d")
print(f"\ntorus_range(30,3): Phi* = {phi:.5f} attained on {len(witness)} consecutive sites")
print("direct evaluation on that set:", vw.bottleneck_ratio(k, np.array(witness)))
g, phi, ok = vw.cheeger_check(k)
print(f"Cheeger: gap {g:.5f} >= Phi*^2/2 = {phi * phi / 2:.5f} -> {ok}")
