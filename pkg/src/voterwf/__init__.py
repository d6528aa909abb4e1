"""Voter model densities on finite graphs and their Wright-Fisher limit.

Exact meeting-time computations, voter and coalescing-walk simulators,
Wright-Fisher reference values and the statistics used to compare them.
"""
__version__ = "0.1.0"

from . import errors
from .kernel import (
    Kernel,
    build_from_adjacency,
    build_from_rates,
    load_kernel,
    pair_measure,
    sample_pair,
    save_kernel,
)
from .zoo import ZooSpec, hypercube, moran, random_regular_perm, torus_nn, torus_range
from .analysis import bottleneck_optimum, bottleneck_ratio, cheeger_check, condition_report, mixing_time, spectral_gap, tv_distance
from .meeting import (
    dual_pair_expectation,
    identity_check,
    meeting_moments,
    meeting_tail,
    muv_consistency,
    prop61_bound_check,
)
from .voter import ensemble, init_bernoulli, mean_field_residual, run, step
from .coalescent import kingman_sampler, run_full, run_partial
from .wright_fisher import MixtureExpLaw, death_chain_sample, mixture_cdf, wf_moment, wf_simulate
from .stats import Ecdf, bootstrap_mean_ci, ks_one_sample, ks_two_sample
from .experiment import ExperimentConfig, Report, run_experiment, trend_check
