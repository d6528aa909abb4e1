"""Empirical distribution functions, Kolmogorov-Smirnov distances, bootstrap intervals."""
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import kolmogi

from . import errors
from ._streams import as_rng

MIN_KS = 10
MIN_BOOT = 30
KS_CONST = {0.01: 1.628, 0.05: 1.358}


def ks_constant(alpha):
    """Asymptotic ``c(alpha)`` with ``P(sqrt(N) D > c) = alpha``."""
    for a, c in KS_CONST.items():
        if abs(alpha - a) < 1e-12:
            return c
    return float(kolmogi(alpha))


class Ecdf:
    """Right-continuous empirical CDF of a sample."""

    def __init__(self, sample):
        self.x = np.sort(np.asarray(sample, dtype=float).ravel())
        self.n = self.x.size

    def __call__(self, t):
        if self.n == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return np.searchsorted(self.x, t, side="right") / self.n

    def left(self, t):
        if self.n == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return np.searchsorted(self.x, t, side="left") / self.n


@dataclass
class KSResult:
    statistic: float
    threshold: float
    n_eff: float
    alpha: float

    @property
    def passed(self):
        return bool(self.statistic <= self.threshold)

    def __iter__(self):
        return iter((self.statistic, self.threshold))


def ks_one_sample(sample, cdf, alpha=0.01, cdf_left=None):
    """``sup_t |F_N(t) - F(t)|`` against a law given by its CDF.

    The supremum is attained at sample points, approached from the right
    (``F_N(x) - F(x)``) or from the left (``F(x-) - F_N(x-)``).  Pass
    ``cdf_left`` for laws with atoms; it defaults to ``cdf``.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n < MIN_KS:
        raise errors.TooFewSamples(f"need at least {MIN_KS} samples")
    f = np.asarray(cdf(x), dtype=float)
    fl = f if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(fl - (i - 1) / n)
    d = float(max(d_plus, d_minus, 0.0))
    return KSResult(d, float(ks_constant(alpha) / np.sqrt(n)), float(n), alpha)


def ks_two_sample(a, b, alpha=0.01):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < MIN_KS or b.size < MIN_KS:
        raise errors.TooFewSamples(f"need at least {MIN_KS} samples in each")
    d = float(sps.ks_2samp(a, b, method="asymp").statistic)
    n_eff = a.size * b.size / (a.size + b.size)
    return KSResult(d, float(ks_constant(alpha) / np.sqrt(n_eff)), float(n_eff), alpha)


def mean_se(sample, axis=0):
    """Sample mean and its standard error (``ddof=1``)."""
    a = np.asarray(sample, dtype=float)
    n = a.shape[axis]
    return a.mean(axis=axis), a.std(axis=axis, ddof=1) / np.sqrt(n)


def bootstrap_mean_ci(sample, level=0.99, resamples=2000, rng=None):
    """Percentile bootstrap interval for the mean."""
    a = np.asarray(sample, dtype=float).ravel()
    if a.size < MIN_BOOT:
        raise errors.TooFewSamples(f"need at least {MIN_BOOT} samples")
    if not 0 < level < 1:
        raise errors.BadParam("level must lie in (0, 1)")
    rng = as_rng(rng)
    if np.all(a == a[0]):
        return float(a[0]), float(a[0])
    res = sps.bootstrap((a,), np.mean, confidence_level=level, n_resamples=resamples,
                        method="percentile", random_state=rng, vectorized=True)
    return float(res.confidence_interval.low), float(res.confidence_interval.high)
