"""Wright-Fisher diffusion reference values.

Moments come from the moment duality with the Kingman death chain
``k -> k - 1`` at rate ``C(k, 2)``: ``E_u[Y_t^k] = E_k[u^{D_t}]``.  The law of
``D_t`` is a hypoexponential sum whose coefficients are exact rationals; they
are summed in mpmath at a working precision large enough to absorb the
cancellation between terms, so the result is accurate to double precision.
"""
from fractions import Fraction
from functools import lru_cache
import math

import mpmath
import numpy as np
import scipy.linalg

from . import errors
from ._streams import as_rng

K_CAP = 100


def death_rates(k):
    j = np.arange(1, k + 1)
    return j * (j - 1) // 2


@lru_cache(maxsize=None)
def _coefficients(k):
    """``c[j][m]`` with ``P_k(D_t = j) = sum_m c[j][m] exp(-C(m,2) t)``, ``j <= m <= k``."""
    lam = [m * (m - 1) // 2 for m in range(k + 1)]
    out = {}
    for j in range(1, k + 1):
        lead = 1
        for i in range(j + 1, k + 1):
            lead *= lam[i]
        row = {}
        for m in range(j, k + 1):
            den = 1
            for l in range(j, k + 1):
                if l != m:
                    den *= lam[l] - lam[m]
            row[m] = Fraction(lead, den)
        out[j] = row
    return out


@lru_cache(maxsize=None)
def _moment_poly(k):
    """``a[m]`` as polynomials in ``u``: ``E_k[u^{D_t}] = sum_m exp(-C(m,2) t) sum_j c[j][m] u^j``."""
    c = _coefficients(k)
    poly = {m: [Fraction(0)] * (k + 1) for m in range(1, k + 1)}
    for j, row in c.items():
        for m, v in row.items():
            poly[m][j] += v
    digits = max(abs(v).numerator.bit_length() - abs(v).denominator.bit_length()
                 for r in c.values() for v in r.values() if v)
    return poly, int(digits * 0.30103) + 30


def _check(k, t):
    k = int(k)
    if k < 1:
        raise errors.BadParam("k must be >= 1")
    if k > K_CAP:
        raise errors.Overflow(f"moment order capped at {K_CAP}")
    if t < 0:
        raise errors.BadParam("t must be >= 0")
    return k


def death_chain_law(k, t):
    """``P_k(D_t = j)`` for ``j = 1..k`` as a float array (index ``j - 1``)."""
    k = _check(k, t)
    c = _coefficients(k)
    _, dps = _moment_poly(k)
    with mpmath.workdps(dps):
        e = {m: mpmath.exp(-mpmath.mpf(m * (m - 1) // 2) * mpmath.mpf(t)) for m in range(1, k + 1)}
        out = [sum(mpmath.mpf(v.numerator) / v.denominator * e[m] for m, v in c[j].items())
               for j in range(1, k + 1)]
        return np.array([float(x) for x in out])


def wf_moment(u, k, t):
    """``E_u[Y_t^k]`` for the Wright-Fisher diffusion started at ``u``."""
    if not 0.0 <= u <= 1.0:
        raise errors.BadParam("u must lie in [0, 1]")
    k = _check(k, t)
    poly, dps = _moment_poly(k)
    with mpmath.workdps(dps):
        uu = mpmath.mpf(u)
        tt = mpmath.mpf(t)
        total = mpmath.mpf(0)
        for m, coef in poly.items():
            p = mpmath.mpf(0)
            for j in range(k, 0, -1):
                p = (p + mpmath.mpf(coef[j].numerator) / coef[j].denominator) * uu
            total += p * mpmath.exp(-mpmath.mpf(m * (m - 1) // 2) * tt)
        return float(total)


def death_generator(k):
    """Generator of the death chain on ``{1..k}`` (index ``j - 1``)."""
    lam = death_rates(k).astype(float)
    g = np.diag(-lam)
    g[np.arange(1, k), np.arange(k - 1)] = lam[1:]
    return g


def wf_moment_expm(u, k, t):
    """Same moment through a dense matrix exponential; a cross-check for small ``k``."""
    k = _check(k, t)
    law = scipy.linalg.expm(t * death_generator(k))[k - 1]
    return float(law @ (u ** np.arange(1, k + 1)))


def death_chain_sample(k, t, rng=None, size=None):
    """``D_t`` from ``D_0 = k`` by summing exponential holding times."""
    if k < 1 or t < 0:
        raise errors.BadParam("need k >= 1 and t >= 0")
    rng = as_rng(rng)
    m = 1 if size is None else int(size)
    d = np.full(m, int(k))
    clock = np.zeros(m)
    live = d > 1
    while live.any():
        lam = d[live] * (d[live] - 1) / 2.0
        clock[live] += rng.exponential(1.0 / lam)
        jumped = clock[live] <= t
        idx = np.nonzero(live)[0]
        d[idx[jumped]] -= 1
        live[idx[~jumped]] = False
        live &= d > 1
    return int(d[0]) if size is None else d


class MixtureExpLaw:
    """Atom ``delta`` at 0 plus a rate-one exponential with weight ``1 - delta``."""

    def __init__(self, delta):
        if not 0.0 <= delta < 1.0:
            raise errors.BadParam("delta must lie in [0, 1)")
        self.delta = float(delta)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = self.delta + (1.0 - self.delta) * -np.expm1(-np.maximum(t, 0.0))
        return np.where(t < 0, 0.0, out)

    def cdf_left(self, t):
        """``P(X < t)``, which differs from :meth:`cdf` only at the atom."""
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0, 0.0, self.cdf(t))

    def sample(self, rng=None, size=None):
        rng = as_rng(rng)
        atom = rng.random(size) < self.delta
        return np.where(atom, 0.0, rng.standard_exponential(size))


def mixture_cdf(delta, t):
    out = MixtureExpLaw(delta).cdf(t)
    return float(out) if np.ndim(out) == 0 else out


def wf_simulate(u, T, dt=None, rng=None, replicas=1, record=None):
    """Euler-Maruyama paths of ``dY = sqrt(Y (1 - Y)) dW``, clamped to ``[0, 1]``.

    Returns ``(times, paths)``; ``paths`` has one row per replica and one
    column per time in ``record`` (default: ``0`` and ``T``).  A path within
    ``1e-12`` of a boundary is absorbed there.  Diagnostic only.
    """
    if not 0.0 <= u <= 1.0 or T <= 0:
        raise errors.BadParam("need u in [0, 1] and T > 0")
    dt = T * 1e-4 if dt is None else float(dt)
    if not 0 < dt <= 1e-3 * T * (1 + 1e-12):
        raise errors.BadParam("dt must satisfy 0 < dt <= 1e-3 T")
    rng = as_rng(rng)
    steps = int(math.ceil(T / dt - 1e-9))
    record = np.array([0.0, T] if record is None else record, dtype=float)
    at = np.clip(np.round(record / T * steps).astype(int), 0, steps)
    y = np.full(int(replicas), float(u))
    out = np.empty((len(y), len(record)))
    h = T / steps
    out[:, at == 0] = y[:, None]
    for s in range(1, steps + 1):
        live = (y > 1e-12) & (y < 1 - 1e-12)
        y[~live] = np.round(y[~live])
        if live.any():
            yl = y[live]
            y[live] = np.clip(yl + np.sqrt(yl * (1.0 - yl) * h) * rng.standard_normal(yl.size), 0.0, 1.0)
        hit = at == s
        if hit.any():
            out[:, hit] = y[:, None]
    return record, out
