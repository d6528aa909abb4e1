"""Exact meeting times of two independent chains.

Two routes are available.  The product route works on the ordered pairs
``(x, y)``, ``x != y``, with the diagonal absorbing; it needs ``n <= 64``.
For kernels that are invariant under an abelian group of translations the
difference ``X - Y`` is itself a Markov chain with rates
``q(0, v) + q(0, -v)`` and the meeting time is its hitting time of ``0``,
which needs only ``n`` states.  ``route="auto"`` prefers the reduction.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_simpson

from . import errors
from .analysis import spectral_gap, tv_distance
from .kernel import _group_neg, _group_sub, is_translation_invariant
from .semigroup import SemigroupEvaluator

PRODUCT_CAP = 64
REDUCED_CAP = 1 << 16
TAIL_EPS = 1e-14


class ProductChain:
    """Two independent copies of the chain, killed when they meet.

    ``index[x, y]`` numbers the off-diagonal pairs; ``generator`` is the
    sub-stochastic rate matrix restricted to them.
    """

    def __init__(self, kernel):
        n = kernel.n
        if n > PRODUCT_CAP:
            raise errors.TooLarge(f"product chain capped at {PRODUCT_CAP} sites")
        self.kernel = kernel
        self.n = n
        index = -np.ones((n, n), dtype=np.int64)
        xs, ys = np.nonzero(~np.eye(n, dtype=bool))
        index[xs, ys] = np.arange(len(xs))
        self.index = index
        self.pairs = np.stack([xs, ys], axis=1)
        m = len(xs)
        coo = kernel.rates.tocoo()
        a, b, r = coo.row, coo.col, coo.data
        c = np.arange(n)
        # first coordinate moves a -> b, second sits at c
        fa = np.repeat(a, n)
        fb = np.repeat(b, n)
        fr = np.repeat(r, n)
        fc = np.tile(c, len(a))
        src1 = index[fa, fc]
        dst1 = index[fb, fc]
        # second coordinate moves a -> b, first sits at c
        src2 = index[fc, fa]
        dst2 = index[fc, fb]
        src = np.concatenate([src1, src2])
        dst = np.concatenate([dst1, dst2])
        rr = np.concatenate([fr, fr])
        ok = (src >= 0) & (dst >= 0)
        off = sp.coo_matrix((rr[ok], (src[ok], dst[ok])), shape=(m, m)).tocsr()
        out = kernel.total_rate[xs] + kernel.total_rate[ys]
        self.generator = (off - sp.diags(out)).tocsc()

    def weights(self, which):
        k = self.kernel
        if which == "UU'":
            w = k.pi[self.pairs[:, 0]] * k.pi[self.pairs[:, 1]]
        elif which == "VV'":
            nu = k.nu.toarray()
            w = nu[self.pairs[:, 0], self.pairs[:, 1]] / k.nu_total
        else:
            raise errors.BadParam(which)
        return w


class DifferenceWalk:
    """``X - Y`` on the translation group, killed at ``0``."""

    def __init__(self, kernel):
        if not is_translation_invariant(kernel):
            raise errors.TooLarge("difference reduction needs a translation-invariant kernel")
        if kernel.n > REDUCED_CAP:
            raise errors.TooLarge(f"difference walk capped at {REDUCED_CAP} states")
        self.kernel = kernel
        self.shape = tuple(kernel.group)
        n = kernel.n
        r0 = kernel.rates.getrow(0).tocoo()
        offsets = r0.col
        rates = r0.data
        neg = _group_neg(offsets, self.shape)
        d = np.arange(n)
        rows, cols, vals = [], [], []
        for v, w, r in zip(offsets, neg, rates):
            # X jumps by v: D gains v.  Y jumps by v: D gains -v.
            for step in (v, w):
                rows.append(d)
                cols.append(_group_sub(d, _group_neg(step, self.shape), self.shape))
                vals.append(np.full(n, r))
        full = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
        full.setdiag(0)
        full.eliminate_zeros()
        out = np.asarray(full.sum(axis=1)).ravel()
        keep = np.arange(1, n)
        self.generator = (full[keep][:, keep] - sp.diags(out[keep])).tocsc()
        self.offset_law = (offsets, rates / rates.sum())

    def weights(self, which):
        n = self.kernel.n
        if which == "UU'":
            return np.full(n - 1, 1.0 / n)
        if which == "VV'":
            offsets, p = self.offset_law
            w = np.zeros(n)
            # V - V' = -(offset of the pair)
            np.add.at(w, _group_neg(offsets, self.shape), p)
            return w[1:]
        raise errors.BadParam(which)

    def difference(self, x, y):
        return int(_group_sub(x, y, self.shape))


def _choose_route(kernel, route):
    if route == "auto":
        if is_translation_invariant(kernel) and kernel.n <= REDUCED_CAP:
            return "difference"
        if kernel.n <= PRODUCT_CAP:
            return "product"
        raise errors.TooLarge("kernel is neither small enough nor translation invariant")
    if route not in ("product", "difference"):
        raise errors.BadParam(f"unknown route {route!r}")
    return route


def _chain(kernel, route):
    route = _choose_route(kernel, route)
    return (ProductChain(kernel) if route == "product" else DifferenceWalk(kernel)), route


@dataclass
class MeetingSolution:
    """First two moments of ``M_{x,y}`` and the derived scalars.

    ``h1`` and ``h2`` are indexed by transient states of the chain used:
    off-diagonal ordered pairs for the product route, nonzero differences for
    the reduced route.  Use :meth:`mean` / :meth:`second` for pair lookups.
    """

    route: str
    h1: np.ndarray
    h2: np.ndarray
    t_meet: float
    mvv_mean: float
    mvv_second: float
    chain: object = field(repr=False)

    def _state(self, x, y):
        if x == y:
            return None
        if self.route == "product":
            return int(self.chain.index[x, y])
        return self.chain.difference(x, y) - 1

    def mean(self, x, y):
        s = self._state(x, y)
        return 0.0 if s is None else float(self.h1[s])

    def second(self, x, y):
        s = self._state(x, y)
        return 0.0 if s is None else float(self.h2[s])

    def as_matrix(self, which="h1"):
        vals = self.h1 if which == "h1" else self.h2
        n = self.chain.kernel.n
        out = np.zeros((n, n))
        for x in range(n):
            for y in range(n):
                s = self._state(x, y)
                if s is not None:
                    out[x, y] = vals[s]
        return out


def meeting_moments(kernel, route="auto"):
    """Solve ``-Q h1 = 1`` and ``-Q h2 = 2 h1`` on the non-met states."""
    chain, route = _chain(kernel, route)
    a = (-chain.generator).tocsc()
    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise errors.SingularSystem(str(exc)) from exc
    h1 = lu.solve(np.ones(a.shape[0]))
    h2 = lu.solve(2.0 * h1)
    if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
        raise errors.SingularSystem("non-finite meeting moments")
    wu = chain.weights("UU'")
    wv = chain.weights("VV'")
    return MeetingSolution(
        route=route,
        h1=h1,
        h2=h2,
        t_meet=float(wu @ h1),
        mvv_mean=float(wv @ h1),
        mvv_second=float(wv @ h2),
        chain=chain,
    )


@dataclass
class IdentityCheck:
    mvv_mean: float
    mvv_mean_predicted: float
    mvv_residual: float
    t_meet: float
    t_meet_predicted: float
    t_meet_residual: float
    lower_bound: float
    lower_bound_ok: bool

    @property
    def max_residual(self):
        return max(self.mvv_residual, self.t_meet_residual)


def identity_check(kernel, solution):
    """Relative residuals of the two moment identities and the lower bound on ``t_meet``.

    ``E[M_VV'] = (1 - pi_diag) / (2 nu(1))`` and ``t_meet = nu(1) E[M_VV'^2]``;
    Cauchy-Schwarz then gives ``t_meet >= ((1 - pi_diag)/2)^2 / nu(1)``.
    """
    nu1 = kernel.nu_total
    pred_v = (1.0 - kernel.pi_diag) / (2.0 * nu1)
    pred_u = nu1 * solution.mvv_second
    bound = ((1.0 - kernel.pi_diag) / 2.0) ** 2 / nu1
    return IdentityCheck(
        mvv_mean=solution.mvv_mean,
        mvv_mean_predicted=pred_v,
        mvv_residual=abs(solution.mvv_mean - pred_v) / pred_v,
        t_meet=solution.t_meet,
        t_meet_predicted=pred_u,
        t_meet_residual=abs(solution.t_meet - pred_u) / solution.t_meet,
        lower_bound=bound,
        lower_bound_ok=bool(solution.t_meet >= bound - 1e-9),
    )


def survival_grid(kernel, times, route="auto", eps=TAIL_EPS):
    """Survival probabilities of every non-met state at each time, shape ``(len(times), m)``."""
    chain, route = _chain(kernel, route)
    sg = SemigroupEvaluator(chain.generator, eps=eps)
    return sg.right_grid(np.ones(chain.generator.shape[0]), times), chain


def meeting_tail(kernel, which, times, route="auto"):
    """``P(M > t)`` on ``times`` for ``which`` in ``{"UU'", "VV'"}``."""
    surv, chain = survival_grid(kernel, times, route)
    return surv @ chain.weights(which)


def meeting_tails(kernel, times, route="auto"):
    """Both tails from one semigroup pass: ``(P(M_UU' > t), P(M_VV' > t))``."""
    surv, chain = survival_grid(kernel, times, route)
    return surv @ chain.weights("UU'"), surv @ chain.weights("VV'")


@dataclass
class MUVConsistency:
    times: np.ndarray
    tail_uu: np.ndarray
    tail_vv: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self):
        return float(np.abs(self.residuals).max())


def muv_consistency(kernel, times, route="auto"):
    """Residual of ``P(M_UU' > t) = 1 - pi_diag - 2 nu(1) int_0^t P(M_VV' > s) ds``.

    ``times`` must be a uniform grid starting at 0; the integral is a
    cumulative composite Simpson rule on that grid.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise errors.BadParam("grid must start at 0")
    uu, vv = meeting_tails(kernel, times, route)
    integral = cumulative_simpson(vv, x=times, initial=0.0)
    rhs = 1.0 - kernel.pi_diag - 2.0 * kernel.nu_total * integral
    return MUVConsistency(times=times, tail_uu=uu, tail_vv=vv, residuals=uu - rhs)


def _pair_values(chain, configs, which):
    a = configs[:, chain.pairs[:, 0]].astype(float)
    b = configs[:, chain.pairs[:, 1]].astype(float)
    if which == "p1p0" or which == "p10":
        return a * (1.0 - b)
    if which == "p01":
        return (1.0 - a) * b
    raise errors.BadParam(which)


def dual_pair_expectations(kernel, configs, which, t):
    """``E_xi[p1 p0 (xi_t)]``, ``E_xi[p10(xi_t)]`` or ``E_xi[p01(xi_t)]`` for many ``xi``.

    By duality each equals the expectation of ``xi(X_t) (1 - xi(X'_t))`` (or
    the mirror for ``p01``) over two independent chains started from
    ``pi x pi`` (``p1p0``) or from the pair measure, restricted to the event
    that they have not met by time ``t``.
    """
    configs = np.atleast_2d(np.asarray(configs))
    chain = ProductChain(kernel)
    w = chain.weights("UU'" if which == "p1p0" else "VV'")
    mu_t = SemigroupEvaluator(chain.generator, eps=TAIL_EPS).left(w, t)
    return _pair_values(chain, configs, which) @ mu_t


def dual_pair_expectation(kernel, xi, which, t):
    return float(dual_pair_expectations(kernel, np.asarray(xi)[None, :], which, t)[0])


def all_configurations(n):
    return ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)


def sampled_configurations(n, rng, count=256):
    """``count`` Bernoulli(1/2) configurations followed by the two consensus states."""
    draws = (rng.random((count, n)) < 0.5).astype(np.int8)
    return np.vstack([draws, np.zeros((1, n), np.int8), np.ones((1, n), np.int8)])


@dataclass
class BoundCheck:
    s: float
    t: float
    configs: np.ndarray = field(repr=False)
    lhs_p10: np.ndarray = field(repr=False)
    lhs_p01: np.ndarray = field(repr=False)
    rhs_tv: float
    rhs_gap: float
    margins_tv: np.ndarray = field(repr=False)
    margins_gap: np.ndarray = field(repr=False)

    @property
    def min_margin_tv(self):
        return float(self.margins_tv.min())

    @property
    def min_margin_gap(self):
        return None if self.margins_gap is None else float(self.margins_gap.min())

    @property
    def ok(self):
        good = self.min_margin_tv >= -1e-9
        if self.margins_gap is not None:
            good = good and self.min_margin_gap >= -1e-9
        return bool(good)


def prop61_bound_check(kernel, s, t, configs=None, rng=None):
    """Check the two bounds on ``|E_xi[p10(xi_t)] - P(M_VV' > s) p1 p0|``.

    The general bound is ``P(M_VV' in (s, t]) + 4 P(M_VV' > s) d_E(t - s)``;
    for reversible kernels there is also
    ``P(M_VV' in (s, t]) + 2 pi_max q_max / nu(1) exp(-g (t - s))``.
    Configurations default to all of ``{0,1}^E`` when ``n <= 12`` and to
    256 Bernoulli(1/2) draws plus both consensus states otherwise.
    """
    if not 0 < s < t:
        raise errors.BadParam("need 0 < s < t")
    if configs is None:
        if kernel.n <= 12:
            configs = all_configurations(kernel.n)
        else:
            configs = sampled_configurations(kernel.n, rng if rng is not None else np.random.default_rng(0))
    configs = np.atleast_2d(np.asarray(configs))
    chain = ProductChain(kernel)
    surv_s, surv_t = SemigroupEvaluator(chain.generator, eps=TAIL_EPS).right_grid(
        np.ones(chain.generator.shape[0]), [s, t]
    )
    wv = chain.weights("VV'")
    ps, pt = float(surv_s @ wv), float(surv_t @ wv)
    window = ps - pt
    p1 = configs @ kernel.pi
    base = ps * p1 * (1.0 - p1)
    mu_t = SemigroupEvaluator(chain.generator, eps=TAIL_EPS).left(wv, t)
    lhs10 = np.abs(_pair_values(chain, configs, "p10") @ mu_t - base)
    lhs01 = np.abs(_pair_values(chain, configs, "p01") @ mu_t - base)
    lhs = np.maximum(lhs10, lhs01)
    rhs_tv = window + 4.0 * ps * tv_distance(kernel, t - s)
    margins_gap = rhs_gap = None
    if kernel.reversible:
        g = spectral_gap(kernel)
        rhs_gap = window + 2.0 * kernel.pi_max * kernel.q_max / kernel.nu_total * math.exp(-g * (t - s))
        margins_gap = rhs_gap - lhs
    return BoundCheck(
        s=s,
        t=t,
        configs=configs,
        lhs_p10=lhs10,
        lhs_p01=lhs01,
        rhs_tv=rhs_tv,
        rhs_gap=rhs_gap,
        margins_tv=rhs_tv - lhs,
        margins_gap=margins_gap,
    )
