"""Spectral gap, total-variation mixing, bottleneck ratios and condition reports."""
from dataclasses import dataclass, asdict
import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import errors
from .kernel import DENSE_CAP, is_translation_invariant
from .semigroup import EPS_TRUNC, SemigroupEvaluator

TMIX_THRESHOLD = 1.0 / (2.0 * math.e)
EXHAUSTIVE_CAP = 22


def _symmetrized(kernel):
    if not kernel.reversible:
        raise errors.NotReversible("spectral gap is only defined here for reversible kernels")
    s = np.sqrt(kernel.pi)
    q = kernel.generator()
    m = sp.diags(s) @ (-q) @ sp.diags(1.0 / s)
    return ((m + m.T) / 2).tocsr(), s


def spectral_gap(kernel, *, tol=1e-9):
    """Second smallest eigenvalue of ``-q`` for a reversible kernel.

    Uses the symmetric matrix ``D^{1/2} (-q) D^{-1/2}`` with ``D = diag(pi)``:
    a full symmetric eigensolve up to ``DENSE_CAP`` sites, otherwise Lanczos
    on the matrix with the known null vector ``sqrt(pi)`` deflated away.
    """
    m, s = _symmetrized(kernel)
    n = kernel.n
    if n == 1:
        raise errors.BadParam("a single site has no gap")
    if n <= DENSE_CAP:
        vals = scipy.linalg.eigh(m.toarray(), eigvals_only=True, subset_by_index=[0, 1])
        return float(vals[1])
    v = s / np.linalg.norm(s)
    shift = 2.0 * kernel.q_max + 1.0

    def mv(x):
        return m @ x + shift * v * (v @ x)

    op = spla.LinearOperator((n, n), matvec=mv, dtype=float)
    try:
        vals = spla.eigsh(op, k=1, which="SA", tol=tol * 1e-3, maxiter=50 * n, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise errors.ConvergenceFailure(str(exc)) from exc
    return float(vals[0])


def _row_sources(kernel):
    """Rows of ``exp(tq)`` that determine ``d_E``; one suffices under translation invariance."""
    if is_translation_invariant(kernel):
        return np.array([0])
    return np.arange(kernel.n)


class TVEvaluator:
    """Reusable ``d_E(t)`` evaluation for one kernel."""

    def __init__(self, kernel, eps=EPS_TRUNC, chunk=256):
        if kernel.n > DENSE_CAP:
            raise errors.TooLarge(f"dense rows capped at {DENSE_CAP} sites")
        self.kernel = kernel
        self.sg = SemigroupEvaluator(kernel.generator(), eps=eps)
        self.sources = _row_sources(kernel)
        self.chunk = chunk

    def __call__(self, t):
        pi = self.kernel.pi
        worst = 0.0
        for start in range(0, len(self.sources), self.chunk):
            src = self.sources[start:start + self.chunk]
            block = np.zeros((self.kernel.n, len(src)))
            block[src, np.arange(len(src))] = 1.0
            rows = self.sg.left(block, t)
            tv = 0.5 * np.abs(rows - pi[:, None]).sum(axis=0)
            worst = max(worst, float(tv.max()))
        return worst


def tv_distance(kernel, t):
    """``d_E(t) = max_x || q_t(x, .) - pi ||_TV``."""
    if t < 0:
        raise errors.BadParam("t must be nonnegative")
    return TVEvaluator(kernel)(t)


def mixing_time(kernel, *, threshold=TMIX_THRESHOLD, rtol=1e-6):
    """``inf{t : d_E(t) <= 1/(2e)}`` by doubling then bisection."""
    d = TVEvaluator(kernel)
    if d(0.0) <= threshold:
        return 0.0
    hi = 1.0 / kernel.q_max
    lo = 0.0
    while d(hi) > threshold:
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            raise errors.ConvergenceFailure("mixing time bracket diverged")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if d(mid) > threshold:
            lo = mid
        else:
            hi = mid
    return hi


def _as_mask(kernel, sites):
    sites = np.asarray(sites)
    if sites.dtype == bool:
        mask = sites.copy()
    else:
        mask = np.zeros(kernel.n, dtype=bool)
        mask[sites.astype(np.int64)] = True
    return mask


def bottleneck_ratio(kernel, sites):
    """``Phi(S) = sum_{x in S, y not in S} pi(x) q(x, y) / pi(S)``."""
    mask = _as_mask(kernel, sites)
    if not mask.any():
        raise errors.EmptySet("S must be nonempty")
    if mask.all():
        raise errors.FullSet("S must be a proper subset")
    flow = kernel.flow.tocoo()
    out = flow.data[mask[flow.row] & ~mask[flow.col]].sum()
    return float(out / kernel.pi[mask].sum())


def _exhaustive(kernel, chunk=1 << 16):
    n = kernel.n
    if n > EXHAUSTIVE_CAP:
        raise errors.TooLargeForExhaustive(f"exhaustive search capped at {EXHAUSTIVE_CAP} sites")
    pi = kernel.pi
    f = kernel.flow.toarray()
    out_rate = f.sum(axis=1)
    bits = (1 << np.arange(n)).astype(np.int64)
    best, best_mask = np.inf, 0
    total = 1 << n
    for start in range(1, total - 1, chunk):
        masks = np.arange(start, min(start + chunk, total - 1), dtype=np.int64)
        b = ((masks[:, None] & bits[None, :]) != 0).astype(float)
        mass = b @ pi
        keep = mass <= 0.5 + 1e-12
        if not keep.any():
            continue
        b = b[keep]
        boundary = b @ out_rate - np.einsum("ij,ij->i", b @ f, b)
        phi = boundary / mass[keep]
        i = int(np.argmin(phi))
        if phi[i] < best - 1e-15:
            best, best_mask = float(phi[i]), int(masks[keep][i])
    witness = tuple(int(x) for x in range(n) if best_mask >> x & 1)
    return best, witness


def _intervals(kernel):
    if not (kernel.group and len(kernel.group) == 1 and is_translation_invariant(kernel)):
        raise errors.StrategyMismatch("intervals_1d needs a 1-d translation-invariant kernel")
    n = kernel.n
    best, best_k = np.inf, 1
    for k in range(1, n // 2 + 1):
        phi = bottleneck_ratio(kernel, np.arange(k))
        if phi < best - 1e-15:
            best, best_k = phi, k
    return best, tuple(range(best_k))


def bottleneck_optimum(kernel, strategy="exhaustive"):
    """Minimal ``Phi(S)`` over ``pi(S) <= 1/2`` and a minimizing set.

    ``exhaustive`` scans every subset (``n <= 22``); ``intervals_1d`` scans
    the intervals ``{0, ..., k-1}``, ``k <= n/2``, which is exact for 1-d
    translation-invariant kernels with jumps uniform over a symmetric window.
    """
    if strategy == "exhaustive":
        return _exhaustive(kernel)
    if strategy == "intervals_1d":
        return _intervals(kernel)
    raise errors.StrategyMismatch(f"unknown strategy {strategy!r}")


def auto_bottleneck_strategy(kernel):
    if kernel.n <= EXHAUSTIVE_CAP:
        return "exhaustive"
    if kernel.group and len(kernel.group) == 1 and is_translation_invariant(kernel):
        return "intervals_1d"
    raise errors.TooLargeForExhaustive("no applicable bottleneck strategy")


def cheeger_check(kernel, strategy=None):
    """Return ``(g, Phi_*, g >= Phi_*^2 / 2)``."""
    g = spectral_gap(kernel)
    phi, _ = bottleneck_optimum(kernel, strategy or auto_bottleneck_strategy(kernel))
    return g, phi, bool(g >= phi * phi / 2 - 1e-9)


@dataclass
class ConditionReport:
    pi_diag: float
    pi_max: float
    q_max: float
    gap: float
    t_mix: float
    t_meet: float
    ratio_mix: float
    gap_times_meet: float
    logterm: float
    condition_i: float
    condition_ii: float

    def to_dict(self):
        return asdict(self)


def condition_report(kernel, t_meet, *, t_mix=None, gap=None):
    """Single-instance scalars behind the two sufficient mixing conditions.

    ``condition_i`` is ``t_mix / t_meet``; ``condition_ii`` is
    ``log(e v t_meet pi_max q_max) / (g t_meet)`` and, like ``gap`` and
    ``gap_times_meet``, is ``None`` for non-reversible kernels.  Whether a
    family satisfies a condition is a statement about the trend of these
    numbers along a size ladder, not about any single value.
    """
    if t_mix is None:
        t_mix = mixing_time(kernel)
    if kernel.reversible:
        if gap is None:
            gap = spectral_gap(kernel)
        logterm = math.log(max(math.e, t_meet * kernel.pi_max * kernel.q_max)) / (gap * t_meet)
        gtm = gap * t_meet
    else:
        gap = logterm = gtm = None
    ratio = t_mix / t_meet
    return ConditionReport(
        pi_diag=kernel.pi_diag,
        pi_max=kernel.pi_max,
        q_max=kernel.q_max,
        gap=gap,
        t_mix=t_mix,
        t_meet=t_meet,
        ratio_mix=ratio,
        gap_times_meet=gtm,
        logterm=logterm,
        condition_i=ratio,
        condition_ii=logterm,
    )
