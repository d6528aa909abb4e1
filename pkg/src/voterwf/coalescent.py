"""Coalescing random walks driven by a kernel.

Lineages move independently, each jumping from ``x`` at rate ``q(x)``; a
lineage landing on an occupied site merges into the block already there.
A single clock at rate ``(active lineages) * q_max`` proposes a uniformly
chosen lineage, accepted with probability ``q(x) / q_max``, so the event
construction is exact without per-lineage timers.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.cluster.hierarchy import DisjointSet

from . import errors
from ._streams import as_rng, replica_rng
from .voter import default_parallelism

KMAX_INFINITE = 2000


def _row_cdfs(kernel):
    r = kernel.rates.tocsr()
    r.sort_indices()
    cdf = np.empty(r.data.size)
    for x in range(kernel.n):
        a, b = r.indptr[x], r.indptr[x + 1]
        c = np.cumsum(r.data[a:b])
        cdf[a:b] = c / c[-1]
    return r.indptr.astype(np.int64), r.indices.astype(np.int64), cdf


@njit(cache=True, nogil=True)
def _coalesce(pos, stop_at, ptr, idx, cdf, rate, qmax, rng, log_src, log_dst):
    """Run until ``stop_at`` blocks remain; ``pos`` holds one lineage per block.

    Returns ``times[j]`` (first time with ``j`` blocks) and the number of
    logged merges; ``log_src[i]`` merged into ``log_dst[i]``.
    """
    n_sites = ptr.size - 1
    k = pos.size
    occ = np.full(n_sites, -1, np.int64)
    times = np.full(k + 1, np.nan)
    label = np.arange(k)
    active = np.empty(k, np.int64)
    m = 0
    nlog = 0
    for i in range(k):
        x = pos[i]
        if occ[x] >= 0:
            log_src[nlog] = i
            log_dst[nlog] = occ[x]
            nlog += 1
        else:
            occ[x] = i
            active[m] = i
            m += 1
    times[k] = 0.0
    for j in range(m, k):
        times[j] = 0.0
    t = 0.0
    while m > stop_at:
        t += rng.exponential(1.0 / (m * qmax))
        a = int(rng.random() * m)
        if a >= m:
            a = m - 1
        lin = active[a]
        x = pos[lin]
        if rate[x] < qmax and rng.random() * qmax >= rate[x]:
            continue
        u = rng.random()
        lo = ptr[x]
        hi = ptr[x + 1] - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cdf[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        y = idx[lo]
        occ[x] = -1
        if occ[y] >= 0:
            log_src[nlog] = lin
            log_dst[nlog] = occ[y]
            nlog += 1
            active[a] = active[m - 1]
            m -= 1
            times[m] = t
        else:
            occ[y] = lin
            pos[lin] = y
    return times, nlog


class _Prepared:
    def __init__(self, kernel):
        self.kernel = kernel
        self.ptr, self.idx, self.cdf = _row_cdfs(kernel)
        self.rate = kernel.total_rate.astype(float)
        self.qmax = float(kernel.q_max)

    def go(self, start, stop_at, rng):
        k = len(start)
        log_src = np.empty(k, np.int64)
        log_dst = np.empty(k, np.int64)
        times, nlog = _coalesce(np.array(start, dtype=np.int64), stop_at, self.ptr, self.idx,
                                self.cdf, self.rate, self.qmax, rng, log_src, log_dst)
        return times, log_src[:nlog], log_dst[:nlog]


@dataclass
class CoalescenceRecord:
    """``times[j]`` is the first time the system has ``j`` blocks (NaN below ``stop_at``)."""

    times: np.ndarray
    start: np.ndarray
    merges: list = field(repr=False)

    def partition(self):
        """Blocks of initial lineage labels at the stopping time."""
        ds = DisjointSet(range(len(self.start)))
        for a, b in self.merges:
            ds.merge(a, b)
        return sorted(sorted(s) for s in ds.subsets())


def _check_stop(k, stop_at):
    if not 1 <= stop_at <= k:
        raise errors.BadParam("need 1 <= j <= k")


def run_partial(kernel, k, rng=None, stop_at=1, *, start=None):
    """Coalescence times ``C_{k,k}, ..., C_{k,j}`` from ``k`` lineages started i.i.d. ``pi``.

    Lineages that start on the same site merge at time 0.
    """
    k = int(k)
    if not 1 <= k <= kernel.n:
        raise errors.BadParam("need 1 <= k <= n")
    _check_stop(k, stop_at)
    rng = as_rng(rng)
    if start is None:
        start = np.searchsorted(kernel._pi_cdf, rng.random(k), side="right")
        start = np.minimum(start, kernel.n - 1)
    times, a, b = _Prepared(kernel).go(start, stop_at, rng)
    return CoalescenceRecord(times, np.asarray(start), list(zip(a.tolist(), b.tolist())))


def run_full(kernel, rng=None, stop_at=1):
    """Full-system times ``C^_{n-1}, ..., C^_j`` with one lineage per site."""
    n = kernel.n
    if not 1 <= stop_at < n:
        raise errors.BadParam("need 1 <= j < n")
    rng = as_rng(rng)
    times, a, b = _Prepared(kernel).go(np.arange(n), stop_at, rng)
    return CoalescenceRecord(times, np.arange(n), list(zip(a.tolist(), b.tolist())))


def _replicate(fn, replicas, master_seed, parallelism, stream):
    parallelism = default_parallelism() if parallelism is None else max(1, int(parallelism))

    def one(i):
        return fn(replica_rng(master_seed, i, stream))

    if parallelism == 1:
        return [one(i) for i in range(replicas)]
    with ThreadPoolExecutor(parallelism) as pool:
        return list(pool.map(one, range(replicas)))


def partial_ensemble(kernel, k, replicas, master_seed, stop_at=1, *, parallelism=None,
                     stream="coalescent-partial"):
    """``(replicas, k + 1)`` array of coalescence times, row ``i`` from stream ``i``."""
    prep = _Prepared(kernel)
    _check_stop(k, stop_at)

    def fn(rng):
        start = np.searchsorted(kernel._pi_cdf, rng.random(k), side="right")
        return prep.go(np.minimum(start, kernel.n - 1), stop_at, rng)[0]

    return np.array(_replicate(fn, replicas, master_seed, parallelism, stream))


def full_ensemble(kernel, replicas, master_seed, stop_at=1, *, parallelism=None,
                  stream="coalescent-full"):
    prep = _Prepared(kernel)
    if not 1 <= stop_at < kernel.n:
        raise errors.BadParam("need 1 <= j < n")
    start = np.arange(kernel.n)
    return np.array(_replicate(lambda rng: prep.go(start, stop_at, rng)[0],
                               replicas, master_seed, parallelism, stream))


def kingman_means(k, j):
    i = np.arange(j + 1, k + 1, dtype=float)
    return 2.0 / (i * (i - 1.0))


def kingman_sampler(k, j, rng=None, size=None):
    """Samples of ``Z_{j+1} + ... + Z_k`` with ``Z_i`` exponential of mean ``1/C(i, 2)``.

    ``k=None`` or ``k=inf`` is the whole tree, truncated at ``KMAX_INFINITE``
    lineages; the dropped tail has mean ``2/KMAX_INFINITE``.
    """
    if k is None or k == np.inf:
        k = KMAX_INFINITE
    k, j = int(k), int(j)
    if not 1 <= j < k:
        raise errors.BadParam("need 1 <= j < k")
    rng = as_rng(rng)
    means = kingman_means(k, j)
    shape = (1 if size is None else int(size), len(means))
    out = (rng.standard_exponential(shape) * means).sum(axis=1)
    return float(out[0]) if size is None else out
