"""Continuous-time voter model simulation.

At rate ``q(x, y)`` site ``x`` adopts the opinion at ``y``.  Two event
constructions are provided and have the same law:

``plain``
    every ordered pair fires; pairs are drawn from an alias table and
    concordant draws are no-ops that still advance the clock.
``discordant``
    only discordant pairs are kept, in an indexable set, and drawn by
    thinning with the largest single rate.  Much faster when most pairs agree.

Observables are kept incrementally: ``p1`` changes by ``pi(x)`` per flip and
the pair sums by a rescan of the edges into and out of ``x``.  Integrals are
exact since every observable is piecewise constant between events.

Times handed to :func:`run` are in units of ``gamma``: the simulated process is
``s -> xi_{gamma s}``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
import os

import numpy as np
from numba import njit

from . import errors
from ._streams import as_rng, replica_rng

AUDIT_EVERY = 1 << 16
MODES = ("plain", "discordant", "auto")
PARALLEL_ENV = "VOTERWF_PARALLEL"


def default_parallelism():
    try:
        return max(1, int(os.environ.get(PARALLEL_ENV, "1")))
    except ValueError:
        return 1


def alias_table(weights):
    """Vose alias table: ``(prob, alias)`` with ``prob`` the keep-probability per column."""
    w = np.asarray(weights, dtype=float)
    m = len(w)
    scaled = w * m / w.sum()
    prob = np.ones(m)
    alias = np.arange(m, dtype=np.int64)
    small = list(np.nonzero(scaled < 1.0)[0][::-1])
    large = list(np.nonzero(scaled >= 1.0)[0][::-1])
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = scaled[g] + scaled[s] - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    return prob, alias


@dataclass(frozen=True, eq=False)
class EdgeTables:
    """Ordered pairs with positive rate, indexed both by source and by target."""

    src: np.ndarray
    dst: np.ndarray
    q: np.ndarray
    nuw: np.ndarray
    out_ptr: np.ndarray
    in_ptr: np.ndarray
    in_eid: np.ndarray
    alias_prob: np.ndarray
    alias_idx: np.ndarray
    total: float
    rmax: float
    max_degree: int


@lru_cache(maxsize=16)
def edge_tables(kernel):
    r = kernel.rates.tocsr()
    r.sort_indices()
    n = kernel.n
    out_ptr = r.indptr.astype(np.int64)
    dst = r.indices.astype(np.int64)
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(out_ptr))
    q = r.data.astype(float)
    nuw = kernel.pi[src] ** 2 * q
    in_eid = np.argsort(dst, kind="stable").astype(np.int64)
    in_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=in_ptr[1:])
    prob, alias = alias_table(q)
    deg = np.diff(out_ptr) + np.diff(in_ptr)
    return EdgeTables(
        src, dst, q, nuw, out_ptr, in_ptr, in_eid, prob, alias,
        float(q.sum()), float(q.max()), int(deg.max()),
    )


def choose_mode(kernel, mode="auto"):
    if mode not in MODES:
        raise errors.BadParam(f"mode must be one of {MODES}")
    if mode != "auto":
        return mode
    # rescans cost O(degree) per toggle; dense kernels do better with no-ops
    return "discordant" if edge_tables(kernel).max_degree <= 64 else "plain"


@njit(cache=True, nogil=True)
def _direct(xi, pi, src, dst, nuw):
    p1 = 0.0
    for x in range(xi.size):
        if xi[x]:
            p1 += pi[x]
    s10 = 0.0
    s01 = 0.0
    disc = 0
    for e in range(src.size):
        a = xi[src[e]]
        b = xi[dst[e]]
        if a != b:
            disc += 1
            if a == 1:
                s10 += nuw[e]
            else:
                s01 += nuw[e]
    return p1, s10, s01, disc


@njit(cache=True, nogil=True)
def _toggle(e, dset, dpos, count):
    p = dpos[e]
    if p >= 0:
        last = dset[count - 1]
        dset[p] = last
        dpos[last] = p
        dpos[e] = -1
        return count - 1
    dset[count] = e
    dpos[e] = count
    return count + 1


@njit(cache=True, nogil=True)
def _simulate(xi, discordant_mode, t_end, grid, src, dst, q, nuw, out_ptr, in_ptr, in_eid,
              pi, alias_prob, alias_idx, total, rmax, rng, audit_every):
    n_edges = src.size
    p1, s10, s01, disc = _direct(xi, pi, src, dst, nuw)
    dset = np.empty(n_edges if discordant_mode else 1, np.int64)
    dpos = np.full(n_edges if discordant_mode else 1, -1, np.int64)
    count = 0
    if discordant_mode:
        for e in range(n_edges):
            if xi[src[e]] != xi[dst[e]]:
                count = _toggle(e, dset, dpos, count)

    g = grid.size
    rec_p1 = np.empty(g)
    rec_s10 = np.empty(g)
    rec_s01 = np.empty(g)
    rec_ia = np.empty(g)
    rec_ib = np.empty(g)
    t = 0.0
    ia = 0.0  # int p1 p0 dt
    ib = 0.0  # int (s10 + s01) dt
    gi = 0
    events = 0
    flips = 0
    drift = 0.0
    tau = -1.0
    if disc == 0:
        tau = 0.0
        p1 = 1.0 if xi[0] == 1 else 0.0
    while disc > 0:
        rate = total if not discordant_mode else count * rmax
        t_next = t + rng.exponential(1.0 / rate)
        while gi < g and grid[gi] < t_next:
            dt = grid[gi] - t
            ia += dt * p1 * (1.0 - p1)
            ib += dt * (s10 + s01)
            t = grid[gi]
            rec_p1[gi] = p1
            rec_s10[gi] = s10
            rec_s01[gi] = s01
            rec_ia[gi] = ia
            rec_ib[gi] = ib
            gi += 1
        if t_next > t_end:
            dt = t_end - t
            ia += dt * p1 * (1.0 - p1)
            ib += dt * (s10 + s01)
            t = t_end
            break
        dt = t_next - t
        ia += dt * p1 * (1.0 - p1)
        ib += dt * (s10 + s01)
        t = t_next
        events += 1
        if not discordant_mode:
            r = rng.random() * n_edges
            e = int(r)
            if e >= n_edges:
                e = n_edges - 1
            if r - e >= alias_prob[e]:
                e = alias_idx[e]
            if xi[src[e]] == xi[dst[e]]:
                continue
        else:
            k = int(rng.random() * count)
            if k >= count:
                k = count - 1
            e = dset[k]
            if q[e] < rmax and rng.random() * rmax >= q[e]:
                continue
        x = src[e]
        old = xi[x]
        for k in range(out_ptr[x], out_ptr[x + 1]):
            b = xi[dst[k]]
            if old != b:
                if old == 1:
                    s10 -= nuw[k]
                else:
                    s01 -= nuw[k]
                disc -= 1
            else:
                if old == 0:
                    s10 += nuw[k]
                else:
                    s01 += nuw[k]
                disc += 1
            if discordant_mode:
                count = _toggle(k, dset, dpos, count)
        for k in range(in_ptr[x], in_ptr[x + 1]):
            e2 = in_eid[k]
            b = xi[src[e2]]
            if b == 1:
                s10 += -nuw[e2] if b != old else nuw[e2]
            else:
                s01 += -nuw[e2] if b != old else nuw[e2]
            disc += -1 if b != old else 1
            if discordant_mode:
                count = _toggle(e2, dset, dpos, count)
        xi[x] = 1 - old
        p1 += pi[x] if old == 0 else -pi[x]
        flips += 1
        if flips % audit_every == 0:
            d1, d10, d01, dd = _direct(xi, pi, src, dst, nuw)
            drift = max(drift, abs(d1 - p1), abs(d10 - s10), abs(d01 - s01), abs(dd - disc))
            p1, s10, s01, disc = d1, d10, d01, dd
        if disc == 0:
            tau = t
            p1 = 1.0 if xi[0] == 1 else 0.0
            s10 = 0.0
            s01 = 0.0
    while gi < g:
        dt = grid[gi] - t
        if dt > 0:
            ia += dt * p1 * (1.0 - p1)
            ib += dt * (s10 + s01)
            t = grid[gi]
        rec_p1[gi] = p1
        rec_s10[gi] = s10
        rec_s01[gi] = s01
        rec_ia[gi] = ia
        rec_ib[gi] = ib
        gi += 1
    if t < t_end and disc == 0:
        t = t_end
    return rec_p1, rec_s10, rec_s01, rec_ia, rec_ib, ia, ib, tau, events, flips, drift, p1


@dataclass
class VoterState:
    """A configuration with its incrementally maintained observables."""

    opinions: np.ndarray
    p1: float
    pair_sum10: float
    pair_sum01: float
    discordant: int
    clock: float = 0.0
    int_p1p0: float = 0.0
    int_pairs: float = 0.0
    nu_total: float = 1.0

    @property
    def p10(self):
        return self.pair_sum10 / self.nu_total

    @property
    def p01(self):
        return self.pair_sum01 / self.nu_total

    @property
    def absorbed(self):
        return self.discordant == 0

    def audit(self, kernel):
        """Largest gap between the kept observables and a direct recomputation."""
        t = edge_tables(kernel)
        p1, s10, s01, disc = _direct(self.opinions, kernel.pi, t.src, t.dst, t.nuw)
        return max(abs(p1 - self.p1), abs(s10 - self.pair_sum10), abs(s01 - self.pair_sum01),
                   abs(disc - self.discordant))


def state_from_config(kernel, opinions):
    xi = np.ascontiguousarray(opinions, dtype=np.int8)
    if xi.shape != (kernel.n,) or not np.isin(xi, (0, 1)).all():
        raise errors.BadParam("configuration must be a 0/1 vector over the sites")
    t = edge_tables(kernel)
    p1, s10, s01, disc = _direct(xi, kernel.pi, t.src, t.dst, t.nuw)
    return VoterState(xi, p1, s10, s01, disc, nu_total=kernel.nu_total)


def init_bernoulli(kernel, u, rng=None):
    """I.i.d. Bernoulli(``u``) opinions."""
    if not 0.0 <= u <= 1.0:
        raise errors.BadParam("u must lie in [0, 1]")
    rng = as_rng(rng)
    return state_from_config(kernel, (rng.random(kernel.n) < u).astype(np.int8))


@dataclass
class Event:
    time: float
    site: int
    source: int
    flipped: bool


def step(state, kernel, rng=None):
    """Advance by one ordered-pair event of the plain construction."""
    if state.absorbed:
        raise errors.AbsorbedState("consensus reached; no further flips")
    rng = as_rng(rng)
    t = edge_tables(kernel)
    dt = rng.exponential(1.0 / t.total)
    state.int_p1p0 += dt * state.p1 * (1.0 - state.p1)
    state.int_pairs += dt * (state.pair_sum10 + state.pair_sum01)
    state.clock += dt
    r = rng.random() * len(t.src)
    e = min(int(r), len(t.src) - 1)
    if r - e >= t.alias_prob[e]:
        e = int(t.alias_idx[e])
    x, y = int(t.src[e]), int(t.dst[e])
    xi = state.opinions
    if xi[x] == xi[y]:
        return Event(state.clock, x, y, False)
    old = xi[x]
    out = slice(t.out_ptr[x], t.out_ptr[x + 1])
    b = xi[t.dst[out]]
    w = t.nuw[out]
    was = b != old
    if old == 1:
        state.pair_sum10 -= w[was].sum()
        state.pair_sum01 += w[~was].sum()
    else:
        state.pair_sum01 -= w[was].sum()
        state.pair_sum10 += w[~was].sum()
    ins = t.in_eid[t.in_ptr[x]:t.in_ptr[x + 1]]
    b = xi[t.src[ins]]
    w = t.nuw[ins]
    was_in = b != old
    sign = np.where(was_in, -1.0, 1.0)
    state.pair_sum10 += (sign * w)[b == 1].sum()
    state.pair_sum01 += (sign * w)[b == 0].sum()
    state.discordant += int((~was).sum() - was.sum() + (~was_in).sum() - was_in.sum())
    xi[x] = 1 - old
    state.p1 += kernel.pi[x] if old == 0 else -kernel.pi[x]
    if state.discordant == 0:
        state.p1 = float(xi[0])
        state.pair_sum10 = state.pair_sum01 = 0.0
    return Event(state.clock, x, y, True)


@dataclass
class Trajectory:
    """One voter run sampled on a grid of ``s`` values (units of ``gamma``).

    ``int_pairs`` is ``gamma nu(1) int_0^s (p10 + p01)`` and ``int_p1p0`` is
    ``int_0^s p1 p0``, both on the grid; ``tau1`` is the consensus time in
    units of ``gamma`` when the run is absorbed at 1 by the horizon.
    """

    grid: np.ndarray
    p1: np.ndarray
    p10: np.ndarray
    p01: np.ndarray
    int_pairs: np.ndarray
    int_p1p0: np.ndarray
    gamma: float
    horizon: float
    terminal_pairs: float
    terminal_p1p0: float
    consensus: int | None
    tau1: float | None
    events: int
    flips: int
    max_drift: float
    seed: object = field(default=None, repr=False)

    @property
    def p1p0(self):
        return self.p1 * (1.0 - self.p1)


def _grid(grid, horizon):
    g = np.unique(np.asarray(grid, dtype=float))
    if g.size == 0 or g[0] < 0 or g[-1] > horizon:
        raise errors.BadParam("grid must be nonempty within [0, T]")
    return g


def run(kernel, u, horizon, gamma, grid, rng=None, *, mode="auto", initial=None, seed=None):
    """Simulate ``xi_{gamma s}`` for ``s`` in ``[0, horizon]`` from Bernoulli(``u``).

    ``initial`` replaces the Bernoulli draw by an explicit configuration.
    """
    if gamma <= 0 or horizon <= 0:
        raise errors.BadParam("gamma and T must be positive")
    rng = as_rng(rng)
    g = _grid(grid, horizon)
    if initial is None:
        if not 0.0 <= u <= 1.0:
            raise errors.BadParam("u must lie in [0, 1]")
        xi = (rng.random(kernel.n) < u).astype(np.int8)
    else:
        xi = state_from_config(kernel, initial).opinions.copy()
    t = edge_tables(kernel)
    disc_mode = choose_mode(kernel, mode) == "discordant"
    p1, s10, s01, ia, ib, tia, tib, tau, events, flips, drift, _ = _simulate(
        xi, disc_mode, horizon * gamma, g * gamma, t.src, t.dst, t.q, t.nuw, t.out_ptr,
        t.in_ptr, t.in_eid, kernel.pi, t.alias_prob, t.alias_idx, t.total, t.rmax, rng,
        AUDIT_EVERY,
    )
    consensus = None
    tau1 = None
    if tau >= 0:
        consensus = int(xi[0])
        if consensus == 1:
            tau1 = tau / gamma
    nu1 = kernel.nu_total
    return Trajectory(
        grid=g,
        p1=np.clip(p1, 0.0, 1.0),
        p10=np.clip(s10 / nu1, 0.0, 1.0),
        p01=np.clip(s01 / nu1, 0.0, 1.0),
        int_pairs=ib,
        int_p1p0=ia / gamma,
        gamma=float(gamma),
        horizon=float(horizon),
        terminal_pairs=float(tib),
        terminal_p1p0=float(tia / gamma),
        consensus=consensus,
        tau1=tau1,
        events=int(events),
        flips=int(flips),
        max_drift=float(drift),
        seed=seed,
    )


def mean_field_residual(traj):
    """``R(T) = gamma nu(1) int_0^T (p10 + p01) ds - int_0^T p1 p0 ds``."""
    return traj.terminal_pairs - traj.terminal_p1p0


def _mean_var(a):
    a = np.asarray(a, dtype=float)
    m = a.mean(axis=0)
    v = a.var(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros_like(m)
    return m, v


@dataclass
class EnsembleSummary:
    """Per-grid means and variances over replicas, plus the per-replica scalars."""

    grid: np.ndarray
    replicas: int
    gamma: float
    mean_p1: np.ndarray
    var_p1: np.ndarray
    mean_p1p0: np.ndarray
    var_p1p0: np.ndarray
    mean_int_pairs: np.ndarray
    var_int_pairs: np.ndarray
    residuals: np.ndarray
    tau1: np.ndarray
    absorbed_one: int
    absorbed_zero: int
    max_drift: float
    p1: np.ndarray = field(repr=False)

    def se(self, name):
        return np.sqrt(getattr(self, "var_" + name) / self.replicas)

    def tau1_ecdf(self):
        from .stats import Ecdf
        return Ecdf(self.tau1)


def ensemble(kernel, u, gamma, horizon, replicas, master_seed, grid=None, *,
             parallelism=None, mode="auto", stream="voter"):
    """Independent runs on per-replica streams; the result does not depend on ``parallelism``."""
    if replicas < 1:
        raise errors.BadParam("replicas must be >= 1")
    grid = _grid(np.linspace(0, horizon, 11) if grid is None else grid, horizon)
    parallelism = default_parallelism() if parallelism is None else max(1, int(parallelism))
    edge_tables(kernel)
    choose_mode(kernel, mode)

    def one(i):
        return run(kernel, u, horizon, gamma, grid, replica_rng(master_seed, i, stream),
                   mode=mode, seed=(master_seed, stream, i))

    if parallelism == 1:
        trajs = [one(i) for i in range(replicas)]
    else:
        with ThreadPoolExecutor(parallelism) as pool:
            trajs = list(pool.map(one, range(replicas)))
    p1 = np.array([t.p1 for t in trajs])
    pp = p1 * (1.0 - p1)
    ip = np.array([t.int_pairs for t in trajs])
    mp1, vp1 = _mean_var(p1)
    mpp, vpp = _mean_var(pp)
    mip, vip = _mean_var(ip)
    return EnsembleSummary(
        grid=grid,
        replicas=replicas,
        gamma=float(gamma),
        mean_p1=mp1,
        var_p1=vp1,
        mean_p1p0=mpp,
        var_p1p0=vpp,
        mean_int_pairs=mip,
        var_int_pairs=vip,
        residuals=np.array([mean_field_residual(t) for t in trajs]),
        tau1=np.array([t.tau1 for t in trajs if t.tau1 is not None]),
        absorbed_one=sum(t.consensus == 1 for t in trajs),
        absorbed_zero=sum(t.consensus == 0 for t in trajs),
        max_drift=max(t.max_drift for t in trajs),
        p1=p1,
    )
