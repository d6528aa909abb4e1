"""Irreducible Q-matrices, their stationary law and the pair measure.

A :class:`Kernel` stores the off-diagonal rates ``q(x, y)`` of a continuous
time Markov chain on the sites ``0..n-1`` as a CSR matrix.  The diagonal is
implied, ``q(x, x) = -q(x)``.  Everything derived from the rates that the
rest of the package needs (stationary distribution, ``pi_diag``, the total
mass ``nu_total`` of ``nu(x, y) = pi(x)**2 q(x, y)``) is computed once at
construction time; kernels are immutable afterwards.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from . import errors

DENSE_CAP = 4096
BALANCE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Kernel:
    """An irreducible rate matrix with its stationary distribution.

    Attributes
    ----------
    n : int
        Number of sites.
    rates : scipy.sparse.csr_matrix
        Off-diagonal rates, zero diagonal, explicit zeros removed.
    total_rate : ndarray
        ``q(x)``, the row sums of ``rates``.
    pi : ndarray
        Stationary distribution.
    group : tuple of int or None
        Moduli of an abelian group ``Z_m1 x ... x Z_mk`` whose row-major
        encoding the generator used for the sites.  Only a hint; translation
        invariance is re-checked wherever it is exploited.
    """

    n: int
    rates: sp.csr_matrix
    total_rate: np.ndarray
    pi: np.ndarray
    pi_diag: float
    pi_max: float
    q_max: float
    nu_total: float
    reversible: bool
    group: tuple = None
    info: dict = field(default_factory=dict)

    def generator(self):
        """Sparse generator with the diagonal filled in."""
        return (self.rates - sp.diags(self.total_rate)).tocsr()

    def dense_generator(self):
        return self.generator().toarray()

    def entries(self):
        """Iterate ``(x, y, rate)`` over the nonzero off-diagonal rates."""
        coo = self.rates.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            yield int(coo.row[i]), int(coo.col[i]), float(coo.data[i])

    @cached_property
    def flow(self):
        """``pi(x) q(x, y)`` as a CSR matrix."""
        return sp.diags(self.pi) @ self.rates

    @cached_property
    def nu(self):
        """``nu(x, y) = pi(x)**2 q(x, y)`` as a CSR matrix."""
        return (sp.diags(self.pi ** 2) @ self.rates).tocsr()

    @cached_property
    def balance_residual(self):
        return float(np.abs(self.pi @ self.generator()).max())

    @cached_property
    def detailed_balance_residual(self):
        f = self.flow
        diff = f - f.T
        return float(abs(diff).max()) if diff.nnz else 0.0

    @cached_property
    def _pi_cdf(self):
        c = np.cumsum(self.pi)
        c[-1] = 1.0
        return c

    @cached_property
    def _pair_table(self):
        nu = self.nu.tocoo()
        c = np.cumsum(nu.data)
        c /= c[-1]
        return nu.row.astype(np.int64), nu.col.astype(np.int64), c

    def __repr__(self):
        name = self.info.get("family", "kernel")
        return f"<Kernel {name} n={self.n} reversible={self.reversible}>"


@dataclass(frozen=True)
class PairMeasure:
    """Law of ``(V, V')``: ``nu(a, b) / nu(1)`` over ordered pairs ``a != b``."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    normalizer: float

    def as_dense(self, n):
        out = np.zeros((n, n))
        np.add.at(out, (self.rows, self.cols), self.weights)
        return out


def _check_irreducible(rates):
    n = rates.shape[0]
    if n == 1:
        return
    support = rates.copy()
    support.data = np.ones_like(support.data)
    fwd = breadth_first_order(support, 0, directed=True, return_predecessors=False)
    bwd = breadth_first_order(support.T.tocsr(), 0, directed=True, return_predecessors=False)
    if len(fwd) != n or len(bwd) != n:
        raise errors.NotIrreducible(
            f"rate support is not strongly connected ({len(fwd)} reachable, {len(bwd)} co-reachable of {n})"
        )


def stationary_distribution(rates, *, tol=1e-12, max_iter=200_000):
    """Unique ``pi`` with ``pi q = 0`` and ``sum(pi) = 1``.

    Up to ``DENSE_CAP`` sites one balance equation is replaced by the
    normalisation row and the system is solved directly.  Larger chains use
    power iteration on the uniformized transition matrix.
    """
    rates = sp.csr_matrix(rates)
    n = rates.shape[0]
    total = np.asarray(rates.sum(axis=1)).ravel()
    if n == 1:
        return np.ones(1)
    if n <= DENSE_CAP:
        a = rates.toarray().T
        a[np.diag_indices(n)] -= total
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = scipy.linalg.solve(a, b)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise errors.SingularSystem(str(exc)) from exc
        if not np.all(np.isfinite(pi)):
            raise errors.SingularSystem("non-finite stationary solution")
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()
    lam = total.max()
    pt = (sp.identity(n, format="csr") + (rates - sp.diags(total)) / lam).T.tocsr()
    q = (rates - sp.diags(total)).T.tocsr()
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        if np.abs(q @ pi).max() <= tol:
            return pi / pi.sum()
        pi = pt @ pi
        pi /= pi.sum()
    raise errors.SingularSystem("power iteration for pi did not reach tolerance")


def _finish(rates, group=None, info=None):
    rates = sp.csr_matrix(rates, dtype=float)
    rates.setdiag(0.0)
    rates.eliminate_zeros()
    rates.sort_indices()
    n = rates.shape[0]
    _check_irreducible(rates)
    total = np.asarray(rates.sum(axis=1)).ravel()
    pi = stationary_distribution(rates)
    if np.any(pi <= 0):
        raise errors.SingularSystem("stationary distribution has non-positive entries")
    nu_total = float((pi ** 2 * total).sum())
    flow = sp.diags(pi) @ rates
    diff = flow - flow.T
    db = float(abs(diff).max()) if diff.nnz else 0.0
    return Kernel(
        n=n,
        rates=rates,
        total_rate=total,
        pi=pi,
        pi_diag=float((pi ** 2).sum()),
        pi_max=float(pi.max()),
        q_max=float(total.max()),
        nu_total=nu_total,
        reversible=db <= BALANCE_TOL,
        group=tuple(group) if group is not None else None,
        info=dict(info or {}),
    )


def build_from_rates(n, entries, *, group=None, info=None):
    """Kernel from ``(x, y, rate)`` triples; repeated pairs add up."""
    n = int(n)
    if n < 1:
        raise errors.BadIndex("n must be positive")
    arr = np.asarray(list(entries), dtype=float).reshape(-1, 3)
    xs = arr[:, 0].astype(np.int64)
    ys = arr[:, 1].astype(np.int64)
    r = arr[:, 2]
    if np.any(xs != arr[:, 0]) or np.any(ys != arr[:, 1]):
        raise errors.BadIndex("site indices must be integers")
    if np.any((xs < 0) | (xs >= n) | (ys < 0) | (ys >= n)):
        raise errors.BadIndex("site index out of range")
    if np.any(xs == ys):
        raise errors.BadIndex("diagonal entries are implied; pass x != y only")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise errors.NegativeRate("rates must be finite and nonnegative")
    rates = sp.coo_matrix((r, (xs, ys)), shape=(n, n)).tocsr()
    if n > 1 and rates.nnz == 0:
        raise errors.NotIrreducible("no positive rates")
    return _finish(rates, group=group, info=info)


def build_from_adjacency(adjacency, *, group=None, info=None):
    """Random-walk kernel ``q(x, y) = A(x, y) / A(x)`` of a multigraph.

    ``A(x, x) = 1`` is a half-loop and ``A(x, x) = 2`` a whole loop; loops
    count towards the degree ``A(x)`` but carry no off-diagonal rate, so
    ``q(x) = 1 - A(x, x) / A(x)``.
    """
    a = adjacency
    if sp.issparse(a):
        a = a.tocsr()
        if (a != a.T).nnz:
            raise errors.AsymmetricAdjacency("adjacency matrix must be symmetric")
        data = a.data
        diag = a.diagonal()
    else:
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise errors.AsymmetricAdjacency("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise errors.AsymmetricAdjacency("adjacency matrix must be symmetric")
        data = a
        diag = np.diag(a)
    if np.any(data < 0) or np.any(np.asarray(data) != np.round(data)):
        raise errors.NegativeRate("adjacency entries must be nonnegative integers")
    if np.any((diag < 0) | (diag > 2)):
        raise errors.BadIndex("diagonal adjacency entries must lie in {0, 1, 2}")
    a = sp.csr_matrix(a, dtype=float)
    deg = np.asarray(a.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        raise errors.ZeroDegree("every vertex needs positive degree")
    rates = sp.diags(1.0 / deg) @ a
    rates = sp.csr_matrix(rates)
    rates.setdiag(0.0)
    rates.eliminate_zeros()
    try:
        k = _finish(rates, group=group, info=info)
    except errors.NotIrreducible as exc:
        raise errors.Disconnected(str(exc)) from exc
    # pi(x) = A(x) / sum A is exact for graph walks; use it instead of the solve
    pi = deg / deg.sum()
    object.__setattr__(k, "pi", pi)
    object.__setattr__(k, "pi_diag", float((pi ** 2).sum()))
    object.__setattr__(k, "pi_max", float(pi.max()))
    object.__setattr__(k, "nu_total", float((pi ** 2 * k.total_rate).sum()))
    object.__setattr__(k, "reversible", True)
    return k


def pair_measure(kernel):
    nu = kernel.nu.tocoo()
    norm = float(nu.data.sum())
    return PairMeasure(
        rows=nu.row.astype(np.int64),
        cols=nu.col.astype(np.int64),
        weights=nu.data / norm,
        normalizer=norm,
    )


def sample_pair(kernel, which, rng, size=None):
    """Draw ``(U, U')`` from ``pi x pi`` or ``(V, V')`` from the pair measure.

    Returns a pair of ints, or two int arrays when ``size`` is given.
    """
    m = 1 if size is None else int(size)
    if which in ("UU'", "UU", "uu"):
        c = kernel._pi_cdf
        a = np.searchsorted(c, rng.random(m), side="right")
        b = np.searchsorted(c, rng.random(m), side="right")
        a = np.minimum(a, kernel.n - 1)
        b = np.minimum(b, kernel.n - 1)
    elif which in ("VV'", "VV", "vv"):
        rows, cols, c = kernel._pair_table
        i = np.minimum(np.searchsorted(c, rng.random(m), side="right"), len(c) - 1)
        a, b = rows[i], cols[i]
    else:
        raise errors.BadParam(f"unknown pair law {which!r}")
    if size is None:
        return int(a[0]), int(b[0])
    return a, b


def is_translation_invariant(kernel, group=None, atol=1e-15):
    """Check ``q(x, y) == q(0, y - x)`` in the group coordinates."""
    group = group or kernel.group
    if not group or math.prod(group) != kernel.n:
        return False
    shape = tuple(group)
    coo = kernel.rates.tocoo()
    diff = _group_sub(coo.col, coo.row, shape)
    row0 = np.zeros(kernel.n)
    r0 = kernel.rates.getrow(0).tocoo()
    row0[r0.col] = r0.data
    return bool(np.all(np.abs(coo.data - row0[diff]) <= atol)) and coo.nnz == kernel.n * r0.nnz


def _group_sub(a, b, shape):
    """Row-major index of ``a - b`` in ``Z_shape``."""
    ca = np.unravel_index(np.asarray(a), shape)
    cb = np.unravel_index(np.asarray(b), shape)
    d = tuple((x - y) % m for x, y, m in zip(ca, cb, shape))
    return np.ravel_multi_index(d, shape)


def _group_neg(a, shape):
    ca = np.unravel_index(np.asarray(a), shape)
    return np.ravel_multi_index(tuple((-x) % m for x, m in zip(ca, shape)), shape)


def save_kernel(kernel, path):
    """Write the text format: ``n`` then ``x y rate`` lines, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(f"# voter kernel, {kernel.info.get('family', 'custom')}\n")
        if kernel.group:
            fh.write("# group: " + " ".join(str(m) for m in kernel.group) + "\n")
        fh.write(f"{kernel.n}\n")
        for x, y, r in kernel.entries():
            fh.write(f"{x} {y} {r:.17g}\n")


def load_kernel(path):
    group = None
    n = None
    entries = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("group:"):
                    group = tuple(int(v) for v in body[len("group:"):].split())
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if n is None:
                n = int(line)
                continue
            x, y, r = line.split()
            entries.append((int(x), int(y), float(r)))
    if n is None:
        raise errors.KernelError(f"{path}: missing site count")
    return build_from_rates(n, entries, group=group, info={"source": str(path)})
