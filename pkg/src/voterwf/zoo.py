"""Kernel families: mean-field, discrete tori, hypercubes, random regular graphs.

Site encodings
--------------
* tori ``(Z_n)^d``: row-major mixed radix, ``x = sum_i c_i n**(d-1-i)``;
* hypercube ``{0,1}^n_dim``: the bit string read as a binary integer, so
  neighbours differ by one XOR bit;
* the mean-field (Moran) kernel is labelled as ``Z_n`` so the difference-walk
  reduction in :mod:`voterwf.meeting` applies to it as well.
"""
from dataclasses import dataclass, field
import itertools

import numpy as np
import scipy.sparse as sp

from . import errors
from .kernel import build_from_adjacency, _finish

SIZE_CAP = 2 ** 20
MORAN_CAP = 4096
MAX_ATTEMPTS = 32

FAMILIES = ("moran", "torus_nn", "torus_range", "hypercube", "random_regular_perm")


@dataclass(frozen=True)
class ZooSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise errors.BadParam(f"unknown family {self.family!r}")
        seed = self.params.get("seed")
        if seed is not None and not 0 <= int(seed) < 2 ** 64:
            raise errors.BadParam("seed must be a 64-bit unsigned integer")

    def build(self):
        return build(self)

    def label(self):
        inner = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.family}({inner})"


def build(spec):
    p = dict(spec.params)
    if spec.family == "moran":
        return moran(p["n"])
    if spec.family == "torus_nn":
        return torus_nn(p["n"], p.get("d", 1))
    if spec.family == "torus_range":
        return torus_range(p["n"], p["m"], p.get("d", 1))
    if spec.family == "hypercube":
        return hypercube(p.get("n_dim", p.get("n")))
    if spec.family == "random_regular_perm":
        return random_regular_perm(p["n"], p["k"], p.get("seed", 0))
    raise errors.BadParam(spec.family)


def moran(n):
    """Mean-field kernel: ``q(x, .)`` uniform on the other ``n - 1`` sites."""
    n = int(n)
    if n < 2:
        raise errors.BadParam("moran needs n >= 2")
    if n > MORAN_CAP:
        raise errors.TooLarge(f"moran kernel has n**2 entries; n <= {MORAN_CAP}")
    rates = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(rates, 0.0)
    return _finish(sp.csr_matrix(rates), group=(n,), info={"family": "moran", "n": n})


def _offset_kernel(n, d, offsets, info):
    """Translation-invariant kernel on ``(Z_n)^d`` with uniform rate over ``offsets``."""
    size = n ** d
    if size > SIZE_CAP:
        raise errors.TooLarge(f"{n}^{d} sites exceeds the cap {SIZE_CAP}")
    shape = (n,) * d
    coords = np.indices(shape).reshape(d, -1)
    rate = 1.0 / len(offsets)
    rows, cols = [], []
    for off in offsets:
        tgt = tuple((coords[i] + off[i]) % n for i in range(d))
        rows.append(np.arange(size))
        cols.append(np.ravel_multi_index(tgt, shape))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    rates = sp.csr_matrix((np.full(len(rows), rate), (rows, cols)), shape=(size, size))
    return _finish(rates, group=shape, info=info)


def torus_nn(n, d=1):
    """Nearest-neighbour walk on ``(Z_n)^d``, rate ``1/(2d)`` to each neighbour."""
    n, d = int(n), int(d)
    if n < 3 or d < 1:
        raise errors.BadParam("torus_nn needs n >= 3 and d >= 1")
    offsets = []
    for i in range(d):
        for s in (1, -1):
            off = [0] * d
            off[i] = s
            offsets.append(off)
    return _offset_kernel(n, d, offsets, {"family": "torus_nn", "n": n, "d": d})


def torus_range(n, m, d=1):
    """Uniform jumps over the box ``[-m, m]^d`` minus the origin, read mod ``n``."""
    n, m, d = int(n), int(m), int(d)
    if d < 1 or m < 1 or not 2 * m < n:
        raise errors.BadParam("torus_range needs d >= 1 and 1 <= m < n/2")
    offsets = [off for off in itertools.product(range(-m, m + 1), repeat=d) if any(off)]
    return _offset_kernel(n, d, offsets, {"family": "torus_range", "n": n, "m": m, "d": d})


def hypercube(n_dim):
    """Walk on ``{0,1}^n_dim`` flipping one uniformly chosen bit at rate 1."""
    n_dim = int(n_dim)
    if n_dim < 1:
        raise errors.BadParam("hypercube needs n_dim >= 1")
    if n_dim > 20:
        raise errors.TooLarge("hypercube is capped at n_dim = 20")
    size = 2 ** n_dim
    x = np.arange(size)
    rows = np.repeat(x, n_dim)
    cols = (x[:, None] ^ (1 << np.arange(n_dim))[None, :]).ravel()
    rates = sp.csr_matrix((np.full(len(rows), 1.0 / n_dim), (rows, cols)), shape=(size, size))
    return _finish(rates, group=(2,) * n_dim, info={"family": "hypercube", "n_dim": n_dim})


def permutation_adjacency(n, k, rng):
    """Adjacency of the permutation model from ``k/2`` uniform permutations.

    Each permutation ``rho`` adds one edge ``(x, rho(x))`` and one edge
    ``(x, rho^{-1}(x))`` at every vertex, so a fixed point of ``rho`` adds 2
    to ``A(x, x)`` (a whole loop) and every row sums to ``k``.
    """
    a = np.zeros((n, n), dtype=np.int64)
    x = np.arange(n)
    for _ in range(k // 2):
        rho = rng.permutation(n)
        inv = np.empty_like(rho)
        inv[rho] = x
        np.add.at(a, (x, rho), 1)
        np.add.at(a, (x, inv), 1)
    return a


def random_regular_perm(n, k, seed=0):
    """Random ``k``-regular multigraph walk from the permutation model.

    A disconnected draw is discarded and the seed incremented, at most
    ``MAX_ATTEMPTS`` times; ``info['attempts']`` records how many draws were made.
    """
    n, k = int(n), int(k)
    if k < 4 or k % 2 or not n > k:
        raise errors.BadParam("random_regular_perm needs even k >= 4 and n > k")
    if n * n > 64 * SIZE_CAP:
        raise errors.TooLarge("dense adjacency too large")
    seed = int(seed)
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng((seed + attempt) % 2 ** 64)
        a = permutation_adjacency(n, k, rng)
        try:
            kern = build_from_adjacency(
                a,
                info={"family": "random_regular_perm", "n": n, "k": k, "seed": seed, "attempts": attempt + 1},
            )
        except errors.Disconnected:
            continue
        kern.info["adjacency"] = sp.csr_matrix(a)
        return kern
    raise errors.PersistentlyDisconnected(f"no connected draw in {MAX_ATTEMPTS} attempts")


__all__ = [
    "ZooSpec",
    "build",
    "moran",
    "torus_nn",
    "torus_range",
    "hypercube",
    "random_regular_perm",
    "permutation_adjacency",
]
