"""Uniformization for ``exp(tQ)`` actions.

``exp(tQ) = sum_k Poisson(k; L t) P**k`` with ``P = I + Q/L`` and
``L >= max_x |Q(x, x)|``.  ``P`` is nonnegative, so every partial sum is a
lower bound and dropping the Poisson tail beyond mass ``eps`` costs at most
``eps * |f|_inf`` per evaluation.  ``Q`` may be sub-stochastic (a killed
chain), which is how survival probabilities are computed.
"""
import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

EPS_TRUNC = 1e-12


def poisson_window(mean, eps):
    """Indices ``[lo, hi]`` holding all but ``eps`` of the Poisson(mean) mass, and the weights."""
    if mean <= 0:
        return 0, 0, np.ones(1)
    hi = int(poisson.isf(eps / 2, mean)) + 1
    lo = max(0, int(poisson.ppf(eps / 2, mean)) - 1) if mean > 50 else 0
    w = poisson.pmf(np.arange(lo, hi + 1), mean)
    return lo, hi, w


class SemigroupEvaluator:
    """Evaluate ``exp(tQ) f`` (right action) or ``mu exp(tQ)`` (left action).

    Parameters
    ----------
    generator : sparse or dense (n, n) array
        Rate matrix, rows summing to ``<= 0``.
    eps : float
        Poisson tail mass discarded per evaluation.
    """

    def __init__(self, generator, eps=EPS_TRUNC):
        q = sp.csr_matrix(generator, dtype=float)
        diag = -q.diagonal()
        self.n = q.shape[0]
        self.rate = float(max(diag.max(), 1e-300))
        self.p = (sp.identity(self.n, format="csr") + q / self.rate).tocsr()
        self.pt = self.p.T.tocsr()
        self.eps = eps

    def _apply(self, mat, v, t):
        lo, hi, w = poisson_window(self.rate * t, self.eps)
        acc = np.zeros_like(v, dtype=float)
        cur = np.array(v, dtype=float)
        for k in range(hi + 1):
            if k >= lo:
                acc += w[k - lo] * cur
            if k < hi:
                cur = mat @ cur
        return acc

    def right(self, f, t):
        """``exp(tQ) f``; ``f`` may be a vector or an (n, m) block."""
        return self._apply(self.p, f, float(t))

    def left(self, mu, t):
        """``mu exp(tQ)``; ``mu`` may be a vector or an (n, m) block of column measures."""
        return self._apply(self.pt, mu, float(t))

    def _grid(self, mat, v, times):
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        out = np.empty((len(times),) + np.shape(v))
        cur = np.array(v, dtype=float)
        now = 0.0
        for i in order:
            dt = times[i] - now
            if dt > 0:
                cur = self._apply(mat, cur, dt)
                now = times[i]
            out[i] = cur
        return out

    def right_grid(self, f, times):
        """``exp(tQ) f`` for every ``t`` in ``times``, by stepping between sorted times."""
        return self._grid(self.p, f, times)

    def left_grid(self, mu, times):
        return self._grid(self.pt, mu, times)
