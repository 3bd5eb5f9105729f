"""Implicit-shift QL iteration for symmetric tridiagonal matrices (numba)."""

import numpy as np
from numba import njit

MAX_SWEEPS = 50


@njit(cache=True)
def _hypot(a, b):
    return np.hypot(a, b)


@njit(cache=True, nogil=True)
def ql_implicit(d, e, zt, want_vectors):
    """Diagonalize in place.

    ``d`` (length n) holds the diagonal and receives the eigenvalues.
    ``e`` (length n) holds the off-diagonal in ``e[0..n-2]``; ``e[n-1]`` is
    scratch. ``zt`` is an ``n x n`` array initialised to the identity whose
    row ``k`` becomes the eigenvector of ``d[k]``.

    Returns -1 on success, otherwise the index whose eigenvalue failed to
    converge within ``MAX_SWEEPS`` iterations.
    """
    n = d.shape[0]
    eps = np.finfo(np.float64).eps
    e[n - 1] = 0.0
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                scale = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * scale:
                    break
                m += 1
            if m == l:
                break
            if sweeps == MAX_SWEEPS:
                return l
            sweeps += 1
            # Wilkinson-type shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = _hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = _hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(n):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1
