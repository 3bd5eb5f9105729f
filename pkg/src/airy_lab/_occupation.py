"""Compiled occupation-time allocation for piecewise linear paths."""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def occupation_linear(values, dt, delta, origin, n_bins, out):
    """Accumulate per-bin occupation times of each row of ``values``.

    Returns the number of segments that left ``[0, n_bins)`` (their time is
    dropped).
    """
    m, npts = values.shape
    outside = 0
    for p in range(m):
        for i in range(npts - 1):
            u0 = (values[p, i] - origin) / delta
            u1 = (values[p, i + 1] - origin) / delta
            lo = min(u0, u1)
            hi = max(u0, u1)
            ilo = int(math.floor(lo))
            ihi = int(math.floor(hi))
            if ilo < 0 or ihi >= n_bins:
                outside += 1
                continue
            if ilo == ihi:
                out[p, ilo] += dt
                continue
            rate = dt / (hi - lo)
            out[p, ilo] += rate * (ilo + 1 - lo)
            for j in range(ilo + 1, ihi):
                out[p, j] += rate
            out[p, ihi] += rate * (hi - ihi)
    return outside
