"""Compiled survival weights of Brownian bridges between grid points."""

import math

import numpy as np
from numba import njit

# exp(-2 a b / dt) is below 1e-17 once a b > _CUT dt
_CUT = 20.0


@njit(cache=True, nogil=True)
def log_survival(values, shifts, lower, upper, dt, out):
    """Add the log probability that no grid segment crossed a barrier.

    Row ``p`` shifted by ``shifts[j]`` is a sequence of grid values; between
    consecutive values at distances ``a, b > 0`` from a barrier, a Brownian
    bridge of duration ``dt`` touches it with probability
    ``exp(-2 a b / dt)``. Segments with an endpoint already outside are left
    to the grid indicator.
    """
    m, npts = values.shape
    k = shifts.size
    cut = _CUT * dt
    lower_on = not math.isinf(lower)
    upper_on = not math.isinf(upper)
    for p in range(m):
        vmin = values[p, 0]
        vmax = values[p, 0]
        for i in range(1, npts):
            vmin = min(vmin, values[p, i])
            vmax = max(vmax, values[p, i])
        for j in range(k):
            s = shifts[j]
            near_lo = lower_on and (vmin + s - lower) ** 2 < cut
            near_hi = upper_on and (upper - vmax - s) ** 2 < cut
            if not (near_lo or near_hi):
                continue
            acc = 0.0
            for i in range(npts - 1):
                if near_lo:
                    a = values[p, i] + s - lower
                    b = values[p, i + 1] + s - lower
                    if a > 0.0 and b > 0.0 and a * b < cut:
                        acc += math.log1p(-math.exp(-2.0 * a * b / dt))
                if near_hi:
                    a = upper - values[p, i] - s
                    b = upper - values[p, i + 1] - s
                    if a > 0.0 and b > 0.0 and a * b < cut:
                        acc += math.log1p(-math.exp(-2.0 * a * b / dt))
            out[p, j] += acc


def survival_log(values, shifts, lower, upper, dt):
    """Log survival weights, shape ``(len(values), len(shifts))``."""
    v = np.ascontiguousarray(values, dtype=float)
    s = np.ascontiguousarray(shifts, dtype=float)
    out = np.zeros((v.shape[0], s.size))
    log_survival(v, s, float(lower), float(upper), float(dt), out)
    return out
