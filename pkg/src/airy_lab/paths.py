"""Lattice bridges, path transforms, continuum bridges and local times.

Lattice paths are +-1 walks; continuum paths are sampled on a uniform time
grid and treated as piecewise linear between grid points.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, zeta

from ._occupation import occupation_linear
from .exceptions import ParameterError
from .streams import as_generator, check_positive, check_positive_int

__all__ = [
    "LatticePath",
    "OccupationProfile",
    "ContinuumPath",
    "LocalTimeProfile",
    "sample_rw_bridge",
    "sample_rw_bridge_steps",
    "occupation_profile",
    "quantile_transform",
    "vervaat_transform",
    "updown_counts",
    "quantile_identity_rhs",
    "lattice_endpoint",
    "bridge_count_xi",
    "sample_brownian_bridge",
    "brownian_bridges",
    "sample_excursion",
    "excursions",
    "local_time_profile",
    "occupation_histogram",
    "area_and_l2",
    "excursion_functionals",
    "default_delta",
]

# |zeta(1/2)|: constant of the self-overlap bias of grid-sampled local times
_ZETA_HALF = -float(zeta(0.5))


# ---------------------------------------------------------------- lattice ---


@dataclass(frozen=True, eq=False)
class LatticePath:
    """A +-1 walk given by its starting level and its steps."""

    start: int
    steps: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.steps, dtype=np.int64).ravel()
        if s.size and not np.all(np.abs(s) == 1):
            raise ParameterError("lattice steps must be +1 or -1")
        object.__setattr__(self, "steps", s)
        object.__setattr__(self, "start", int(self.start))

    @classmethod
    def from_positions(cls, positions):
        x = np.asarray(positions, dtype=np.int64).ravel()
        return cls(int(x[0]), np.diff(x))

    @property
    def n_steps(self):
        return self.steps.size

    @property
    def positions(self):
        return np.concatenate(([self.start], self.start + np.cumsum(self.steps)))

    @property
    def end(self):
        return self.start + int(self.steps.sum())

    def __eq__(self, other):
        if not isinstance(other, LatticePath):
            return NotImplemented
        return self.start == other.start and np.array_equal(self.steps, other.steps)

    __hash__ = None


@dataclass(frozen=True)
class OccupationProfile:
    """Visit counts of a lattice path, ``counts[v] = #{t : X(t) = v}``.

    :meth:`normalized` divides by ``big_n**(1/3)``.
    """

    big_n: int
    counts: dict

    def normalized(self, level):
        return self.counts.get(level, 0) / self.big_n ** (1.0 / 3.0)

    @property
    def total(self):
        return sum(self.counts.values())


def _check_bridge(start, end, n_steps):
    n_steps = check_positive_int("n_steps", n_steps, minimum=0)
    gap = int(end) - int(start)
    if abs(gap) > n_steps or (n_steps - gap) % 2:
        raise ParameterError(
            f"no +-1 path of {n_steps} steps joins {start} to {end}"
        )
    return n_steps


def sample_rw_bridge_steps(start, end, n_steps, size, rng=None):
    """Steps of ``size`` independent uniform bridges, shape ``(size, n_steps)``.

    Step ``l`` goes up with probability ``(r + end - v) / (2 r)`` where ``v``
    is the current level and ``r`` the number of remaining steps.
    """
    n_steps = _check_bridge(start, end, n_steps)
    rng = as_generator(rng)
    u = rng.random((size, n_steps))
    steps = np.empty((size, n_steps), dtype=np.int64)
    v = np.full(size, int(start), dtype=np.int64)
    for l in range(n_steps):
        r = n_steps - l
        up = u[:, l] * (2 * r) < (r + end - v)
        steps[:, l] = np.where(up, 1, -1)
        v += steps[:, l]
    return steps


def sample_rw_bridge(start, end, n_steps, rng=None):
    """Uniformly random +-1 bridge from ``start`` to ``end``."""
    steps = sample_rw_bridge_steps(start, end, n_steps, 1, rng)[0]
    return LatticePath(start, steps)


def occupation_profile(path, big_n=1):
    levels, counts = np.unique(path.positions, return_counts=True)
    return OccupationProfile(int(big_n), {int(v): int(c) for v, c in zip(levels, counts)})


def quantile_transform(path):
    """Reorder increments by origin level (ties chronological), rooted at 0."""
    order = np.argsort(path.positions[:-1], kind="stable")
    return LatticePath(0, path.steps[order])


def vervaat_transform(path):
    """Cyclic shift of the increments at the first minimum, rooted at 0."""
    lstar = int(np.argmin(path.positions))
    if lstar == path.n_steps:
        lstar = 0
    return LatticePath(0, np.roll(path.steps, -lstar))


def updown_counts(path):
    """Up-step, down-step and strictly-above counts by origin level.

    Returns three dicts over every level from ``min(X)`` to ``max(X)``:
    ``u[v]``, ``d[v]`` count up and down steps leaving ``v``, and ``t[v]``
    counts all steps leaving levels strictly above ``v``.
    """
    x = path.positions
    origin = x[:-1]
    lo, hi = int(x.min()), int(x.max())
    span = hi - lo + 1
    u = np.bincount(origin[path.steps > 0] - lo, minlength=span)
    d = np.bincount(origin[path.steps < 0] - lo, minlength=span)
    above = np.concatenate((np.cumsum((u + d)[::-1])[::-1][1:], [0]))
    levels = range(lo, hi + 1)
    return (
        {v: int(u[v - lo]) for v in levels},
        {v: int(d[v - lo]) for v in levels},
        {v: int(above[v - lo]) for v in levels},
    )


def quantile_identity_rhs(path, level):
    """Value that the quantile path takes after the steps leaving levels <= ``level``.

    The identity reads ``Q(L - t[v]) = u[v] + (v - start)_+ - (v - end)_+``.
    """
    u, _, _ = updown_counts(path)
    v = int(level)
    return u.get(v, 0) + max(v - path.start, 0) - max(v - path.end, 0)


def lattice_endpoint(x, big_n):
    """Lattice level ``floor(N - N**(1/3) x)`` of the edge coordinate ``x``."""
    return int(math.floor(big_n - np.cbrt(big_n) * x))


def bridge_count_xi(x, y, big_n, t_tilde):
    """Normalized number of +-1 bridges of ``t_tilde N**(2/3)`` steps.

    ``N**(1/3) 2**(-k) C(k, (k + gap)/2)`` with the gap between the lattice
    endpoints of ``x`` and ``y``; zero when the gap exceeds ``k``.
    """
    big_n = check_positive_int("big_n", big_n)
    t_tilde = check_positive("t_tilde", t_tilde)
    kf = t_tilde * big_n ** (2.0 / 3.0)
    k = int(round(kf))
    if k < 1 or abs(kf - k) > 1e-9 * max(1.0, kf):
        raise ParameterError(f"t_tilde N^(2/3) = {kf} is not a positive integer")
    gap = lattice_endpoint(y, big_n) - lattice_endpoint(x, big_n)
    if abs(gap) > k:
        return 0.0
    if (k + gap) % 2:
        raise ParameterError(f"parity of k = {k} does not match endpoint gap {gap}")
    up = (k + gap) // 2
    logc = gammaln(k + 1) - gammaln(up + 1) - gammaln(k - up + 1)
    return float(np.cbrt(big_n) * np.exp(logc - k * math.log(2.0)))


# -------------------------------------------------------------- continuum ---


@dataclass(frozen=True, eq=False)
class ContinuumPath:
    """Path values at ``n_grid + 1`` uniform times on ``[0, t_max]``."""

    t_max: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ParameterError("a continuum path needs at least two grid values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t_max", check_positive("t_max", self.t_max))

    @property
    def n_grid(self):
        return self.values.size - 1

    @property
    def dt(self):
        return self.t_max / self.n_grid

    @property
    def times(self):
        return np.linspace(0.0, self.t_max, self.n_grid + 1)


@dataclass(frozen=True, eq=False)
class LocalTimeProfile:
    """Local time per level bin ``[levels[j], levels[j] + delta)``."""

    delta: float
    levels: np.ndarray
    values: np.ndarray

    @property
    def total_time(self):
        return float(np.sum(self.values) * self.delta)


def default_delta(t_max):
    """Default level bin width ``sqrt(t_max) / 256``."""
    return math.sqrt(t_max) / 256.0


def brownian_bridges(x, y, t_max, n_grid, size, rng=None):
    """Brownian bridges from ``x`` to ``y``, shape ``(size, n_grid + 1)``.

    Built as ``W(t) - (t / t_max) W(t_max)`` plus the straight chord, which
    has the same Gaussian law at the grid times as sequential conditioning.
    """
    n_grid = check_positive_int("n_grid", n_grid)
    t_max = check_positive("t_max", t_max)
    rng = as_generator(rng)
    out = np.zeros((size, n_grid + 1))
    steps = rng.standard_normal((size, n_grid))
    steps *= math.sqrt(t_max / n_grid)
    np.cumsum(steps, axis=1, out=out[:, 1:])
    frac = np.linspace(0.0, 1.0, n_grid + 1)
    out -= frac * out[:, -1:]
    out += x + (y - x) * frac
    out[:, 0] = x
    out[:, -1] = y
    return out


def sample_brownian_bridge(x, y, t_max, n_grid, rng=None):
    return ContinuumPath(t_max, brownian_bridges(x, y, t_max, n_grid, 1, rng)[0])


def excursions(n_grid, size, rng=None, t_max=1.0, method="bessel"):
    """Brownian excursions on ``[0, t_max]``, shape ``(size, n_grid + 1)``.

    ``method="bessel"`` returns the norm of a three dimensional Brownian
    bridge from the origin to itself, whose grid values have exactly the
    excursion law. ``method="vervaat"`` cyclically shifts a one dimensional
    bridge at its first grid minimum; this misses the true minimum between
    grid points and underestimates the area by roughly ``0.58 / sqrt(n_grid)``.
    """
    n_grid = check_positive_int("n_grid", n_grid, minimum=2)
    rng = as_generator(rng)
    if method == "bessel":
        sq = np.zeros((size, n_grid + 1))
        for _ in range(3):
            sq += brownian_bridges(0.0, 0.0, t_max, n_grid, size, rng) ** 2
        out = np.sqrt(sq)
        out[:, 0] = 0.0
        out[:, -1] = 0.0
        return out
    if method == "vervaat":
        b = brownian_bridges(0.0, 0.0, t_max, n_grid, size, rng)
        lstar = np.argmin(b[:, :-1], axis=1)
        inc = np.diff(b, axis=1)
        cols = (np.arange(n_grid)[None, :] + lstar[:, None]) % n_grid
        out = np.zeros_like(b)
        np.cumsum(np.take_along_axis(inc, cols, axis=1), axis=1, out=out[:, 1:])
        out -= out.min(axis=1, keepdims=True)
        out[:, -1] = 0.0
        out[:, 0] = 0.0
        return np.maximum(out, 0.0)
    raise ParameterError(f"unknown excursion method {method!r}")


def sample_excursion(n_grid, rng=None, t_max=1.0, method="bessel"):
    return ContinuumPath(t_max, excursions(n_grid, 1, rng, t_max, method)[0])


def occupation_histogram(values, dt, delta, origin, n_bins):
    """Time spent in each level bin by piecewise linear paths.

    Parameters
    ----------
    values : ndarray, shape (m, n + 1)
        Grid values of ``m`` paths with time step ``dt``.
    origin : float
        Lower edge of bin 0; bins are ``[origin + j delta, origin + (j+1) delta)``.
    n_bins : int
        Paths must stay inside the ``n_bins`` bins.

    Returns
    -------
    ndarray, shape (m, n_bins)
        Occupation time per bin; rows sum to ``n dt``.

    Notes
    -----
    A segment inside one bin credits its whole duration to that bin. A
    segment crossing bins splits its duration in proportion to the level
    distance traversed in each bin, which is exact for linear motion.
    """
    v = np.ascontiguousarray(np.atleast_2d(values), dtype=float)
    occ = np.zeros((v.shape[0], int(n_bins)))
    if occupation_linear(v, float(dt), float(delta), float(origin), int(n_bins), occ):
        raise ParameterError("path leaves the binned level range")
    return occ


def _bin_range(vmin, vmax, delta):
    """Bin origin and count covering ``[vmin, vmax]``.

    Bin indices are computed as ``floor((v - origin) / delta)`` exactly as in
    the occupation kernel, so rounding cannot push an endpoint outside.
    """
    lo = math.floor(vmin / delta)
    while math.floor((vmin - lo * delta) / delta) < 0:
        lo -= 1
    n_bins = math.floor((vmax - lo * delta) / delta) + 1
    return lo, n_bins


def local_time_profile(path, delta=None):
    """Binned local time of a continuum path (linear interpolation)."""
    delta = default_delta(path.t_max) if delta is None else check_positive("delta", delta)
    lo, n_bins = _bin_range(path.values.min(), path.values.max(), delta)
    occ = occupation_histogram(path.values[None, :], path.dt, delta, lo * delta, n_bins)[0]
    levels = (lo + np.arange(n_bins)) * delta
    return LocalTimeProfile(delta, levels, occ / delta)


def _trapezoid_area(values, dt):
    return dt * (values[..., 1:-1].sum(axis=-1) + 0.5 * (values[..., 0] + values[..., -1]))


def _l2_corrected(values, dt, delta):
    """Squared local-time integral from trapezoid-weighted grid samples.

    The histogram of grid samples carries a diagonal self-overlap term and a
    short-range correlation excess of order ``sqrt(dt)``; both are removed.
    """
    v = np.atleast_2d(values)
    m, npts = v.shape
    w = np.full(npts, dt)
    w[0] = w[-1] = 0.5 * dt
    idx = np.floor(v / delta).astype(np.int64)
    idx -= idx.min(axis=1, keepdims=True)
    n_bins = int(idx.max()) + 1
    rows = (np.arange(m) * n_bins)[:, None]
    occ = np.bincount((idx + rows).ravel(), np.broadcast_to(w, v.shape).ravel(), m * n_bins)
    occ = occ.reshape(m, n_bins)
    t_max = dt * (npts - 1)
    return (
        (occ ** 2).sum(axis=1) / delta
        - (w ** 2).sum() / delta
        + 2.0 * _ZETA_HALF * t_max * math.sqrt(dt / (2.0 * math.pi))
    )


def _l2_linear(values, dt, delta):
    v = np.atleast_2d(values)
    lo, n_bins = _bin_range(float(v.min()), float(v.max()), delta)
    occ = occupation_histogram(v, dt, delta, lo * delta, n_bins)
    return (occ ** 2).sum(axis=1) / delta


def area_and_l2(path, delta=None, estimator="corrected"):
    """Time integral and squared local-time integral of a path.

    Parameters
    ----------
    path : ContinuumPath
    delta : float, optional
        Level bin width, default ``sqrt(t_max) / 256``.
    estimator : {"corrected", "linear"}
        ``"linear"`` squares the piecewise-linear local time profile; it is
        biased upward by about ``2 |zeta(1/2)| t_max sqrt(dt / 2 pi)`` for
        Brownian paths. ``"corrected"`` removes that bias and is the default.

    Returns
    -------
    (float, float)
    """
    delta = default_delta(path.t_max) if delta is None else check_positive("delta", delta)
    area = float(_trapezoid_area(path.values, path.dt))
    if estimator == "corrected":
        l2 = _l2_corrected(path.values, path.dt, delta)
    elif estimator == "linear":
        l2 = _l2_linear(path.values, path.dt, delta)
    else:
        raise ParameterError(f"unknown estimator {estimator!r}")
    return area, float(l2[0])


def excursion_functionals(n_samples, n_grid=4096, delta=None, rng=None,
                          method="bessel", estimator="corrected", batch=256):
    """Area and squared local-time integral of standard excursions.

    Returns
    -------
    area, l2 : ndarray, shape (n_samples,)
    """
    n_samples = check_positive_int("n_samples", n_samples)
    delta = default_delta(1.0) if delta is None else check_positive("delta", delta)
    rng = as_generator(rng)
    dt = 1.0 / n_grid
    area = np.empty(n_samples)
    l2 = np.empty(n_samples)
    for s in range(0, n_samples, batch):
        m = min(batch, n_samples - s)
        e = excursions(n_grid, m, rng, method=method)
        area[s : s + m] = _trapezoid_area(e, dt)
        if estimator == "corrected":
            l2[s : s + m] = _l2_corrected(e, dt, delta)
        elif estimator == "linear":
            l2[s : s + m] = _l2_linear(e, dt, delta)
        else:
            raise ParameterError(f"unknown estimator {estimator!r}")
    return area, l2
