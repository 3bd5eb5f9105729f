"""Monte Carlo estimators for the stochastic Airy semigroup kernel.

For a Brownian bridge ``B`` from ``x`` to ``y`` on ``[0, T]`` with binned
local times ``L`` the kernel is

    K(x, y; T) = (2 pi T)**(-1/2) exp(-(x - y)**2 / 2T)
                 E[ 1{B stays in the window}
                    exp(-1/2 int B dt + s_xi sum L dW_xi + (s_a/2) sum L dW_a) ]

conditionally on one fixed realization of the noises ``W_xi`` and ``W_a``.
Averaging over the noise replaces the stochastic sums by
``exp(int L**2 / (2 beta))``.

Two discretization corrections are applied by default. The window event is
weighted by the probability that the bridge stays inside between grid times,
and the interpolated local-time profile entering the stochastic sums is
paired with a per-path factor that removes its excess quadratic variation.

Bridges are written ``x + (y - x) t / T + B0`` with ``B0`` a bridge from 0
to 0. When ``x`` lies on the noise lattice, one binned profile of
``B0`` plus the chord serves every starting point by an integer bin shift,
so kernels at many lattice points cost one matrix product.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._crossing import survival_log
from .ensemble import FULL_WINDOW, EnsembleParams, SpectralWindow, default_params
from .exceptions import ParameterError
from .montecarlo import McEstimate
from .paths import _bin_range, _l2_corrected, brownian_bridges, excursion_functionals, occupation_histogram
from .streams import as_generator, check_positive, check_positive_int

__all__ = [
    "WhiteNoiseGrid",
    "KernelQuery",
    "NodeGrid",
    "SemigroupReport",
    "sample_white_noise",
    "kernel_mc",
    "kernel_mc_wavg",
    "trace_mc",
    "trace_mc_wavg",
    "trace_x_max",
    "simpson_nodes",
    "okounkov_trace",
    "expected_trace_excursion",
    "expected_trace_from_functionals",
    "gaussian_identity_sample",
    "semigroup_residual",
    "DEFAULT_STEPS_PER_UNIT",
]

DEFAULT_STEPS_PER_UNIT = 1024
_PAIR_BATCH = 128


@dataclass(frozen=True, eq=False)
class WhiteNoiseGrid:
    """Increments of two independent Brownian motions on level cells.

    Cell ``j`` is ``[j delta_a, (j+1) delta_a)``. ``params`` fixes how the
    two noises combine into the exponent of the kernel.
    """

    delta_a: float
    a_max: float
    incr_xi: np.ndarray
    incr_a: np.ndarray
    params: EnsembleParams = field(default_factory=lambda: default_params(2.0))

    @property
    def n_cells(self):
        return self.incr_xi.size

    @property
    def level_limit(self):
        return self.n_cells * self.delta_a

    def combined(self):
        """Increments of ``W = sqrt(beta) (s_xi W_xi + s_a/2 W_a)``."""
        p = self.params
        if p.is_deterministic:
            return np.zeros(self.n_cells)
        return math.sqrt(p.beta) * (p.s_xi * self.incr_xi + 0.5 * p.s_a * self.incr_a)


def sample_white_noise(delta_a, a_max, rng=None, params=None):
    """Fresh noise grid with ``ceil(a_max / delta_a)`` cells."""
    delta_a = check_positive("delta_a", delta_a)
    a_max = check_positive("a_max", a_max)
    rng = as_generator(rng)
    n = int(math.ceil(a_max / delta_a - 1e-12))
    sd = math.sqrt(delta_a)
    xi = rng.normal(0.0, sd, n)
    a = rng.normal(0.0, sd, n)
    return WhiteNoiseGrid(delta_a, a_max, xi, a, default_params(2.0) if params is None else params)


@dataclass(frozen=True)
class KernelQuery:
    x: float
    y: float
    t: float
    window: SpectralWindow = FULL_WINDOW
    parity: str = "both"

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ParameterError("kernel arguments must be nonnegative")
        check_positive("t", self.t)
        if self.parity not in ("both", "even", "odd"):
            raise ParameterError(f"unknown parity {self.parity!r}")


@dataclass(frozen=True, eq=False)
class NodeGrid:
    """Quadrature nodes on a level lattice: ``x = cells * delta``."""

    delta: float
    cells: np.ndarray
    weights: np.ndarray

    @property
    def nodes(self):
        return self.cells * self.delta


def simpson_nodes(lower, upper, step, delta):
    """Composite Simpson rule on lattice points covering ``[lower, upper]``.

    The node spacing is ``step`` rounded to a multiple of ``delta``; the
    first node is the first lattice point ``>= lower`` and the last one is
    at or just beyond ``upper`` so that the interval count is even.
    """
    delta = check_positive("delta", delta)
    stride = max(1, int(round(step / delta)))
    first = int(math.ceil(lower / delta - 1e-9))
    n_int = max(2, int(math.ceil((upper - first * delta) / (stride * delta) - 1e-9)))
    n_int += n_int % 2
    cells = first + stride * np.arange(n_int + 1)
    w = np.ones(n_int + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= stride * delta / 3.0
    return NodeGrid(delta, cells, w)


def trace_x_max(t, tol=1e-4):
    """Upper integration limit for diagonal traces.

    For large ``x`` the diagonal kernel is of order
    ``(2 pi T)**(-1/2) exp(-T x / 2)``. The limit keeps the neglected tail
    below ``tol`` times the trace scale ``sqrt(2/pi) T**(-3/2)``, with a
    safety factor ``2 sqrt(T)``.
    """
    t = check_positive("t", t)
    return max(2.0, (2.0 / t) * math.log(2.0 * math.sqrt(t) / (tol * math.sqrt(2.0 / math.pi))))


def _check_monitor(monitor):
    if monitor not in ("bridge", "grid"):
        raise ParameterError(f"unknown window monitor {monitor!r}")


def _steps(t, steps_per_unit):
    return max(2, int(round(t * steps_per_unit)))


def _gauss(d, t):
    return math.exp(-d * d / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def _bridge_block(base, d, t, n_steps, n_pairs, rng, antithetic):
    """Bridges ``base + d s / t + B0`` (and reflections), trapezoid areas."""
    b0 = brownian_bridges(0.0, 0.0, t, n_steps, n_pairs, rng)
    line = base + d * np.linspace(0.0, 1.0, n_steps + 1)
    paths = np.vstack((line + b0, line - b0)) if antithetic else line + b0
    dt = t / n_steps
    area = dt * (paths[:, 1:-1].sum(axis=1) + 0.5 * (paths[:, 0] + paths[:, -1]))
    return paths, area, dt


def _block_values(paths, area, dt, t, d, cells, delta, window, mode, noise, params, parity,
                  monitor):
    """Kernel integrand for every path and every lattice shift.

    ``mode`` is ``"noise"`` (stochastic sums against ``noise``), ``"wavg"``
    (noise-averaged weight) or ``"none"`` (drift term only). Returns
    ``(values, clipped)``: values of shape ``(n_paths, n_nodes)`` and the
    number of contributing paths that left the noise grid. Squared local
    times use the grid-sample estimator of :func:`paths.area_and_l2`.
    ``monitor`` is
    ``"bridge"`` (survival probability between grid times included) or
    ``"grid"`` (window checked at grid times only).
    """
    shift = cells * delta
    lo = paths.min(axis=1)[:, None] + shift[None, :]
    hi = paths.max(axis=1)[:, None] + shift[None, :]
    inside = (lo >= window.effective_lower) & (hi <= window.upper)
    expo = -0.5 * (area[:, None] + t * shift[None, :])
    if monitor == "bridge":
        expo += survival_log(paths, shift, window.effective_lower, window.upper, dt)
    factor = 0.0
    clipped = 0
    if mode in ("noise", "wavg") and not params.is_deterministic:
        first, n_bins = _bin_range(float(paths.min()), float(paths.max()), delta)
        local = occupation_histogram(paths, dt, delta, first * delta, n_bins) / delta
        sq_local = _l2_corrected(paths, dt, delta)[:, None]
        if mode == "wavg":
            expo += (0.5 / params.beta) * sq_local
        else:
            # the interpolated profile is rougher than the path's local time;
            # remove its excess quadratic variation so that the noise average
            # of the weight carries the corrected squared local time
            excess = delta * np.sum(local ** 2, axis=1)[:, None] - sq_local
            expo -= (0.5 / params.beta) * excess
            idx = cells[:, None] + first + np.arange(n_bins)[None, :]
            valid = (idx >= 0) & (idx < noise.n_cells)
            safe = np.where(valid, idx, 0)
            clipped = int(np.count_nonzero(np.any(inside & (hi >= noise.level_limit), axis=1)))
            gx = np.where(valid, params.s_xi * noise.incr_xi[safe], 0.0)
            ga = np.where(valid, 0.5 * params.s_a * noise.incr_a[safe], 0.0)
            if parity == "both":
                expo += local @ (gx + ga).T
            else:
                expo += local @ gx.T
                factor = local @ ga.T
    with np.errstate(over="ignore", under="ignore"):
        val = np.exp(np.where(inside, expo, -np.inf))
        if parity == "even":
            val = val * np.cosh(factor)
        elif parity == "odd":
            val = val * np.sinh(factor)
    return _gauss(d, t) * val, clipped


def _lattice_samples(cells_x, d, t, window, n_paths, rng, *, delta, mode, noise,
                     params, parity, steps_per_unit, antithetic, monitor, weights=None):
    """Pair-averaged kernel samples at ``(x, x + d)`` for lattice points ``x``.

    With ``weights`` the samples are reduced to ``sum_i weights[i] K(x_i)``.
    Returns an ``McEstimate`` per node (or one for the weighted sum).
    """
    n_paths = check_positive_int("n_paths", n_paths, minimum=2 if antithetic else 1)
    rng = as_generator(rng)
    n_steps = _steps(t, steps_per_unit)
    n_units = n_paths // 2 if antithetic else n_paths
    cells_x = np.asarray(cells_x, dtype=np.int64)
    acc = None
    clipped = 0
    for s in range(0, n_units, _PAIR_BATCH):
        m = min(_PAIR_BATCH, n_units - s)
        paths, area, dt = _bridge_block(0.0, d, t, n_steps, m, rng, antithetic)
        vals, c = _block_values(paths, area, dt, t, d, cells_x, delta, window, mode,
                                noise, params, parity, monitor)
        clipped += c
        if antithetic:
            vals = 0.5 * (vals[:m] + vals[m:])
        if weights is not None:
            vals = (vals @ weights)[:, None]
        if acc is None:
            acc = [McEstimate() for _ in range(vals.shape[1])]
        for i in range(vals.shape[1]):
            acc[i] = acc[i].merge(McEstimate.from_samples(vals[:, i]))
    for est in acc:
        est.clipped = clipped
    return acc


def _single_query(q, n_paths, rng, mode, noise, params, delta, steps_per_unit, antithetic,
                  monitor):
    n_paths = check_positive_int("n_paths", n_paths, minimum=2 if antithetic else 1)
    n_units = n_paths // 2 if antithetic else n_paths
    if q.window.is_empty or not (q.window.contains(q.x) and q.window.contains(q.y)):
        return McEstimate.from_samples(np.zeros(n_units))
    rng = as_generator(rng)
    n_steps = _steps(q.t, steps_per_unit)
    d = q.y - q.x
    est = McEstimate()
    clipped = 0
    for s in range(0, n_units, _PAIR_BATCH):
        m = min(_PAIR_BATCH, n_units - s)
        paths, area, dt = _bridge_block(q.x, d, q.t, n_steps, m, rng, antithetic)
        vals, c = _block_values(paths, area, dt, q.t, d, np.zeros(1, dtype=np.int64), delta,
                                q.window, mode, noise, params, q.parity, monitor)
        clipped += c
        vals = vals[:, 0]
        if antithetic:
            vals = 0.5 * (vals[:m] + vals[m:])
        est = est.merge(McEstimate.from_samples(vals))
    est.clipped = clipped
    return est


def kernel_mc(q, w, n_paths, rng=None, steps_per_unit=DEFAULT_STEPS_PER_UNIT, antithetic=True,
              monitor="bridge"):
    """Estimate ``K(x, y; T)`` conditionally on the noise grid ``w``.

    Parameters
    ----------
    q : KernelQuery
    w : WhiteNoiseGrid
    n_paths : int
        Bridges evaluated. With ``antithetic`` each bridge is paired with its
        reflection about the chord and every pair gives one sample.
    monitor : {"bridge", "grid"}
        ``"grid"`` checks the window at grid times only, which lets paths
        slip out between grid points (bias of order ``sqrt(dt)``).
        ``"bridge"`` also weights each path by the probability that the
        Brownian bridge between consecutive grid values stays inside.

    Returns
    -------
    McEstimate
        ``clipped`` counts contributing bridges that climbed past the end of
        the noise grid.
    """
    _check_monitor(monitor)
    return _single_query(q, n_paths, rng, "noise", w, w.params, w.delta_a,
                         steps_per_unit, antithetic, monitor)


def kernel_mc_wavg(x, y, t, window=FULL_WINDOW, beta=2.0, n_paths=1000, rng=None,
                   delta=1.0 / 256.0, steps_per_unit=DEFAULT_STEPS_PER_UNIT, antithetic=True,
                   monitor="bridge"):
    """Estimate the noise average of ``K(x, y; T)``.

    Each bridge carries the weight ``exp(-1/2 int B + int L**2 / (2 beta))``
    with the same binned local time as :func:`kernel_mc`.
    """
    _check_monitor(monitor)
    params = default_params(beta)
    return _single_query(KernelQuery(x, y, t, window), n_paths, rng, "wavg", None, params,
                         delta, steps_per_unit, antithetic, monitor)


def _diagonal_nodes(t, window, delta, x_max, x_step):
    x_max = trace_x_max(t) if x_max is None else check_positive("x_max", x_max)
    upper = min(window.upper, x_max)
    return simpson_nodes(window.effective_lower, upper, x_step, delta)


def trace_mc(t, window, w, n_paths, x_max=None, x_step=0.05, rng=None,
             steps_per_unit=DEFAULT_STEPS_PER_UNIT, antithetic=True, parity="both",
             monitor="bridge"):
    """Estimate ``Trace U(T) = int K(x, x; T) dx`` for one noise realization.

    All diagonal points share the noise grid ``w`` and, through lattice
    shifts, the same bridge ensemble. Each bridge pair contributes one
    sample of the Simpson sum over ``[lower, x_max]``.
    """
    t = check_positive("t", t)
    _check_monitor(monitor)
    if window.is_empty:
        return McEstimate.from_samples(np.zeros(2))
    grid = _diagonal_nodes(t, window, w.delta_a, x_max, x_step)
    return _lattice_samples(grid.cells, 0.0, t, window, n_paths, rng, delta=w.delta_a,
                            mode="noise", noise=w, params=w.params, parity=parity,
                            steps_per_unit=steps_per_unit, antithetic=antithetic,
                            monitor=monitor, weights=grid.weights)[0]


def trace_mc_wavg(t, window=FULL_WINDOW, beta=2.0, n_paths=1000, x_max=None, x_step=0.05,
                  rng=None, delta=1.0 / 256.0, steps_per_unit=DEFAULT_STEPS_PER_UNIT,
                  antithetic=True, monitor="bridge"):
    """Noise-averaged trace, the diagonal integral of :func:`kernel_mc_wavg`."""
    t = check_positive("t", t)
    _check_monitor(monitor)
    if window.is_empty:
        return McEstimate.from_samples(np.zeros(2))
    grid = _diagonal_nodes(t, window, delta, x_max, x_step)
    return _lattice_samples(grid.cells, 0.0, t, window, n_paths, rng, delta=delta,
                            mode="wavg", noise=None, params=default_params(beta),
                            parity="both", steps_per_unit=steps_per_unit,
                            antithetic=antithetic, monitor=monitor,
                            weights=grid.weights)[0]


def okounkov_trace(t):
    """Closed form of the expected trace at ``beta = 2``."""
    t = check_positive("t", t)
    return math.sqrt(2.0 / math.pi) * t ** -1.5 * math.exp(t ** 3 / 96.0)


def expected_trace_from_functionals(area, l2, t, beta):
    """Expected trace from excursion areas and squared local-time integrals.

    ``sqrt(2/pi) T**(-3/2) E[exp(-T**1.5 area / 2 + T**1.5 l2 / (2 beta))]``.
    """
    t = check_positive("t", t)
    beta = check_positive("beta", beta, allow_inf=True)
    s = t ** 1.5
    expo = -0.5 * s * np.asarray(area)
    if not math.isinf(beta):
        expo = expo + s / (2.0 * beta) * np.asarray(l2)
    return McEstimate.from_samples(math.sqrt(2.0 / math.pi) * t ** -1.5 * np.exp(expo))


def expected_trace_excursion(t, beta, n_samples, n_grid=4096, delta=None, rng=None):
    """Expected trace of the semigroup through the excursion representation."""
    area, l2 = excursion_functionals(n_samples, n_grid, delta, rng)
    return expected_trace_from_functionals(area, l2, t, beta)


def gaussian_identity_sample(n_samples, n_grid=4096, delta=None, rng=None):
    """Samples of ``int e dt - 1/2 int l**2 dy`` over standard excursions."""
    area, l2 = excursion_functionals(n_samples, n_grid, delta, rng)
    return area - 0.5 * l2


@dataclass(frozen=True, eq=False)
class SemigroupReport:
    """Composition residuals on a test grid.

    ``residual[i, j]`` estimates ``int K(x_i, z; T1) K(z, y_j; T2) dz -
    K(x_i, y_j; T1 + T2)`` and ``stderr[i, j]`` its standard error.
    """

    points: np.ndarray
    residual: np.ndarray
    stderr: np.ndarray
    replicates: int

    @property
    def z_scores(self):
        return self.residual / self.stderr

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residual)))

    @property
    def worst(self):
        """Index of the largest standardized residual."""
        return np.unravel_index(np.argmax(np.abs(self.z_scores)), self.residual.shape)

    def passes(self, n_se=3.0):
        return bool(np.all(np.abs(self.residual) < n_se * self.stderr))


def _kernel_table(row_cells, col_cells, t, window, n_paths, rng, delta, mode, noise,
                  params, steps_per_unit, antithetic, monitor):
    """Kernel means ``K(row_i, col_j; t)`` on lattice points, one ensemble per gap."""
    out = np.zeros((row_cells.size, col_cells.size))
    gaps = col_cells[None, :] - row_cells[:, None]
    for g in np.unique(gaps):
        rows, cols = np.nonzero(gaps == g)
        ests = _lattice_samples(row_cells[rows], g * delta, t, window, n_paths, rng,
                                delta=delta, mode=mode, noise=noise, params=params,
                                parity="both", steps_per_unit=steps_per_unit,
                                antithetic=antithetic, monitor=monitor)
        out[rows, cols] = [e.mean for e in ests]
    return out


def semigroup_residual(t1, t2, window, w, n_paths, points=(0.5, 1.0, 1.5, 2.0, 2.5),
                       z_max=None, z_step=0.1, replicates=40, rng=None,
                       steps_per_unit=DEFAULT_STEPS_PER_UNIT, antithetic=True,
                       monitor="bridge"):
    """Check ``int K(x, z; T1) K(z, y; T2) dz = K(x, y; T1 + T2)`` on one noise grid.

    Parameters
    ----------
    points : sequence of float
        Test points, used for both ``x`` and ``y`` (rounded to the lattice).
    replicates : int
        Independent repetitions of the whole comparison; each uses fresh,
        mutually independent bridge ensembles for the three kernels, so the
        product inside the integral is unbiased. The standard error comes from
        the spread across replicates.
    w : WhiteNoiseGrid
        Shared noise; its ``params`` select the ensemble (``beta = inf`` for
        the deterministic kernel).

    Notes
    -----
    ``t2 = 0`` means the identity on the window, so the composition reduces
    to ``K(x, y; T1)`` restricted to ``y`` in the window.
    """
    t1 = check_positive("t1", t1)
    t2 = float(t2)
    if t2 < 0:
        raise ParameterError("t2 must be nonnegative")
    replicates = check_positive_int("replicates", replicates, minimum=2)
    _check_monitor(monitor)
    rng = as_generator(rng)
    delta = w.delta_a
    cells = np.unique(np.round(np.asarray(points, dtype=float) / delta).astype(np.int64))
    total = t1 + t2
    if z_max is None:
        z_max = cells.max() * delta + 8.0 * math.sqrt(max(t1, t2))
    z_hi = min(window.upper, z_max)
    zgrid = simpson_nodes(window.effective_lower, z_hi, z_step, delta) if t2 > 0 else None
    args = dict(window=window, n_paths=n_paths, rng=rng, delta=delta, mode="noise", noise=w,
                params=w.params, steps_per_unit=steps_per_unit, antithetic=antithetic,
                monitor=monitor)
    res = np.empty((replicates, cells.size, cells.size))
    for r in range(replicates):
        if t2 > 0:
            k1 = _kernel_table(cells, zgrid.cells, t1, **args)
            k2 = _kernel_table(zgrid.cells, cells, t2, **args)
            composed = (k1 * zgrid.weights[None, :]) @ k2
        else:
            keep = window.contains(cells * delta).astype(float)
            composed = _kernel_table(cells, cells, t1, **args) * keep[None, :]
        direct = _kernel_table(cells, cells, total, **args)
        res[r] = composed - direct
    mean = res.mean(axis=0)
    se = res.std(axis=0, ddof=1) / math.sqrt(replicates)
    return SemigroupReport(cells * delta, mean, se, replicates)
