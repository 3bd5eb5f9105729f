import math

import numpy as np
import pytest
from scipy import integrate, special

from airy_lab._crossing import survival_log
from airy_lab.airy import (
    KernelQuery,
    expected_trace_excursion,
    expected_trace_from_functionals,
    gaussian_identity_sample,
    kernel_mc,
    kernel_mc_wavg,
    okounkov_trace,
    sample_white_noise,
    semigroup_residual,
    simpson_nodes,
    trace_mc,
    trace_mc_wavg,
    trace_x_max,
)
from airy_lab.ensemble import FULL_WINDOW, SpectralWindow, default_params
from airy_lab.exceptions import ParameterError
from airy_lab.montecarlo import combined_z
from airy_lab.paths import excursion_functionals
from airy_lab.verify import normality_test
from helpers import assert_mean_within, assert_variance_within

INF = math.inf


def free_kernel(x, y, t):
    """Kernel of exp(-T/2 (-d^2/dx^2 + x)) on the whole line."""
    return math.exp(-(x - y) ** 2 / (2 * t) - t * (x + y) / 4 + t ** 3 / 96) / math.sqrt(
        2 * math.pi * t
    )


def airy_density_trace(t):
    """int exp(T x / 2) (Ai'(x)^2 - x Ai(x)^2) dx over the real line."""

    def f(x):
        ai, aip, _, _ = special.airy(x)
        return math.exp(t * x / 2) * (aip * aip - x * ai * ai)

    return integrate.quad(f, -200.0, 30.0, limit=2000, epsabs=1e-13, epsrel=1e-12)[0]


# ------------------------------------------------------------------ noise ---


def test_white_noise_shapes():
    w = sample_white_noise(0.1, 1.0, np.random.default_rng(0))
    assert w.n_cells == 10 and w.incr_xi.shape == w.incr_a.shape == (10,)
    assert w.level_limit == pytest.approx(1.0)
    assert sample_white_noise(0.3, 1.0).n_cells == 4


def test_white_noise_variances():
    rng = np.random.default_rng(1)
    grids = [sample_white_noise(0.1, 1.0, rng) for _ in range(20000)]
    xi = np.array([g.incr_xi for g in grids])
    a = np.array([g.incr_a for g in grids])
    comb = np.array([g.combined() for g in grids])
    assert_variance_within(xi.sum(axis=1), 1.0)
    assert_variance_within(a.sum(axis=1), 1.0)
    assert_variance_within(comb[:, 3], 0.1)
    assert_mean_within(xi[:, :5].sum(axis=1) * xi[:, 5:].sum(axis=1), 0.0)
    assert_mean_within(xi[:, 2] * a[:, 2], 0.0)


@pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
def test_combined_noise_has_unit_rate(beta):
    rng = np.random.default_rng(int(beta))
    comb = np.array(
        [sample_white_noise(0.05, 0.5, rng, default_params(beta)).combined() for _ in range(20000)]
    )
    assert_variance_within(comb.ravel(), 0.05)


def test_deterministic_noise_combines_to_zero():
    w = sample_white_noise(0.1, 1.0, np.random.default_rng(2), default_params(INF))
    assert np.all(w.combined() == 0.0)


# ---------------------------------------------------------------- kernels ---


def test_kernel_query_validation():
    with pytest.raises(ParameterError):
        KernelQuery(-0.1, 1.0, 1.0)
    with pytest.raises(ParameterError):
        KernelQuery(1.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        KernelQuery(1.0, 1.0, 1.0, parity="all")


def test_kernel_outside_window_is_zero():
    w = sample_white_noise(1 / 256, 10.0, np.random.default_rng(3))
    q = KernelQuery(0.5, 2.0, 1.0, SpectralWindow(1.0, 5.0))
    est = kernel_mc(q, w, 64, np.random.default_rng(4))
    assert est.mean == 0.0 and est.stderr == 0.0
    assert kernel_mc_wavg(0.5, 2.0, 1.0, SpectralWindow(1.0, 5.0), 2.0, 64).mean == 0.0


@pytest.mark.parametrize("x, y, t", [(6.0, 6.0, 1.0), (4.0, 5.0, 0.5), (8.0, 7.0, 2.0)])
def test_deterministic_kernel_matches_free_space_formula(x, y, t):
    # far from the boundary the half-line constraint is invisible
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(5), default_params(INF))
    est = kernel_mc(KernelQuery(x, y, t), w, 4000, np.random.default_rng(6))
    target = free_kernel(x, y, t)
    assert abs(est.mean - target) <= 3 * est.stderr + 1e-3 * target


def test_deterministic_kernel_equals_noise_averaged_kernel():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(7), default_params(INF))
    a = kernel_mc(KernelQuery(1.0, 1.5, 1.0), w, 512, np.random.default_rng(8))
    b = kernel_mc_wavg(1.0, 1.5, 1.0, FULL_WINDOW, INF, 512, np.random.default_rng(8))
    assert a.mean == pytest.approx(b.mean, rel=1e-13)


def test_half_line_constraint_lowers_kernel():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(9), default_params(INF))
    est = kernel_mc(KernelQuery(0.3, 0.3, 1.0), w, 4000, np.random.default_rng(10))
    assert est.mean < free_kernel(0.3, 0.3, 1.0) - 5 * est.stderr


def test_kernel_parities_add_up_path_by_path():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(11))
    est = {
        p: kernel_mc(KernelQuery(1.0, 1.3, 0.5, parity=p), w, 256, np.random.default_rng(12))
        for p in ("both", "even", "odd")
    }
    assert est["even"].mean + est["odd"].mean == pytest.approx(est["both"].mean, rel=1e-12)
    assert est["even"].mean > abs(est["odd"].mean)


def test_kernel_symmetry_on_shared_noise():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(13))
    a = kernel_mc(KernelQuery(1.0, 1.6, 0.5), w, 4000, np.random.default_rng(14))
    b = kernel_mc(KernelQuery(1.6, 1.0, 0.5), w, 4000, np.random.default_rng(15))
    assert abs(combined_z(a, b)) < 3


def test_noise_average_identity():
    rng = np.random.default_rng(16)
    q = KernelQuery(1.0, 1.0, 0.5)
    per_grid = [
        kernel_mc(q, sample_white_noise(1 / 256, 20.0, rng), 400, rng).mean for _ in range(60)
    ]
    avg = kernel_mc_wavg(1.0, 1.0, 0.5, FULL_WINDOW, 2.0, 8000, rng)
    diff = np.mean(per_grid) - avg.mean
    se = math.hypot(np.std(per_grid, ddof=1) / math.sqrt(len(per_grid)), avg.stderr)
    assert abs(diff) < 3 * se


def test_clipped_paths_are_flagged():
    w = sample_white_noise(1 / 64, 1.2, np.random.default_rng(17))
    est = kernel_mc(KernelQuery(1.0, 1.0, 1.0), w, 256, np.random.default_rng(18))
    assert est.clipped > 0 and est.truncated
    roomy = sample_white_noise(1 / 64, 20.0, np.random.default_rng(17))
    assert kernel_mc(KernelQuery(1.0, 1.0, 1.0), roomy, 256, np.random.default_rng(18)).clipped == 0


def test_survival_weight_matches_fine_bridge_simulation():
    # oracle: refine one grid segment into many steps and count barrier hits
    a, b, dt = 0.05, 0.08, 0.01
    fine = 2000
    rng = np.random.default_rng(34)
    s = np.linspace(0.0, 1.0, fine + 1)
    z = rng.standard_normal((20000, fine)) * math.sqrt(dt / fine)
    w = np.concatenate((np.zeros((20000, 1)), np.cumsum(z, axis=1)), axis=1)
    bridge = a + (b - a) * s + w - s * w[:, -1:]
    survived = bridge.min(axis=1) > 0.0
    weight = math.exp(survival_log(np.array([[a, b]]), np.zeros(1), 0.0, math.inf, dt)[0, 0])
    assert weight == pytest.approx(1 - math.exp(-2 * a * b / dt), rel=1e-12)
    # the discrete monitor misses a few crossings, so the oracle sits slightly high
    assert survived.mean() >= weight - 3 * math.sqrt(weight * (1 - weight) / survived.size)
    assert survived.mean() - weight < 0.02


def test_survival_weight_upper_barrier_and_shifts():
    vals = np.array([[0.0, 0.02, 0.01]])
    out = survival_log(vals, np.array([0.0, 0.97, 5.0]), -0.03, 1.0, 0.001)
    lo = math.log1p(-math.exp(-2 * 0.03 * 0.05 / 0.001)) + math.log1p(
        -math.exp(-2 * 0.05 * 0.04 / 0.001)
    )
    hi = math.log1p(-math.exp(-2 * 0.03 * 0.01 / 0.001)) + math.log1p(
        -math.exp(-2 * 0.01 * 0.02 / 0.001)
    )
    assert out[0, 0] == pytest.approx(lo, rel=1e-12)
    assert out[0, 1] == pytest.approx(hi, rel=1e-12)
    assert out[0, 2] == 0.0


def test_grid_monitor_overestimates_half_line_kernel():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(35), default_params(INF))
    q = KernelQuery(0.2, 0.2, 0.5)
    grid = kernel_mc(q, w, 2000, np.random.default_rng(36), monitor="grid")
    bridge = kernel_mc(q, w, 2000, np.random.default_rng(36), monitor="bridge")
    assert bridge.mean < grid.mean
    with pytest.raises(ParameterError):
        kernel_mc(q, w, 16, monitor="none")


def test_half_line_kernel_resolution_independent():
    # the survival weight removes the sqrt(dt) bias of grid monitoring
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(37), default_params(INF))
    q = KernelQuery(0.3, 0.3, 0.5)
    coarse = kernel_mc(q, w, 8000, np.random.default_rng(38), steps_per_unit=128)
    fine = kernel_mc(q, w, 8000, np.random.default_rng(39), steps_per_unit=2048)
    assert abs(combined_z(coarse, fine)) < 3


# ----------------------------------------------------------------- traces ---


def test_trace_limit_examples():
    assert trace_x_max(1.0) == pytest.approx(20.26, abs=0.01)
    assert trace_x_max(0.5) == pytest.approx(39.13, abs=0.01)
    t = 1.0
    tail = math.exp(-t * trace_x_max(t) / 2) / math.sqrt(2 * math.pi * t) * 2 / t
    assert tail < 1e-4 * math.sqrt(2 / math.pi)


def test_simpson_nodes_exact_for_cubics():
    g = simpson_nodes(0.0, 2.0, 0.1, 0.01)
    x = g.nodes
    assert x[0] == 0.0 and x[-1] >= 2.0 - 1e-12
    assert np.allclose(np.diff(g.cells), 10)
    hi = x[-1]
    assert np.dot(g.weights, x ** 3 - x) == pytest.approx(hi ** 4 / 4 - hi ** 2 / 2, rel=1e-12)


def test_simpson_nodes_even_interval_count():
    g = simpson_nodes(0.3, 1.0, 0.25, 0.05)
    assert (g.cells.size - 1) % 2 == 0 and g.nodes[0] == pytest.approx(0.3)


def test_trace_of_empty_window_is_zero():
    w = sample_white_noise(1 / 256, 20.0, np.random.default_rng(19))
    assert trace_mc(1.0, SpectralWindow(-2.0, -1.0), w, 64).mean == 0.0
    assert trace_mc_wavg(1.0, SpectralWindow(-2.0, -1.0)).mean == 0.0


def test_deterministic_trace_matches_excursion_area_transform():
    w = sample_white_noise(1 / 256, 24.0, np.random.default_rng(20), default_params(INF))
    tr = trace_mc(1.0, FULL_WINDOW, w, 2000, rng=np.random.default_rng(21))
    ref = expected_trace_excursion(1.0, INF, 20000, n_grid=1024, rng=np.random.default_rng(22))
    assert abs(combined_z(tr, ref)) < 3
    assert tr.mean > 0


def test_trace_is_nonnegative_for_random_noise():
    rng = np.random.default_rng(23)
    for _ in range(3):
        w = sample_white_noise(1 / 256, 24.0, rng)
        tr = trace_mc(1.0, FULL_WINDOW, w, 200, x_step=0.1, rng=rng)
        assert tr.mean > -3 * tr.stderr


def test_okounkov_closed_form_matches_airy_density():
    for t in (0.5, 1.0, 2.0):
        assert okounkov_trace(t) == pytest.approx(airy_density_trace(t), rel=1e-9)
    assert okounkov_trace(1.0) == pytest.approx(0.8062, abs=5e-5)


def test_expected_trace_small_time_limit():
    est = expected_trace_excursion(0.01, INF, 2000, n_grid=256, rng=np.random.default_rng(24))
    assert est.mean * 0.01 ** 1.5 / math.sqrt(2 / math.pi) == pytest.approx(1.0, abs=1e-3)


def test_expected_trace_from_functionals_deterministic_limit():
    area = np.array([0.5, 0.7])
    l2 = np.array([1.0, 1.4])
    est = expected_trace_from_functionals(area, l2, 1.0, INF)
    assert est.mean == pytest.approx(math.sqrt(2 / math.pi) * np.mean(np.exp(-area / 2)))


def test_log_moment_scales_cubically():
    area, l2 = excursion_functionals(20000, n_grid=1024, rng=np.random.default_rng(25))
    for t in (1.0, 2.0):
        s = t ** 1.5
        inner = np.exp(-0.5 * s * area + 0.25 * s * l2)
        se = inner.std(ddof=1) / math.sqrt(inner.size) / inner.mean()
        assert abs(math.log(inner.mean()) - t ** 3 / 96) < 3 * se


def test_gaussian_identity_moments():
    x = gaussian_identity_sample(20000, n_grid=1024, rng=np.random.default_rng(26))
    assert_mean_within(x, 0.0)
    assert abs(x.var(ddof=1) / (1 / 12) - 1) < 0.1
    assert normality_test(x, 0.0, 1 / 12) > 0.01


# -------------------------------------------------------------- semigroup ---

SG_POINTS = (0.5, 1.5, 2.5)


def test_semigroup_deterministic():
    w = sample_white_noise(1 / 128, 16.0, np.random.default_rng(27), default_params(INF))
    rep = semigroup_residual(0.5, 0.5, FULL_WINDOW, w, 32, points=SG_POINTS, z_step=0.2,
                             replicates=20, rng=np.random.default_rng(28), steps_per_unit=512)
    assert rep.residual.shape == (3, 3) and rep.replicates == 20
    assert rep.passes(3.0), rep.z_scores


def test_semigroup_identity_second_time():
    w = sample_white_noise(1 / 128, 16.0, np.random.default_rng(29))
    rep = semigroup_residual(0.5, 0.0, FULL_WINDOW, w, 32, points=SG_POINTS,
                             replicates=20, rng=np.random.default_rng(30), steps_per_unit=512)
    assert rep.passes(3.5), rep.z_scores


def test_semigroup_on_bounded_window():
    w = sample_white_noise(1 / 128, 16.0, np.random.default_rng(31), default_params(INF))
    rep = semigroup_residual(0.5, 0.5, SpectralWindow(0.0, 3.0), w, 32, points=SG_POINTS,
                             z_step=0.2, replicates=20, rng=np.random.default_rng(32),
                             steps_per_unit=512)
    assert rep.passes(3.0), rep.z_scores


def test_semigroup_rejects_negative_time():
    w = sample_white_noise(1 / 128, 4.0, np.random.default_rng(33))
    with pytest.raises(ParameterError):
        semigroup_residual(0.5, -0.1, FULL_WINDOW, w, 8)
