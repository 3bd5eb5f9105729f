"""Statistical checks: spectral moments, corner-trace covariances, normality
and the agreement between matrix power traces and edge exponential traces.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import comb

from .ensemble import FULL_WINDOW, default_params, restrict_to_window, sample_gaussian_beta
from .exceptions import ParameterError
from .montecarlo import McEstimate, combined_z
from .spectral import (
    MAX_SMALL_POWER,
    edge_spectrum,
    eigen_tridiagonal,
    exp_edge_trace,
    power_index,
    power_traces,
    scaled_power_trace,
)
from .streams import as_generator, check_positive, check_positive_int

__all__ = [
    "MomentReport",
    "CovarianceReport",
    "TraceAgreementReport",
    "semicircle_limit_moment",
    "spectral_moment_samples",
    "empirical_spectral_moment",
    "moment_report",
    "clt_covariance_predicted",
    "corner_trace_samples",
    "covariance_with_jackknife",
    "clt_covariance_empirical",
    "normality_test",
    "two_sample_test",
    "trace_pair_samples",
    "trace_agreement",
    "trace_agreement_decay",
    "within_tolerance",
]


@dataclass(frozen=True)
class MomentReport:
    k: int
    empirical: McEstimate
    predicted: float

    @property
    def z_score(self):
        return self.empirical.z_score(self.predicted)


@dataclass(frozen=True)
class CovarianceReport:
    alpha: float
    alpha_prime: float
    k: int
    k_prime: int
    empirical: float
    stderr: float
    predicted: float
    n_samples: int

    @property
    def z_score(self):
        return (self.empirical - self.predicted) / self.stderr


def within_tolerance(estimate, stderr, predicted, n_se=3.0, rel=0.0):
    """``|estimate - predicted| <= max(n_se * stderr, rel * |predicted|)``."""
    return abs(estimate - predicted) <= max(n_se * stderr, rel * abs(predicted))


# ---------------------------------------------------------- semicircle ---


def semicircle_limit_moment(k):
    """``k``-th moment of the semicircle law on ``[-2, 2]``."""
    k = check_positive_int("k", k)
    if k % 2:
        return 0.0
    return float(comb(k, k // 2, exact=True)) / (k // 2 + 1)


def spectral_moment_samples(beta, big_n, ks, n_matrices, rng=None):
    """Per-matrix ``(1/N) Trace((M/sqrt N)**k)``, shape ``(n_matrices, len(ks))``."""
    ks = [check_positive_int("k", k) for k in np.atleast_1d(ks)]
    kmax = max(ks)
    if kmax > MAX_SMALL_POWER:
        raise ParameterError(f"k = {kmax} exceeds {MAX_SMALL_POWER}")
    rng = as_generator(rng)
    out = np.empty((n_matrices, len(ks)))
    scale = np.array([big_n ** (k / 2.0 + 1.0) for k in ks])
    for r in range(n_matrices):
        m = sample_gaussian_beta(big_n, beta, rng)
        tr = power_traces(m.diag, m.offdiag, kmax)
        out[r] = tr[np.array(ks) - 1] / scale
    return out


def empirical_spectral_moment(beta, big_n, k, n_matrices, rng=None):
    return McEstimate.from_samples(spectral_moment_samples(beta, big_n, [k], n_matrices, rng)[:, 0])


def moment_report(k, samples):
    return MomentReport(int(k), McEstimate.from_samples(samples), semicircle_limit_moment(k))


# ----------------------------------------------------------------- CLT ---


def clt_covariance_predicted(alpha, alpha_prime, k, k_prime, s_a, s_xi):
    """Limiting covariance of centered corner traces."""
    k = check_positive_int("k", k)
    k_prime = check_positive_int("k_prime", k_prime)
    for name, a in (("alpha", alpha), ("alpha_prime", alpha_prime)):
        if not 0.0 < a <= 1.0:
            raise ParameterError(f"{name} must lie in (0, 1], got {a}")
    if (k - k_prime) % 2:
        return 0.0
    scale = min(alpha, alpha_prime) ** ((k + k_prime) / 2.0) * 2.0 * k * k_prime / (k + k_prime)
    if k % 2:
        return scale * s_a ** 2 * comb(k - 1, (k - 1) // 2, exact=True) * comb(
            k_prime - 1, (k_prime - 1) // 2, exact=True
        )
    return scale * s_xi ** 2 * comb(k, k // 2, exact=True) * comb(k_prime, k_prime // 2, exact=True)


def corner_trace_samples(beta, big_n, cases, n_matrices, rng=None):
    """Traces ``Trace((M_{floor(alpha N)} / sqrt N)**k)`` of shared samples.

    Parameters
    ----------
    cases : sequence of (alpha, k)
        Corner fraction and power for each column.

    Returns
    -------
    ndarray, shape ``(n_matrices, len(cases))``
    """
    rng = as_generator(rng)
    sizes = [max(1, int(math.floor(a * big_n))) for a, _ in cases]
    kmax = max(int(k) for _, k in cases)
    out = np.empty((n_matrices, len(cases)))
    for r in range(n_matrices):
        m = sample_gaussian_beta(big_n, beta, rng)
        cache = {}
        for j, ((_, k), size) in enumerate(zip(cases, sizes)):
            if size not in cache:
                cache[size] = power_traces(m.diag[:size], m.offdiag[: size - 1], kmax)
            out[r, j] = cache[size][int(k) - 1] / big_n ** (int(k) / 2.0)
    return out


def covariance_with_jackknife(x, y):
    """Sample covariance (ensemble-mean centering) and its jackknife error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3:
        raise ParameterError("need at least 3 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    cov = float(np.sum(xc * yc) / (n - 1))
    # leave-one-out covariances in closed form
    sxy = np.sum(xc * yc)
    loo = (sxy - xc * yc * n / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return cov, se


def clt_covariance_empirical(beta, big_n, alpha, alpha_prime, k, k_prime, n_matrices, rng=None,
                             samples=None):
    """Covariance of two centered corner traces over the ensemble."""
    if samples is None:
        samples = corner_trace_samples(beta, big_n, [(alpha, k), (alpha_prime, k_prime)], n_matrices, rng)
    cov, se = covariance_with_jackknife(samples[:, 0], samples[:, 1])
    p = default_params(beta)
    pred = clt_covariance_predicted(alpha, alpha_prime, k, k_prime, p.s_a, p.s_xi)
    return CovarianceReport(alpha, alpha_prime, k, k_prime, cov, se, pred, samples.shape[0])


# ----------------------------------------------------------- normality ---


def normality_test(samples, mu, sigma2):
    """One-sample Kolmogorov-Smirnov p-value against ``Normal(mu, sigma2)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ParameterError("normality_test needs at least 100 samples")
    if not sigma2 > 0:
        raise ParameterError("sigma2 must be positive")
    return float(stats.kstest(x, "norm", args=(mu, math.sqrt(sigma2))).pvalue)


def two_sample_test(a, b):
    """Two-sample Kolmogorov-Smirnov p-value."""
    return float(stats.ks_2samp(np.asarray(a).ravel(), np.asarray(b).ravel()).pvalue)


# ------------------------------------------------------ trace agreement ---


@dataclass(frozen=True, eq=False)
class TraceAgreementReport:
    """Per-matrix power traces and edge exponential traces at one ``N``."""

    big_n: int
    t: float
    power: np.ndarray
    edge: np.ndarray
    power_mean: McEstimate = field(init=False)
    edge_mean: McEstimate = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "power_mean", McEstimate.from_samples(self.power))
        object.__setattr__(self, "edge_mean", McEstimate.from_samples(self.edge))

    @property
    def mean_abs_difference(self):
        return float(np.mean(np.abs(self.power - self.edge)))

    @property
    def abs_difference(self):
        return McEstimate.from_samples(np.abs(self.power - self.edge))

    @property
    def z_means(self):
        """Standardized gap between the two ensemble means (treated as independent)."""
        return combined_z(self.power_mean, self.edge_mean)


def trace_pair_samples(beta, big_n, t, window=FULL_WINDOW, n_matrices=1, rng=None):
    """``(scaled_power_trace, exp_edge_trace)`` for each sampled matrix."""
    check_positive("t", t)
    if power_index(t, big_n) < 2:
        raise ParameterError("trace agreement needs floor(T N^(2/3)) >= 2")
    rng = as_generator(rng)
    out = np.empty((n_matrices, 2))
    for r in range(n_matrices):
        m = restrict_to_window(sample_gaussian_beta(big_n, beta, rng), window)
        eig = eigen_tridiagonal(m)
        out[r, 0] = scaled_power_trace(eig, big_n, t)
        out[r, 1] = exp_edge_trace(edge_spectrum(eig, big_n), t)
    return out


def trace_agreement(beta, big_n, t, window=FULL_WINDOW, n_matrices=500, rng=None, samples=None):
    if samples is None:
        samples = trace_pair_samples(beta, big_n, t, window, n_matrices, rng)
    return TraceAgreementReport(int(big_n), float(t), samples[:, 0], samples[:, 1])


def trace_agreement_decay(reports):
    """Whether the mean absolute difference strictly decreases along ``reports``."""
    diffs = [r.mean_abs_difference for r in reports]
    return all(b < a for a, b in zip(diffs, diffs[1:]))
