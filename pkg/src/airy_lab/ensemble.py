"""Random symmetric tridiagonal matrices and the Gaussian beta-ensemble.

The matrix ``M`` has diagonal ``a(1..N)`` and off-diagonal ``b(1..N-1)``.
For the Gaussian beta-ensemble ``a(m) ~ N(0, 2/beta)`` and
``b(m) = chi_{beta m} / sqrt(beta)``, so ``b(m)`` is close to ``sqrt(m)``.
The fluctuation ``xi(m) = b(m) - sqrt(m)`` is never stored.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError
from .streams import as_generator, check_positive, check_positive_int

__all__ = [
    "EnsembleParams",
    "TridiagonalMatrix",
    "SpectralWindow",
    "FULL_WINDOW",
    "default_params",
    "sample_chi",
    "sample_gaussian_beta",
    "sample_tridiagonal",
    "restrict_to_window",
    "window_mask",
]


@dataclass(frozen=True)
class EnsembleParams:
    """Noise strengths of the diagonal and of the off-diagonal fluctuations.

    ``s_a`` is the limiting standard deviation of ``a(m)`` and ``s_xi`` that of
    ``xi(m)``. They must satisfy ``s_a**2 / 4 + s_xi**2 == 1 / beta``.
    ``beta = inf`` switches all noise off.
    """

    beta: float
    s_a: float
    s_xi: float

    def __post_init__(self):
        check_positive("beta", self.beta, allow_inf=True)
        if self.s_a < 0 or self.s_xi < 0:
            raise ParameterError("noise strengths must be nonnegative")
        lhs = self.s_a ** 2 / 4 + self.s_xi ** 2
        rhs = 1.0 / self.beta
        if not math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=0.0 if rhs else 1e-300):
            raise ParameterError(
                f"s_a^2/4 + s_xi^2 = {lhs!r} does not match 1/beta = {rhs!r}"
            )

    @property
    def is_deterministic(self):
        return math.isinf(self.beta)


def default_params(beta):
    """Noise strengths of the Gaussian beta-ensemble.

    >>> default_params(2.0)
    EnsembleParams(beta=2.0, s_a=1.0, s_xi=0.5)
    """
    beta = check_positive("beta", beta, allow_inf=True)
    if math.isinf(beta):
        return EnsembleParams(beta, 0.0, 0.0)
    s_xi = 1.0 / math.sqrt(2.0 * beta)
    return EnsembleParams(beta, 2.0 * s_xi, s_xi)


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix stored as its two nonzero bands."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or d.size < 1 or e.size != d.size - 1:
            raise ParameterError(
                f"need n >= 1 diagonal and n-1 off-diagonal entries, got {d.shape} and {e.shape}"
            )
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self):
        return self.diag.size

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def leading(self, size):
        """Leading principal ``size x size`` submatrix."""
        size = check_positive_int("size", size)
        if size > self.n:
            raise ParameterError(f"submatrix size {size} exceeds n = {self.n}")
        return TridiagonalMatrix(self.diag[:size], self.offdiag[: size - 1])

    def __eq__(self, other):
        if not isinstance(other, TridiagonalMatrix):
            return NotImplemented
        return np.array_equal(self.diag, other.diag) and np.array_equal(self.offdiag, other.offdiag)

    __hash__ = None


@dataclass(frozen=True)
class SpectralWindow:
    """Interval ``[lower, upper]`` of edge coordinates, intersected with ``[0, inf)``."""

    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ParameterError(f"invalid window [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def effective_lower(self):
        return max(self.lower, 0.0)

    @property
    def is_full(self):
        return self.effective_lower == 0.0 and math.isinf(self.upper)

    @property
    def is_empty(self):
        return self.upper < self.effective_lower

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.effective_lower) & (x <= self.upper)


FULL_WINDOW = SpectralWindow()


def sample_chi(a, rng=None, size=None):
    """Draw from the chi distribution with ``a`` degrees of freedom.

    Uses ``sqrt(Gamma(a/2, scale=2))``; ``a`` need not be an integer.
    """
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)) or np.any(~np.isfinite(a)):
        raise ParameterError("chi degrees of freedom must be positive and finite")
    rng = as_generator(rng)
    out = np.sqrt(rng.gamma(a / 2.0, 2.0, size=size))
    return float(out) if out.ndim == 0 else out


def sample_tridiagonal(n, diag_sampler, offdiag_sampler, rng=None):
    """Sample a matrix from user supplied entry laws.

    Parameters
    ----------
    n : int
    diag_sampler : callable
        ``diag_sampler(m, rng)`` returns the diagonal entries for the
        1-based indices ``m`` (an int array of length ``n``).
    offdiag_sampler : callable
        ``offdiag_sampler(m, rng)`` returns ``b(m)`` for ``m = 1..n-1``.
    """
    n = check_positive_int("n", n)
    rng = as_generator(rng)
    diag = np.asarray(diag_sampler(np.arange(1, n + 1), rng), dtype=float)
    off = np.asarray(offdiag_sampler(np.arange(1, n), rng), dtype=float)
    return TridiagonalMatrix(diag, off)


def sample_gaussian_beta(n, beta, rng=None):
    """Sample the ``n x n`` tridiagonal Gaussian beta-ensemble matrix."""
    n = check_positive_int("n", n)
    beta = check_positive("beta", beta)
    rng = as_generator(rng)
    diag = rng.normal(0.0, math.sqrt(2.0 / beta), size=n)
    off = np.sqrt(rng.gamma(beta * np.arange(1, n) / 2.0, 2.0)) / math.sqrt(beta)
    return TridiagonalMatrix(diag, off)


def window_mask(n, window):
    """Boolean mask of the indices kept by a window.

    Index ``i`` (1-based) is kept when ``(n - i + 1/2) / n**(1/3)`` lies in
    the window.
    """
    n = check_positive_int("n", n)
    i = np.arange(1, n + 1)
    return window.contains((n - i + 0.5) / np.cbrt(n))


def restrict_to_window(m, window):
    """Zero every entry whose row or column index falls outside the window."""
    if window.is_full:
        return m
    keep = window_mask(m.n, window)
    diag = np.where(keep, m.diag, 0.0)
    off = np.where(keep[:-1] & keep[1:], m.offdiag, 0.0)
    return TridiagonalMatrix(diag, off)
