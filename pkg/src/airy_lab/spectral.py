"""Tridiagonal eigensolver and the finite-N trace engine.

The central object is the operator

    Mcal(T, A, N) = 1/2 [ P**k + P**(k-1) ],   P = M_{N;A} / (2 sqrt N),
    k = floor(T N**(2/3)),

whose trace and bilinear forms approximate the stochastic Airy semigroup.
High powers are evaluated eigenvalue by eigenvalue in the log domain.
"""

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from ._ql import ql_implicit
from .ensemble import TridiagonalMatrix
from .exceptions import ContractError, NumericalError, ParameterError
from .streams import check_positive, check_positive_int

__all__ = [
    "EigenDecomposition",
    "EdgeSpectrum",
    "GridFunction",
    "PARITIES",
    "eigen_tridiagonal",
    "power_index",
    "power_weights",
    "scaled_power_trace",
    "edge_spectrum",
    "exp_edge_trace",
    "bulk_contribution",
    "project_function",
    "bilinear_form",
    "small_power_trace",
    "power_traces",
]

PARITIES = ("both", "even", "odd")
MAX_SMALL_POWER = 64


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenvalues in descending order and, optionally, eigenvectors.

    ``vectors[:, i]`` is the unit eigenvector of ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray = None

    @property
    def n(self):
        return self.values.size

    @property
    def has_vectors(self):
        return self.vectors is not None


@dataclass(frozen=True, eq=False)
class EdgeSpectrum:
    """Edge-scaled eigenvalues ``N**(1/6) (mu - 2 sqrt N)``, descending."""

    n: int
    scaled: np.ndarray


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell averages of a test function, scaled as a lattice vector."""

    n: int
    values: np.ndarray


def eigen_tridiagonal(m, want_vectors=False):
    """Full spectrum of a symmetric tridiagonal matrix by implicit QL.

    Raises
    ------
    NumericalError
        When some eigenvalue needs more than 50 QL sweeps; ``index``
        identifies it.
    """
    if not isinstance(m, TridiagonalMatrix):
        raise ContractError("expected a TridiagonalMatrix")
    n = m.n
    d = m.diag.copy()
    e = np.zeros(n)
    e[: n - 1] = m.offdiag
    zt = np.eye(n) if want_vectors else np.empty((1, 1))
    failed = ql_implicit(d, e, zt, want_vectors)
    if failed >= 0:
        raise NumericalError(f"QL iteration did not converge for eigenvalue {failed}", index=int(failed))
    order = np.argsort(-d, kind="stable")
    values = d[order]
    vectors = np.ascontiguousarray(zt[order]).T if want_vectors else None
    return EigenDecomposition(values, vectors)


def power_index(t, big_n):
    """Exact ``floor(t * big_n**(2/3))``.

    Floating point cube roots misround at perfect cubes
    (``1000**(2/3) < 100``), so the floor is settled in rational arithmetic.
    """
    t = check_positive("t", t)
    big_n = check_positive_int("big_n", big_n)
    target = Fraction(t) ** 3 * big_n ** 2
    k = max(int(math.floor(t * big_n ** (2.0 / 3.0))) - 1, 0)
    while (k + 1) ** 3 <= target:
        k += 1
    while k > 0 and k ** 3 > target:
        k -= 1
    return k


def _signed_power(r, k):
    """``r**k`` elementwise in the log domain, with ``0**0 = 1``."""
    mag = np.abs(r)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag)
    out = np.exp(k * logmag) if k > 0 else np.ones_like(r)
    if k % 2:
        out = np.where(r < 0, -out, out)
    return out


def power_weights(values, big_n, t, parity="both"):
    """Per-eigenvalue factors of the scaled power operator.

    ``both`` gives ``(r**k + r**(k-1)) / 2``; ``even`` and ``odd`` keep only
    the one of ``k``, ``k-1`` with that parity (no factor 1/2), so that
    ``even + odd == 2 * both``.
    """
    if parity not in PARITIES:
        raise ParameterError(f"parity must be one of {PARITIES}, got {parity!r}")
    k = power_index(t, big_n)
    if k == 0:
        raise ParameterError(f"t = {t} is too small for N = {big_n}: power index is 0")
    r = np.asarray(values, dtype=float) / (2.0 * math.sqrt(big_n))
    if parity == "both":
        return 0.5 * (_signed_power(r, k) + _signed_power(r, k - 1))
    even = k if k % 2 == 0 else k - 1
    return _signed_power(r, even if parity == "even" else 2 * k - 1 - even)


def scaled_power_trace(eig, big_n, t, parity="both"):
    """Trace of the scaled power operator for one matrix."""
    if eig.n > big_n:
        raise ParameterError("decomposition is larger than big_n")
    return float(np.sum(power_weights(eig.values, big_n, t, parity)))


def edge_spectrum(eig, big_n):
    big_n = check_positive_int("big_n", big_n)
    scaled = big_n ** (1.0 / 6.0) * (eig.values - 2.0 * math.sqrt(big_n))
    return EdgeSpectrum(big_n, scaled)


def exp_edge_trace(edge, t):
    """``sum_i exp(t * lambda_i / 2)`` over the edge-scaled spectrum."""
    t = check_positive("t", t)
    return float(np.sum(np.exp(0.5 * t * edge.scaled)))


def bulk_contribution(edge, t, cutoff):
    """Part of :func:`exp_edge_trace` from eigenvalues with ``lambda <= cutoff``."""
    t = check_positive("t", t)
    s = edge.scaled
    return float(np.sum(np.exp(0.5 * t * s[s <= cutoff])))


def project_function(f, big_n, rtol=1e-10):
    """Lattice vector of cell integrals of ``f``.

    Component ``i`` (1-based) is ``N**(1/6)`` times the integral of ``f``
    over ``[N**(-1/3) (N - i), N**(-1/3) (N - i + 1)]``.

    Raises
    ------
    NumericalError
        When adaptive quadrature reports any convergence problem on a cell;
        ``index`` is the 1-based cell.
    """
    big_n = check_positive_int("big_n", big_n)
    h = big_n ** (-1.0 / 3.0)
    out = np.empty(big_n)
    for i in range(1, big_n + 1):
        lo, hi = h * (big_n - i), h * (big_n - i + 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            res = integrate.quad(f, lo, hi, epsabs=1e-300, epsrel=rtol, limit=200, full_output=1)
        if len(res) > 3:
            raise NumericalError(f"quadrature failed on cell {i}: {res[3].splitlines()[0]}", index=i)
        out[i - 1] = big_n ** (1.0 / 6.0) * res[0]
    return GridFunction(big_n, out)


def bilinear_form(eig, big_n, t, f, g, parity="both"):
    """``f' Mcal g`` for lattice vectors ``f`` and ``g``."""
    if not eig.has_vectors:
        raise ContractError("bilinear_form needs eigenvectors; use want_vectors=True")
    fv = np.asarray(getattr(f, "values", f), dtype=float)
    gv = np.asarray(getattr(g, "values", g), dtype=float)
    if fv.shape != (eig.n,) or gv.shape != (eig.n,):
        raise ContractError("grid functions must match the matrix dimension")
    w = power_weights(eig.values, big_n, t, parity)
    return float(np.sum(w * (fv @ eig.vectors) * (gv @ eig.vectors)))


def power_traces(diag, offdiag, kmax):
    """``Trace(M**p)`` for ``p = 1..kmax`` by banded multiplication.

    ``diag`` and ``offdiag`` may carry leading batch dimensions. The band of
    ``M**p`` is held as ``band[..., K + o, i] = (M**p)[i, i + o]``.

    Returns
    -------
    ndarray, shape ``batch + (kmax,)``
    """
    kmax = check_positive_int("k", kmax)
    if kmax > MAX_SMALL_POWER:
        raise ParameterError(f"k = {kmax} exceeds the supported maximum {MAX_SMALL_POWER}")
    a = np.asarray(diag, dtype=float)
    b = np.asarray(offdiag, dtype=float)
    n = a.shape[-1]
    pad = kmax + 1
    apad = np.zeros(a.shape[:-1] + (n + 2 * pad,))
    bpad = np.zeros_like(apad)
    apad[..., pad : pad + n] = a
    bpad[..., pad : pad + n - 1] = b
    centre = kmax + 1
    band = np.zeros(a.shape[:-1] + (2 * kmax + 3, n))
    band[..., centre, :] = a
    band[..., centre + 1, : n - 1] = b
    band[..., centre - 1, 1:] = b
    traces = [band[..., centre, :].sum(axis=-1)]
    i = np.arange(n)
    for p in range(2, kmax + 1):
        nxt = np.zeros_like(band)
        for o in range(-min(p, n - 1), min(p, n - 1) + 1):
            j = i + o + pad
            nxt[..., centre + o, :] = (
                band[..., centre + o - 1, :] * bpad[..., j - 1]
                + band[..., centre + o, :] * apad[..., j]
                + band[..., centre + o + 1, :] * bpad[..., j]
            )
        band = nxt
        traces.append(band[..., centre, :].sum(axis=-1))
    return np.stack(traces, axis=-1)


def small_power_trace(m, k):
    """``Trace(M**k)`` without diagonalizing, for ``1 <= k <= 64``."""
    k = check_positive_int("k", k)
    if k > MAX_SMALL_POWER:
        raise ParameterError(f"k = {k} exceeds the supported maximum {MAX_SMALL_POWER}")
    return float(power_traces(m.diag, m.offdiag, k)[-1])
