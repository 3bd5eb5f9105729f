"""Monte Carlo laboratory for edge statistics of tridiagonal beta-ensembles.

Modules
-------
ensemble     random tridiagonal matrices and spectral windows
spectral     eigensolver, power traces and edge-scaled spectra
paths        lattice bridges, path transforms, Brownian paths, local times
airy         stochastic Airy semigroup kernel and trace estimators
verify       moment, covariance, normality and trace-agreement checks
cli          experiment configuration and command line interface
"""

from .ensemble import (
    EnsembleParams,
    SpectralWindow,
    TridiagonalMatrix,
    default_params,
    restrict_to_window,
    sample_chi,
    sample_gaussian_beta,
)
from .exceptions import AiryLabError, ConfigError, ContractError, NumericalError, ParameterError
from .montecarlo import McEstimate
from .streams import make_stream

__version__ = "0.1.0"

__all__ = [
    "AiryLabError",
    "ConfigError",
    "ContractError",
    "EnsembleParams",
    "McEstimate",
    "NumericalError",
    "ParameterError",
    "SpectralWindow",
    "TridiagonalMatrix",
    "default_params",
    "make_stream",
    "restrict_to_window",
    "sample_chi",
    "sample_gaussian_beta",
]
