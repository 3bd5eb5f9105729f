"""Exception types raised across the package."""


class AiryLabError(Exception):
    """Base class for all package errors."""


class ParameterError(AiryLabError, ValueError):
    """An argument is outside the domain of the operation."""


class NumericalError(AiryLabError, ArithmeticError):
    """An iterative or adaptive numerical routine failed to converge.

    Parameters
    ----------
    message : str
        Human readable description.
    index : int, optional
        Index of the offending item (eigenvalue, quadrature cell, ...).
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ContractError(AiryLabError, TypeError):
    """An input lacks data the operation requires (e.g. eigenvectors)."""


class ConfigError(AiryLabError, ValueError):
    """A configuration document is malformed or inconsistent."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line
