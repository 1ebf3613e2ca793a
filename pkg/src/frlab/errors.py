"""Exception types raised across the package."""

from __future__ import annotations


class FrlabError(Exception):
    """Base class for all package errors."""


class NumericFailure(FrlabError):
    """A decomposition did not converge."""

    def __init__(self, message: str, shape: tuple[int, ...] | None = None):
        self.shape = shape
        if shape is not None:
            message = f"{message} (shape={shape})"
        super().__init__(message)


class ContractViolation(FrlabError, ValueError):
    """An input broke a documented precondition."""


class NotPSDError(ContractViolation):
    pass


class SingularMatrixError(FrlabError, ValueError):
    pass


class ModelDegenerateError(FrlabError, ValueError):
    """A factor model fails one of its full-rank assumptions."""

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        msg = f"model degenerate: {assumption}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnsupportedSizeError(FrlabError):
    """The requested quantity needs a dense p x p object above the size cap."""


class ConfigError(FrlabError, ValueError):
    """Experiment configuration could not be parsed or validated."""
