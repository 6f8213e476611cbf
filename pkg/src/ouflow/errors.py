"""Exception hierarchy.

Validation problems (bad input, malformed configuration) derive from
``ValidationError``; everything raised because a computation could not be
completed to the requested accuracy derives from ``NumericalError``.  The
command line maps the two families to distinct exit codes.
"""

from __future__ import annotations

import numpy as np


class OuflowError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OuflowError, ValueError):
    """Invalid arguments or configuration."""


class NumericalError(OuflowError, ArithmeticError):
    """A numerical procedure failed."""


class CoefficientError(NumericalError):
    """A coefficient signal produced non-finite values."""


class ConvergenceError(NumericalError):
    """An iterative refinement did not reach its tolerance."""


class NearSingularGramError(NumericalError):
    """The Gram matrix failed its Cholesky factorization.

    ``fallback`` holds the leading-order replacement ``(t - s) * Id``.
    """

    def __init__(self, message: str, fallback: np.ndarray):
        super().__init__(message)
        self.fallback = fallback


class DomainTruncationError(NumericalError):
    """A field does not decay inside the inner half of the periodic box."""


class OutOfBoxError(NumericalError):
    """The affine pullback maps the inner half-box outside the box."""


class DivergenceError(NumericalError):
    """Picard iterates blew up."""


class NonContractionError(NumericalError):
    """Picard iteration failed to contract; shrink the horizon."""


class FitQualityError(NumericalError):
    """A least-squares slope fit was not reliable."""
