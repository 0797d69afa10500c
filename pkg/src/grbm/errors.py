"""Exception hierarchy.

Numeric failures (divergence, blow-up, singular systems) derive from
``NumericalError`` so that the command line runner can map them onto a
single exit status.
"""


class GRBMError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(GRBMError, ValueError):
    """An argument is outside its admissible range."""


class DimensionError(GRBMError, ValueError):
    """Arrays have inconsistent shapes (structural, not an invariant violation)."""


class InvalidDataError(GRBMError, ValueError):
    """Reflection data violate one or more standing assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(GRBMError, ArithmeticError):
    """Base class for numerical failures."""


class SingularityError(NumericalError):
    """A matrix that has to be inverted is singular."""


class SpanError(NumericalError):
    """Rows of the normal matrix do not span the ambient space."""


class NonIntegrableError(NumericalError):
    """A density (or integrand) fails the tail-decay test."""


class BlowUpError(NumericalError):
    """A simulated path left the admissible box or became non-finite."""


class HorizonError(NumericalError):
    """A truncated infinite-horizon integral is not dominated by its tail bound."""


class GridBoundaryError(NumericalError):
    """A supremum over a tabulated grid is attained on the boundary."""


class SingularStartError(NumericalError):
    """An ODE that should leave minus infinity fails to do so on the first cell."""


class StencilUnderflowError(NumericalError):
    """A finite-difference stencil reached a region of numerically zero density."""


class IterationDivergenceError(NumericalError):
    """A fixed-point iteration failed to contract."""


class RegularityError(NumericalError):
    """No admissible slope was found for a potential."""
