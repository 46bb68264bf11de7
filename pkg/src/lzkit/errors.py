"""Exception types raised across the toolkit."""


class LZError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(LZError, ValueError):
    """Model parameters outside their physical domain."""


class IntegrationError(LZError, RuntimeError):
    """The adaptive integrator could not advance.

    Attributes
    ----------
    t_reached : float
        Time the integration had reached when the step size underflowed.
    """

    def __init__(self, message, t_reached):
        super().__init__(f"{message} (reached t={t_reached:.6g})")
        self.t_reached = t_reached


class InfeasibleInputError(LZError, ValueError):
    """A pair of independent unknowns inconsistent with the exponents."""


class AdiabaticUnderflowError(LZError, ArithmeticError):
    """Y underflowed the representable floor."""


class UndefinedRotationError(LZError, ValueError):
    """Rotated elements need nonvanishing S31 and S32."""


class SingularRecoveryError(LZError, ArithmeticError):
    """Phase recovery hit a vanishing denominator."""


class MappingConsistencyError(LZError, AssertionError):
    """Closed-form chain mapping disagrees with direct multiplication."""


class UnsupportedSizeError(LZError, ValueError):
    """Operation only defined for a particular chain size."""


class DegeneracyError(LZError, ValueError):
    """Fit refused because the model is degenerate at this parameter choice."""


class InsufficientDataError(LZError, ValueError):
    """Not enough converged rows for the requested fit."""
