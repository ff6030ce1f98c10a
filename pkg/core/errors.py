"""
Exception hierarchy shared by the analysis, simulation and learning modules.
"""


class DeliveryModelError(Exception):
    """Base class for every error raised by the core library."""


class DomainError(DeliveryModelError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class UnsupportedParameterError(DeliveryModelError):
    """The requested parameter region is not covered by the evaluation route."""


class DegenerateInputError(DeliveryModelError):
    """The input makes the quantity undefined (zero vector, zero-probability event)."""


class InfeasibleConfigurationError(DeliveryModelError):
    """No admissible transmission exists for the configuration."""


class ContractError(DeliveryModelError):
    """A caller-side precondition (shape, divisibility) was violated."""


class NumericalFailureError(DeliveryModelError):
    """A numerical procedure diverged or produced non-finite values."""
