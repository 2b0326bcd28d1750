"""Exception types shared across the package."""


class KernelOpError(Exception):
    """Base class for all package errors."""


class ShapeError(KernelOpError, ValueError):
    """Inputs have incompatible dimensions or lengths."""


class CapabilityError(KernelOpError, ValueError):
    """A derivative order beyond what is configured was requested."""


class ConfigurationError(KernelOpError, ValueError):
    """Invalid parameters or an unsupported problem setup."""


class NumericalError(KernelOpError, ArithmeticError):
    """A factorization failed even after the jitter ladder was exhausted."""
