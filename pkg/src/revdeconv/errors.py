"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Tensor or layer dimensions do not agree."""


class FixedPointRangeError(OverflowError):
    """A real value does not fit the 32-bit fixed-point range."""


class FormatError(ValueError):
    """A binary file or config file is malformed."""


class InfeasibleDesignError(ValueError):
    """A design point violates on-chip resource limits."""


class DegenerateBandwidthError(ValueError):
    """Kernel bandwidth estimate collapsed to zero."""
