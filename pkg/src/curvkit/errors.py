"""Exception hierarchy shared by every curvkit module."""


class CurvkitError(Exception):
    """Base class for library errors."""


class ConfigError(CurvkitError, ValueError):
    """Invalid construction parameters (domains, solver configs, CLI flags)."""


class RegionError(CurvkitError, ValueError):
    """Evaluation outside a valid region, or an empty region after shrinking."""


class ShapeError(CurvkitError, ValueError):
    """Incompatible coefficient shapes or domains."""


class DerivativeError(CurvkitError, ValueError):
    """A partial derivative cannot be formed (no exact rule, too few samples)."""


class NumericalError(CurvkitError, ArithmeticError):
    """Non-finite values, blow-up, or solver instability."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NotClosedError(CurvkitError, ValueError):
    """A form handed to the discrete primitive is not closed."""

    def __init__(self, defect, tolerance):
        super().__init__(
            f"form is not closed: max |d_D w| = {defect:.3e} exceeds tolerance {tolerance:.1e}"
        )
        self.defect = defect
        self.tolerance = tolerance
