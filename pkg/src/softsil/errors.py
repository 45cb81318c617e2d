"""Exception hierarchy shared across the package.

Two top-level categories so the CLI can map failures to exit codes:
configuration problems (bad flags, invalid specs, out-of-range
parameters) and numeric/runtime problems (singular projections,
non-convergent iterations, non-finite values).
"""


class SoftsilError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SoftsilError):
    """Invalid user-supplied configuration (bad spec string, parameter range, flags)."""


class NonDifferentiableConfigError(ConfigurationError):
    """A gradient was requested for a configuration with no usable derivative."""


class ObjParseError(ConfigurationError):
    """Malformed Wavefront OBJ input. Carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class NumericError(SoftsilError):
    """Runtime numeric failure (non-convergence, overflow into NaN, ...)."""


class SingularProjectionError(NumericError):
    """A vertex landed on (or behind) the camera plane during projection."""
