"""Exception hierarchy shared by the solver, cavity and CLI layers."""


class CapcavError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(CapcavError, ValueError):
    """Invalid or degenerate fiber geometry."""


class TrialIndexError(CapcavError, ValueError):
    """Trial effective index outside the open guidance interval."""


class NoGuidedMode(CapcavError):
    """No sign change of the dispersion determinant: fiber below cutoff."""


class AmbiguousBracket(CapcavError):
    """Two roots fall inside one scan step; the scan step must be refined."""


class NoStopband(CapcavError):
    """Spectrum has no region of suppressed transmission."""


class NoDefectPeak(CapcavError):
    """Stop band found but it has no interior transmission peak."""


class FitFailed(CapcavError):
    """Not enough decaying envelope maxima for an exponential fit."""


class NoConvergence(CapcavError):
    """Calibration did not meet its targets within the iteration budget."""


class ConfigError(CapcavError):
    """Configuration parsing or validation failure.

    ``violations`` holds every problem found, not just the first one.
    """

    def __init__(self, violations, line=None):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        self.line = line
        super().__init__("; ".join(self.violations))


class ConfigSyntaxError(ConfigError):
    def __init__(self, message, line):
        super().__init__([f"line {line}: {message}"], line=line)


class OutputError(CapcavError):
    """Unusable plot or report input, or an output file that cannot be written."""
