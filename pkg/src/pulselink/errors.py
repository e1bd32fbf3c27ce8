"""Exception types shared across the toolkit."""


class PulselinkError(Exception):
    """Base class for all toolkit errors."""


class GridError(PulselinkError):
    """Invalid time grid or mismatched grids between operands."""


class PulseError(PulselinkError):
    """Invalid pulse data (non-finite samples, bad norm, ...)."""


class StabilityError(PulselinkError):
    """Requested integration step violates the fixed-step stability guard."""


class InversionError(PulselinkError):
    """Target pulse cannot be realised by the drive-envelope inversion."""


class AlphabetConstraintError(PulselinkError):
    """Constructed symbol alphabet violates one or more of its constraints.

    Carries the full constraint report so callers can inspect residuals.
    """

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        super().__init__(f"alphabet constraints violated: {failed}")


class ConfigError(PulselinkError):
    """Invalid run configuration (bad values, unsound protocol timing)."""
