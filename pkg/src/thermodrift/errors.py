"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the CLI maps it to.
"""


class ThermoDriftError(Exception):
    code = "error"
    exit_status = 2


class InputError(ThermoDriftError):
    """Malformed file, unknown unit, bad timestamps or similar."""

    code = "input"


class ConfigurationError(InputError):
    """A sensor configuration does not match the data it is applied to."""

    code = "configuration"


class SpecError(InputError):
    """Scenario or plant description violates its invariants."""

    code = "spec"


class StabilityError(SpecError):
    code = "stability"


class DomainError(InputError, ValueError):
    code = "domain"


class InsufficientDataError(ThermoDriftError):
    code = "insufficient_data"
    exit_status = 3


class DegenerateDataError(ThermoDriftError):
    """Design matrix is rank deficient (or a sensor column never moved)."""

    code = "degenerate"
    exit_status = 3

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class EmptyFrontError(DegenerateDataError):
    code = "empty_front"


class LeakageError(ThermoDriftError):
    """A validation scenario was also used for training."""

    code = "leakage"
    exit_status = 4


class CorrectionRangeError(ThermoDriftError):
    """Corrected setpoint would leave the stroke; ``fallback`` is the raw setpoint."""

    code = "range"

    def __init__(self, message, fallback):
        super().__init__(message)
        self.fallback = fallback


class NumericError(ThermoDriftError):
    code = "numeric"
    exit_status = 3
