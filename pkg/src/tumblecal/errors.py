"""Exception types raised by the calibration pipeline."""


class CalibrationError(Exception):
    """Base class for data/numerical failures (CLI exit code 2)."""


class InsufficientExcitationError(CalibrationError):
    """Least-squares system is singular or too ill-conditioned to invert.

    `direction` is the unit vector of the weakest-excited axis (eigenvector
    of the smallest eigenvalue of X'X).
    """

    def __init__(self, message, direction=None, condition_number=None):
        super().__init__(message)
        self.direction = direction
        self.condition_number = condition_number


class IncompleteExcitationError(CalibrationError):
    """Not every motor saw an excitation phase; `missing` lists indices."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class DegenerateTorqueModelError(CalibrationError):
    """Torque effectiveness matrix has numerical rank < 3."""


class HoverInfeasibleError(CalibrationError):
    """No sign of the candidate input vector satisfies the actuator bounds;
    the vehicle is very likely not capable of static hover."""


class NoThrustAuthorityError(CalibrationError):
    """The torque nullspace produces (numerically) no thrust."""


class ConfigError(CalibrationError):
    """Malformed configuration or input file; message names the field."""
