"""
errors.py — Exception hierarchy shared by the simulator, trainer and CLI.

Library code raises these; cli.py maps them to process exit codes.
"""


class FlockingError(Exception):
    """Base class for all uav_flocking errors."""

    exit_code: int = 4


class ConfigError(FlockingError):
    """Run configuration is missing, unparsable, or violates a field invariant."""

    exit_code = 2


class CheckpointError(FlockingError):
    """Checkpoint is corrupted, has an unknown version, or mismatches the config."""

    exit_code = 3


class SpawnError(FlockingError):
    """Rejection sampling could not place followers with the required spacing."""


class ActionRangeError(FlockingError, ValueError):
    """An action component lies outside its closed bounds."""


class ShapeError(FlockingError, ValueError):
    """Array shapes passed to a layer or encoder do not match."""


class NonFiniteError(FlockingError, ArithmeticError):
    """A NaN or infinity appeared in activations, gradients or losses."""


class MetricsError(FlockingError):
    """Episode logs do not cover the agents / episodes / steps a metric needs."""


class TrajectoryFormatError(FlockingError):
    """A trajectory CSV is malformed; `line` is the 1-based file line number."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
