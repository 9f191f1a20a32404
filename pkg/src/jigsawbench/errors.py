"""Exception types raised across the benchmark."""

from __future__ import annotations


class JigsawBenchError(Exception):
    """Base class for every error raised by this package."""


class CodeError(JigsawBenchError, ValueError):
    """A jigsaw code string could not be parsed."""


class BadLength(CodeError):
    pass


class BadDigit(CodeError):
    pass


class UnsupportedValue(CodeError):
    pass


class GeometryError(JigsawBenchError, ValueError):
    """An offset or construction produced a degenerate polygon."""


class ClearanceTooLarge(JigsawBenchError, ValueError):
    pass


class NoBasePlate(JigsawBenchError):
    pass


class PlacementInfeasible(JigsawBenchError):
    pass


class GripperOccupied(JigsawBenchError):
    pass


class GripperEmpty(JigsawBenchError):
    pass


class BackgroundMissing(JigsawBenchError):
    pass


class EmptyBox(JigsawBenchError):
    pass


class OutOfBounds(JigsawBenchError):
    pass


class NoFragmentsPlaced(JigsawBenchError):
    pass


class NoAttempts(JigsawBenchError):
    pass


class IncompatibleTasks(JigsawBenchError):
    pass


class ConfigError(JigsawBenchError, ValueError):
    """Invalid run configuration, profile file, or stage registry."""


class ReportError(JigsawBenchError):
    """A stored report failed its self-consistency check."""


class StageError(JigsawBenchError):
    """A pipeline stage raised; ``stage`` names the failing function."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} stage failed: {cause!r}")
        self.stage = stage
        self.cause = cause


class TaskError(JigsawBenchError):
    """A task aborted mid-run. ``partial`` holds the metrics gathered so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
