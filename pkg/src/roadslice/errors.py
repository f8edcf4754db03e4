"""Exception types shared across the package."""


class RoadSliceError(Exception):
    """Base class for package-specific failures."""


class TraceParseError(RoadSliceError):
    """Malformed trace or event CSV; carries the offending row/column."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateMetricError(RoadSliceError):
    """A metric's training series is all zero, so it cannot be normalized."""


class InsufficientHistoryError(RoadSliceError):
    """Requested a lookback window that starts before the trace begins."""


class EmptyTrainingSetError(RoadSliceError):
    """No usable training windows (e.g. every window overlaps an event)."""


class TrainingDivergedError(RoadSliceError):
    """Loss became non-finite during training."""


class DegenerateLabelsError(RoadSliceError):
    """A computation requires both classes (or at least one positive)."""


class NoEmergencyError(RoadSliceError):
    """Tried to build an emergency-slice instance from a non-event."""


class SearchSpaceTooLargeError(RoadSliceError):
    """Brute-force enumeration would exceed the configured candidate cap."""


class InvalidComparisonError(RoadSliceError):
    """Compared two schedule runs that are not based on the same scenario."""


class ModelFormatError(RoadSliceError):
    """Model container is corrupt or has an unsupported format version."""


class EmptyCdfError(RoadSliceError):
    """No latency samples available for the requested slice."""


class StageError(RoadSliceError):
    """A pipeline stage failed; names the stage and carries the cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
