"""Exception hierarchy shared across the pipeline."""


class RapdScreenError(Exception):
    """Base class for all pipeline errors."""


class ParameterError(RapdScreenError):
    """A caller violated an operation's preconditions."""


class LocalizationError(RapdScreenError):
    """A localizer could not produce a pupil estimate for a frame."""


class FitError(RapdScreenError):
    """Shape fitting failed (degenerate or insufficient data)."""


class MeasurementError(RapdScreenError):
    """Pupil sizing failed after exhausting the threshold sweep."""


class TraceUnusableError(RapdScreenError):
    """Too many frames of a sequence failed to yield a usable trace."""


class ExtractionError(RapdScreenError):
    """Labeled-patch extraction could not produce a balanced sample."""


class TrainingError(RapdScreenError):
    """Classifier training preconditions were not met."""


class WeightFileError(RapdScreenError):
    """A classifier weight file is malformed or inconsistent."""


class IngestionError(RapdScreenError):
    """A case directory or manifest could not be read."""
