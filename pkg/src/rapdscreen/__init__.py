"""Automated RAPD screening: pupil localization, sizing, and reflex scoring."""

from .errors import (
    ExtractionError,
    FitError,
    IngestionError,
    LocalizationError,
    MeasurementError,
    ParameterError,
    RapdScreenError,
    TraceUnusableError,
    TrainingError,
    WeightFileError,
)
from .image import (
    EdgeMap,
    GradientField,
    GrayImage,
    canny,
    crop_patch,
    gaussian_blur,
    image_mean,
    morph,
    normalize_intensity,
    read_pgm,
    resize_bilinear,
    sobel_gradients,
    write_pgm,
)
from .ellipse import Ellipse, fit_ellipse_lsq
from .localize import (
    CurveSegment,
    PupilFit,
    StarburstConfig,
    else_localize,
    excuse_localize,
    extract_curved_segments,
    starburst_localize,
)
from .patches import (
    ClassifierModel,
    PatchSample,
    SplitSpec,
    classify_patch,
    extract_labeled_patches,
    load_classifier,
    patch_localize,
    save_classifier,
    split_samples,
    train_baseline_classifier,
)
from .sizing import (
    Circle,
    CropConfig,
    FrameMeasurement,
    HoughConfig,
    auto_hough,
    hough_circle,
    measure_frames,
    measure_sequence,
)
from .reflex import (
    RapdScore,
    ReflexSummary,
    ReflexTrace,
    StimInterval,
    assess_case,
    correlation_dissimilarity,
    median_filter_1d,
    moving_average,
    pupil_delta,
    rapd_index,
)
from .metrics import (
    ConfusionCounts,
    MetricsReport,
    RocCurve,
    confusion,
    metric_suite,
    roc_sweep,
    select_threshold,
)
from .synth import SimParams, TestCase, generate_case, radius_schedule, render_eye_frame
from .corpus import LoadedCase, generate_corpus, load_case, write_case
from .evaluate import RunConfig, assess_loaded_case, run_benchmark, train_baseline_from_corpus

__version__ = "0.1.0"
