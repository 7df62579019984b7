"""Transfer-learning pupil-patch classifier with a compact student export."""

from .dataset import (
    AnnotatedImage,
    DatasetError,
    PatchDataset,
    build_patch_dataset,
    extract_balanced_patches,
    read_annotations,
    tile_origins,
)
from .export import ExportRefusedError, StudentExport, export_student, verify_fixtures
from .transfer import (
    BackboneUnavailableError,
    EpochStats,
    TrainRun,
    TransferResult,
    build_model,
    train_transfer,
)

__version__ = "0.1.0"
