"""Deterministic object-level copy-paste augmentation for 3D labeled volumes."""

from .errors import (
    DegenerateOutput,
    EmptyOrganSet,
    EmptyResult,
    FormatError,
    FullyClipped,
    NoTumorSource,
    ProtocolError,
    ShapeMismatch,
    TumorCPError,
)
from .instances import OrganVoxelSet, TumorInstance, extract_tumors, organ_voxel_set
from .io import CaseEntry, DatasetIndex, load_case, save_case
from .pipeline import (
    AugmentationRecord,
    Engine,
    PipelineConfig,
    dice,
    dice_standard,
    paste,
    sample_location,
    sample_pair,
)
from .rng import RngStream, derive_stream_id
from .transforms import (
    TransformConfig,
    TransformParams,
    apply_blur,
    apply_elastic,
    apply_gamma,
    apply_rigid,
    apply_transforms,
    sample_params,
)
from .volume import LabelMap, Spacing, Volume, resample_patch

__version__ = "0.1.0"
