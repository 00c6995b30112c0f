"""Single-image camera calibration toolkit.

Horizon/field-of-view camera geometry, labeled crop generation from
panoramas, the 256-bin label codec, a kNN perceptual sensitivity measure
and horizon-based image retrieval.
"""

from .camera_model import (
    CameraCalibration,
    HorizonFeature,
    HorizonLine,
    ImageDims,
    calibration_from_slope_offset,
    focal_px_from_vfov,
    horizon_edge_intersections,
    midpoint_from_pitch,
    pitch_from_midpoint,
    project,
    rotation_from_angles,
    slope_offset_from_calibration,
    unproject_to_ground,
    vfov_from_focal_px,
)
from .errors import (
    BehindCameraError,
    CalibrationError,
    DegenerateLineError,
    InvalidArgumentError,
    NoGroundIntersectionError,
    SchemaError,
)
from .label_codec import BinSpec, decode, encode, kl_loss, make_bins
from .panorama_sampler import (
    DatasetManifest,
    SamplingConfig,
    build_dataset,
    extract_crop,
    focal_mm_to_vfov,
    sample_camera_params,
)
from .perceptual_measure import (
    SensitivityModel,
    StudyRecord,
    compensate_placement,
    knn_sensitivity,
    load_study,
    sample_distortion,
    sensitivity_from_pct,
)
from .retrieval_index import RetrievalIndex, build_index
from .summary import ErrorSummary, summarize_errors

__version__ = "0.1.0"
