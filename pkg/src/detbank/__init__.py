"""Detection-bank video features.

Turns per-keyframe object-detection records into a sparse video
representation (thresholded, NMS-suppressed detection statistics over a
spatial pyramid, pooled across keyframes) and evaluates it with a
forced-choice linear classification harness on synthetic corpora.
"""

__version__ = "0.1.0"

from .bank import (
    FeatureLayout,
    FeatureVector,
    StatTensor,
    assemble_feature,
    deserialize_feature,
    frame_statistics,
    pool_video,
    read_feature_file,
    serialize_feature,
    sparsity,
    write_feature_file,
)
from .classify import (
    LabeledFeatureSet,
    LinearOvrModel,
    accuracy,
    det_curve,
    det_points_from_scores,
    fuse_features,
    grid_search_train,
    predict_forced_choice,
    read_model,
    split_corpus,
    train_ovr_linear,
    write_model,
)
from .core import (
    BankConfig,
    BoundingBox,
    DetectionRecord,
    FrameDetections,
    NormalizationStats,
    VideoDetections,
    apply_labels,
    normalize_coordinates,
    normalize_video,
    parse_detection_stream,
    parse_labels,
    serialize_detection_stream,
    serialize_labels,
)
from .pyramid import Region, enumerate_regions, region_membership
from .suppress import SuppressedFrame, build_detection_image, greedy_nms, iou
from .synth import (
    BUILTIN_SPECS,
    CategoryModel,
    ClassModel,
    Placement,
    SynthSpec,
    generate,
    load_spec,
    spatial_spec,
    threshold_spec,
    video_labels,
)

__all__ = [
    "__version__",
    "BankConfig",
    "BoundingBox",
    "DetectionRecord",
    "FrameDetections",
    "NormalizationStats",
    "VideoDetections",
    "apply_labels",
    "normalize_coordinates",
    "normalize_video",
    "parse_detection_stream",
    "parse_labels",
    "serialize_detection_stream",
    "serialize_labels",
    "SuppressedFrame",
    "build_detection_image",
    "greedy_nms",
    "iou",
    "Region",
    "enumerate_regions",
    "region_membership",
    "FeatureLayout",
    "FeatureVector",
    "StatTensor",
    "assemble_feature",
    "deserialize_feature",
    "frame_statistics",
    "pool_video",
    "read_feature_file",
    "serialize_feature",
    "sparsity",
    "write_feature_file",
    "LabeledFeatureSet",
    "LinearOvrModel",
    "accuracy",
    "det_curve",
    "det_points_from_scores",
    "fuse_features",
    "grid_search_train",
    "predict_forced_choice",
    "read_model",
    "split_corpus",
    "train_ovr_linear",
    "write_model",
    "BUILTIN_SPECS",
    "CategoryModel",
    "ClassModel",
    "Placement",
    "SynthSpec",
    "generate",
    "load_spec",
    "spatial_spec",
    "threshold_spec",
    "video_labels",
]
