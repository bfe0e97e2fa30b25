"""Belief fusion of object-detector outputs with image-classification priors."""

__version__ = "0.1.0"

from .core import (
    BoundingBox,
    ClassificationScore,
    DataError,
    DatasetBundle,
    Detection,
    GroundTruthObject,
    iou,
)
from .evaluate import EvaluationReport, average_precision, evaluate
from .fusion import (
    ConfigurationError,
    DetectionCluster,
    FusedDetection,
    MassFunction,
    TotalConflictError,
    VACUOUS,
    assign_masses,
    cluster_detections,
    dempster_combine,
    fuse_dataset,
)
from .prior import (
    LabeledDetection,
    PriorModel,
    PriorSample,
    broadcast_classification,
    build_pr_curve,
    build_prior_model,
    fit_ambiguity_exponent,
    label_detections,
)
from .synth import ClassifierProfile, SourceProfile, SyntheticConfig, generate

__all__ = [
    "BoundingBox",
    "ClassificationScore",
    "ClassifierProfile",
    "ConfigurationError",
    "DataError",
    "DatasetBundle",
    "Detection",
    "DetectionCluster",
    "EvaluationReport",
    "FusedDetection",
    "GroundTruthObject",
    "LabeledDetection",
    "MassFunction",
    "PriorModel",
    "PriorSample",
    "SourceProfile",
    "SyntheticConfig",
    "TotalConflictError",
    "VACUOUS",
    "assign_masses",
    "average_precision",
    "broadcast_classification",
    "build_pr_curve",
    "build_prior_model",
    "cluster_detections",
    "dempster_combine",
    "evaluate",
    "fit_ambiguity_exponent",
    "fuse_dataset",
    "generate",
    "iou",
    "label_detections",
]
