"""Geometry primitives and the domain records shared by the whole pipeline.

All types are immutable after construction and validated eagerly, so a
record that exists is a record that satisfies its invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class DataError(ValueError):
    """Raised when an input record or file violates its documented contract."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous pixel coordinates.

    Area is (x_max - x_min) * (y_max - y_min); there is no legacy "+1"
    pixel convention. VOC-derived inputs must be pre-adjusted.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise DataError(f"non-finite box coordinate: {self!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DataError(
                f"degenerate box (need x_min < x_max and y_min < y_max): "
                f"[{self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}]"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint, symmetric."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class Detection:
    """One detector output box with its confidence score.

    ``score`` is None only for the "no evidence" records produced by
    classification broadcast; downstream they become the vacuous mass.
    """

    image_id: str
    class_id: str
    bbox: BoundingBox
    score: float | None
    source_id: str

    def __post_init__(self):
        if not self.image_id or not self.class_id:
            raise DataError("detection needs non-empty image_id and class_id")
        if self.score is not None and not math.isfinite(self.score):
            raise DataError(f"non-finite detection score: {self.score!r}")


@dataclass(frozen=True)
class GroundTruthObject:
    image_id: str
    class_id: str
    bbox: BoundingBox
    difficult: bool = False

    def __post_init__(self):
        if not self.image_id or not self.class_id:
            raise DataError("ground truth needs non-empty image_id and class_id")


@dataclass(frozen=True)
class ClassificationScore:
    """Image-level score from a classifier: confidence the class is present."""

    image_id: str
    class_id: str
    score: float
    source_id: str

    def __post_init__(self):
        if not self.image_id or not self.class_id:
            raise DataError("classification needs non-empty image_id and class_id")
        if not math.isfinite(self.score):
            raise DataError(f"non-finite classification score: {self.score!r}")


@dataclass
class DatasetBundle:
    """In-memory dataset: ground truth, multi-source detections, classification."""

    ground_truth: list[GroundTruthObject] = field(default_factory=list)
    detections: list[Detection] = field(default_factory=list)
    classification: list[ClassificationScore] = field(default_factory=list)

    def image_ids(self) -> set[str]:
        ids = {g.image_id for g in self.ground_truth}
        ids.update(d.image_id for d in self.detections)
        ids.update(c.image_id for c in self.classification)
        return ids
