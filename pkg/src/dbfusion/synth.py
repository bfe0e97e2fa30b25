"""Synthetic detection benchmarks with controllable error behavior.

Generates ground truth, per-source detector outputs, and image-level
classification scores, all reproducible from (config, seed). Detector
quality is steered by a hit probability, a Poisson spurious-box rate,
and Beta score distributions for the hit and spurious populations.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BoundingBox,
    ClassificationScore,
    DataError,
    DatasetBundle,
    Detection,
    GroundTruthObject,
)

# spurious boxes are kept below this IoU with every ground-truth box so
# their labels are unambiguous at the 0.5 evaluation threshold
FP_MAX_IOU = 0.3
_PACK_RETRIES = 200


class GenerationError(RuntimeError):
    """Raised when box packing fails after bounded retries."""


@dataclass(frozen=True)
class SourceProfile:
    """Behavior of one simulated detector."""

    source_id: str
    tp_recall: float  # probability a ground-truth object is detected
    fp_rate: float  # mean spurious boxes per image (Poisson)
    tp_score_dist: tuple[float, float]  # Beta(alpha, beta) for hits
    fp_score_dist: tuple[float, float]  # Beta(alpha, beta) for spurious boxes
    localization_jitter: float = 0.0  # relative box perturbation for hits

    def __post_init__(self):
        if not 0.0 <= self.tp_recall <= 1.0:
            raise DataError(f"tp_recall must be in [0,1], got {self.tp_recall}")
        if self.fp_rate < 0.0:
            raise DataError(f"fp_rate must be >= 0, got {self.fp_rate}")
        if self.localization_jitter < 0.0:
            raise DataError("localization_jitter must be >= 0")
        for pair in (self.tp_score_dist, self.fp_score_dist):
            if min(pair) <= 0.0:
                raise DataError(f"Beta parameters must be positive, got {pair}")


@dataclass(frozen=True)
class ClassifierProfile:
    """Score distributions of the simulated image classifier."""

    source_id: str
    pos_score_dist: tuple[float, float]  # images containing the class
    neg_score_dist: tuple[float, float]  # images without it

    def __post_init__(self):
        for pair in (self.pos_score_dist, self.neg_score_dist):
            if min(pair) <= 0.0:
                raise DataError(f"Beta parameters must be positive, got {pair}")


@dataclass(frozen=True)
class SyntheticConfig:
    n_images: int
    image_size: tuple[float, float]
    classes: tuple[str, ...]
    objects_per_image: tuple[int, int]  # inclusive range when a class is present
    class_presence: float  # probability each class appears in an image
    detectors: tuple[SourceProfile, ...]
    classifier: ClassifierProfile | None
    seed: int = 0

    def __post_init__(self):
        if self.n_images < 1:
            raise DataError(f"n_images must be >= 1, got {self.n_images}")
        if not 0.0 <= self.class_presence <= 1.0:
            raise DataError("class_presence must be in [0,1]")
        if not self.classes:
            raise DataError("need at least one class")
        lo, hi = self.objects_per_image
        if not 1 <= lo <= hi:
            raise DataError(f"bad objects_per_image range {self.objects_per_image}")

    @staticmethod
    def from_dict(doc: dict) -> "SyntheticConfig":
        try:
            detectors = tuple(
                SourceProfile(
                    source_id=d["source_id"],
                    tp_recall=float(d["tp_recall"]),
                    fp_rate=float(d["fp_rate"]),
                    tp_score_dist=tuple(d["tp_score_dist"]),
                    fp_score_dist=tuple(d["fp_score_dist"]),
                    localization_jitter=float(d.get("localization_jitter", 0.0)),
                )
                for d in doc["detectors"]
            )
            cdoc = doc.get("classifier")
            classifier = None
            if cdoc is not None:
                classifier = ClassifierProfile(
                    source_id=cdoc["source_id"],
                    pos_score_dist=tuple(cdoc["pos_score_dist"]),
                    neg_score_dist=tuple(cdoc["neg_score_dist"]),
                )
            return SyntheticConfig(
                n_images=int(doc["n_images"]),
                image_size=tuple(doc.get("image_size", (640.0, 480.0))),
                classes=tuple(doc["classes"]),
                objects_per_image=tuple(doc.get("objects_per_image", (1, 3))),
                class_presence=float(doc.get("class_presence", 0.5)),
                detectors=detectors,
                classifier=classifier,
                seed=int(doc.get("seed", 0)),
            )
        except KeyError as e:
            raise DataError(f"config missing field {e}") from e

    @staticmethod
    def from_file(path) -> "SyntheticConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: malformed JSON: {e}") from e
        return SyntheticConfig.from_dict(doc)

    def to_dict(self) -> dict:
        doc = {
            "n_images": self.n_images,
            "image_size": list(self.image_size),
            "classes": list(self.classes),
            "objects_per_image": list(self.objects_per_image),
            "class_presence": self.class_presence,
            "detectors": [
                {
                    "source_id": d.source_id,
                    "tp_recall": d.tp_recall,
                    "fp_rate": d.fp_rate,
                    "tp_score_dist": list(d.tp_score_dist),
                    "fp_score_dist": list(d.fp_score_dist),
                    "localization_jitter": d.localization_jitter,
                }
                for d in self.detectors
            ],
            "classifier": None,
            "seed": self.seed,
        }
        if self.classifier is not None:
            doc["classifier"] = {
                "source_id": self.classifier.source_id,
                "pos_score_dist": list(self.classifier.pos_score_dist),
                "neg_score_dist": list(self.classifier.neg_score_dist),
            }
        return doc


def _stream(seed: int, partition: str, image_idx: int, stream_id: str):
    """Independent RNG per (image, stream): adding a stream never
    perturbs another stream's draws."""
    return np.random.default_rng(
        [seed, zlib.crc32(partition.encode()), image_idx, zlib.crc32(stream_id.encode())]
    )


def _sample_box(rng, width, height) -> BoundingBox:
    w = rng.uniform(0.08, 0.25) * width
    h = rng.uniform(0.08, 0.25) * height
    x = rng.uniform(0.0, width - w)
    y = rng.uniform(0.0, height - h)
    return BoundingBox(x, y, x + w, y + h)


def _max_iou(box: BoundingBox, others: list[BoundingBox]) -> float:
    from .core import iou

    return max((iou(box, o) for o in others), default=0.0)


def _jitter_box(rng, box: BoundingBox, jitter: float, width, height) -> BoundingBox:
    if jitter == 0.0:
        return box
    w = box.x_max - box.x_min
    h = box.y_max - box.y_min
    dx = rng.uniform(-jitter, jitter, size=2) * w
    dy = rng.uniform(-jitter, jitter, size=2) * h
    x_min = min(max(box.x_min + dx[0], 0.0), width - 1.0)
    y_min = min(max(box.y_min + dy[0], 0.0), height - 1.0)
    x_max = max(min(box.x_max + dx[1], width), x_min + 1.0)
    y_max = max(min(box.y_max + dy[1], height), y_min + 1.0)
    return BoundingBox(x_min, y_min, x_max, y_max)


def generate(config: SyntheticConfig, partition: str = "test") -> DatasetBundle:
    """One fully reproducible dataset partition."""
    width, height = config.image_size
    bundle = DatasetBundle()

    for idx in range(config.n_images):
        image_id = f"{partition}_{idx:06d}"

        # ground truth
        rng = _stream(config.seed, partition, idx, "gt")
        gt_boxes: list[BoundingBox] = []
        gts_here: list[GroundTruthObject] = []
        for cid in config.classes:
            if rng.random() >= config.class_presence:
                continue
            lo, hi = config.objects_per_image
            count = int(rng.integers(lo, hi + 1))
            for _ in range(count):
                for attempt in range(_PACK_RETRIES):
                    box = _sample_box(rng, width, height)
                    if _max_iou(box, gt_boxes) < 0.1:
                        break
                else:
                    raise GenerationError(
                        f"could not place a ground-truth box in {image_id} "
                        f"after {_PACK_RETRIES} attempts"
                    )
                gt_boxes.append(box)
                gts_here.append(GroundTruthObject(image_id, cid, box, difficult=False))

        bundle.ground_truth.extend(gts_here)
        present = {g.class_id for g in gts_here}

        # detectors
        for profile in config.detectors:
            rng = _stream(config.seed, partition, idx, profile.source_id)
            for g in gts_here:
                if rng.random() < profile.tp_recall:
                    box = _jitter_box(
                        rng, g.bbox, profile.localization_jitter, width, height
                    )
                    score = float(rng.beta(*profile.tp_score_dist))
                    bundle.detections.append(
                        Detection(image_id, g.class_id, box, score, profile.source_id)
                    )
            n_fp = int(rng.poisson(profile.fp_rate))
            all_gt_boxes = [g.bbox for g in gts_here]
            for _ in range(n_fp):
                for attempt in range(_PACK_RETRIES):
                    box = _sample_box(rng, width, height)
                    if _max_iou(box, all_gt_boxes) < FP_MAX_IOU:
                        break
                else:
                    raise GenerationError(
                        f"could not place a spurious box in {image_id} "
                        f"after {_PACK_RETRIES} attempts"
                    )
                cid = config.classes[int(rng.integers(len(config.classes)))]
                score = float(rng.beta(*profile.fp_score_dist))
                bundle.detections.append(
                    Detection(image_id, cid, box, score, profile.source_id)
                )

        # classifier
        if config.classifier is not None:
            rng = _stream(config.seed, partition, idx, config.classifier.source_id)
            for cid in config.classes:
                dist = (
                    config.classifier.pos_score_dist
                    if cid in present
                    else config.classifier.neg_score_dist
                )
                bundle.classification.append(
                    ClassificationScore(
                        image_id, cid, float(rng.beta(*dist)),
                        config.classifier.source_id,
                    )
                )

    return bundle
