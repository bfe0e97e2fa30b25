"""Prior performance models: per-class, per-source precision-recall curves.

A source's validation-split detections are labelled true/false positive
against ground truth, turned into a PR curve with the interpolated
(monotone-envelope) precision, and fitted with an integer ambiguity
exponent. The resulting model maps any raw score to (precision, recall).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .core import ClassificationScore, DataError, Detection, GroundTruthObject, iou

DEFAULT_N_MAX = 16


@dataclass(frozen=True)
class LabeledDetection:
    detection: Detection
    is_true_positive: bool


@dataclass(frozen=True)
class PriorSample:
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class PriorModel:
    """Score -> (precision, recall) lookup table for one (class, source).

    ``samples`` hold strictly decreasing thresholds with the envelope
    precision (non-increasing) and recall (non-decreasing). ``n`` is the
    exponent applied to recall when mass is assigned downstream.
    """

    class_id: str
    source_id: str
    samples: tuple[PriorSample, ...]
    n: int
    n_pos: int
    iou_threshold: float = 0.5
    n_det: int = 0

    def __post_init__(self):
        if not self.samples:
            raise DataError("prior model needs at least one PR sample")
        if self.n < 1:
            raise DataError(f"ambiguity exponent must be >= 1, got {self.n}")
        ts = [s.threshold for s in self.samples]
        if any(nxt >= prev for prev, nxt in zip(ts, ts[1:])):
            raise DataError("prior model thresholds must be strictly decreasing")

    def lookup(self, s: float) -> tuple[float, float]:
        """(precision, recall) at score s: clamped at the ends, linearly
        interpolated between bracketing threshold samples otherwise."""
        samples = self.samples
        if s >= samples[0].threshold:
            return samples[0].precision, samples[0].recall
        if s <= samples[-1].threshold:
            return samples[-1].precision, samples[-1].recall
        # thresholds descend; search on the ascending reversal
        ts_asc = [smp.threshold for smp in reversed(samples)]
        j = bisect.bisect_left(ts_asc, s)
        lo = samples[len(samples) - 1 - (j - 1)]  # lower threshold
        hi = samples[len(samples) - 1 - j]  # higher threshold
        w = (s - lo.threshold) / (hi.threshold - lo.threshold)
        prec = lo.precision + w * (hi.precision - lo.precision)
        rec = lo.recall + w * (hi.recall - lo.recall)
        return prec, rec


def label_detections(
    dets: list[Detection],
    gts: list[GroundTruthObject],
    iou_threshold: float = 0.5,
) -> list[LabeledDetection]:
    """Greedy TP/FP labelling per image at the given IoU threshold.

    Detections are taken in score-descending order (ties keep input
    order); each matches the unmatched non-difficult ground-truth box of
    highest IoU if that IoU clears the threshold. A ground-truth box is
    consumed at most once. Detections whose best match is a "difficult"
    box are dropped (neither TP nor FP).
    """
    if not 0.0 < iou_threshold < 1.0:
        raise DataError(f"iou_threshold must be in (0,1), got {iou_threshold}")

    gts_by_image: dict[str, list[GroundTruthObject]] = {}
    for g in gts:
        gts_by_image.setdefault(g.image_id, []).append(g)

    order = sorted(range(len(dets)), key=lambda i: -_score(dets[i]))
    labeled: list[tuple[int, bool | None]] = []
    matched: dict[str, set[int]] = {img: set() for img in gts_by_image}
    for i in order:
        d = dets[i]
        candidates = gts_by_image.get(d.image_id, [])
        best_j, best_iou = -1, 0.0
        for j, g in enumerate(candidates):
            if not g.difficult and j in matched[d.image_id]:
                continue
            v = iou(d.bbox, g.bbox)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_threshold:
            g = candidates[best_j]
            if g.difficult:
                labeled.append((i, None))  # dropped
            else:
                matched[d.image_id].add(best_j)
                labeled.append((i, True))
        else:
            labeled.append((i, False))

    labeled.sort(key=lambda t: t[0])
    return [
        LabeledDetection(dets[i], tp) for i, tp in labeled if tp is not None
    ]


def _score(d: Detection) -> float:
    if d.score is None:
        raise DataError(f"detection without score cannot be ranked: {d!r}")
    return d.score


def broadcast_classification(
    cls: list[ClassificationScore], dets: list[Detection]
) -> list[Detection]:
    """Turn image-level classification into detection-shaped evidence.

    Each detection gets its image's classification score and the
    classifier's source_id. Images with no classification record yield
    score None (no evidence, consumed downstream as the vacuous mass).
    Images with a score but no detections contribute nothing: the
    classifier cannot create boxes.
    """
    by_image: dict[str, ClassificationScore] = {}
    for c in cls:
        if c.image_id in by_image:
            raise DataError(
                f"duplicate classification record for image {c.image_id!r}"
            )
        by_image[c.image_id] = c
    classifier_source = cls[0].source_id if cls else "classifier"

    out = []
    for d in dets:
        c = by_image.get(d.image_id)
        out.append(
            Detection(
                image_id=d.image_id,
                class_id=d.class_id,
                bbox=d.bbox,
                score=None if c is None else c.score,
                source_id=classifier_source,
            )
        )
    return out


def build_pr_curve(
    labeled: list[LabeledDetection], n_pos: int
) -> list[PriorSample]:
    """PR samples at every distinct score, precision replaced by its
    monotone envelope (max precision at any equal-or-lower threshold)."""
    if n_pos < 1:
        raise DataError(f"n_pos must be >= 1, got {n_pos}")
    if not labeled:
        raise DataError("cannot build a PR curve from zero labelled detections")

    ranked = sorted(labeled, key=lambda l: -_score(l.detection))
    samples: list[PriorSample] = []
    tp = det = 0
    i = 0
    while i < len(ranked):
        t = _score(ranked[i].detection)
        while i < len(ranked) and _score(ranked[i].detection) == t:
            det += 1
            tp += ranked[i].is_true_positive
            i += 1
        samples.append(PriorSample(t, tp / det, tp / n_pos))

    # envelope: suffix max of precision over decreasing thresholds
    best = 0.0
    enveloped: list[PriorSample] = []
    for s in reversed(samples):
        best = max(best, s.precision)
        enveloped.append(PriorSample(s.threshold, best, s.recall))
    enveloped.reverse()
    return enveloped


def fit_ambiguity_exponent(
    samples: list[PriorSample], n_max: int = DEFAULT_N_MAX
) -> int:
    """Smallest n in [1, n_max] with precision + recall**n <= 1 at every
    sample; n_max when no n satisfies (the mass clamp then applies)."""
    if n_max < 1:
        raise DataError(f"n_max must be >= 1, got {n_max}")
    for n in range(1, n_max + 1):
        if all(s.precision + s.recall**n <= 1.0 for s in samples):
            return n
    return n_max


def build_prior_model(
    dets: list[Detection],
    gts: list[GroundTruthObject],
    class_id: str,
    source_id: str,
    iou_threshold: float = 0.5,
    n: int | None = None,
    n_max: int = DEFAULT_N_MAX,
) -> PriorModel:
    """Label, build the PR curve, and fit n for one (class, source).

    Inputs may span many classes; only records of ``class_id`` are used.
    ``n=None`` auto-fits the exponent, otherwise the given value is fixed.
    """
    cls_dets = [d for d in dets if d.class_id == class_id and d.source_id == source_id]
    cls_gts = [g for g in gts if g.class_id == class_id]
    n_pos = sum(1 for g in cls_gts if not g.difficult)
    if n_pos < 1:
        raise DataError(
            f"no non-difficult ground truth for class {class_id!r}; "
            "cannot build a prior model"
        )
    labeled = label_detections(cls_dets, cls_gts, iou_threshold)
    if not labeled:
        raise DataError(
            f"no usable detections for ({class_id!r}, {source_id!r}); "
            "cannot build a prior model"
        )
    samples = build_pr_curve(labeled, n_pos)
    if n is None:
        n = fit_ambiguity_exponent(samples, n_max)
    return PriorModel(
        class_id=class_id,
        source_id=source_id,
        samples=tuple(samples),
        n=n,
        n_pos=n_pos,
        iou_threshold=iou_threshold,
        n_det=len(labeled),
    )
