"""VOC-style detection evaluation: per-class AP, mAP, PR export."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .core import DataError, Detection, GroundTruthObject
from .prior import LabeledDetection, label_detections

log = logging.getLogger(__name__)

AP_METHODS = ("continuous", "voc07_11point")


@dataclass(frozen=True)
class ClassResult:
    ap: float
    n_pos: int
    # (threshold, precision, recall) at every rank, raw (un-enveloped)
    pr_samples: tuple[tuple[float, float, float], ...] = field(repr=False)


@dataclass(frozen=True)
class EvaluationReport:
    per_class: dict[str, ClassResult]
    map_score: float
    ap_method: str
    iou_threshold: float

    def to_dict(self) -> dict:
        return {
            "ap_method": self.ap_method,
            "iou_threshold": self.iou_threshold,
            "map": self.map_score,
            "per_class": {
                cid: {
                    "ap": r.ap,
                    "n_pos": r.n_pos,
                    "pr_samples": [list(s) for s in r.pr_samples],
                }
                for cid, r in sorted(self.per_class.items())
            },
        }

    def to_table(self) -> str:
        """Aligned plain-text table: class, AP, n_pos, then the mAP row."""
        rows = [("class", "AP", "n_pos")]
        for cid in sorted(self.per_class):
            r = self.per_class[cid]
            rows.append((cid, f"{r.ap:.6f}", str(r.n_pos)))
        rows.append(("mAP", f"{self.map_score:.6f}", ""))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = []
        for i, r in enumerate(rows):
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
            if i == 0 or i == len(rows) - 2:
                lines.append("-" * (sum(widths) + 4))
        return "\n".join(lines) + "\n"


def _ranked_flags(labeled: list[LabeledDetection]) -> list[bool]:
    order = sorted(
        range(len(labeled)), key=lambda i: -labeled[i].detection.score
    )
    return [labeled[i].is_true_positive for i in order]


def average_precision(
    labeled: list[LabeledDetection], n_pos: int, method: str = "continuous"
) -> float:
    """AP of a labelled detection list against n_pos positives.

    ``continuous``: mean over TPs of the interpolated precision at each
    TP's recall (area under the interpolated PR curve). ``voc07_11point``:
    mean of interpolated precision at recalls 0.0, 0.1, ..., 1.0.
    """
    if method not in AP_METHODS:
        raise DataError(f"unknown AP method {method!r}; expected one of {AP_METHODS}")
    if n_pos < 1:
        raise DataError(f"n_pos must be >= 1, got {n_pos}")

    flags = _ranked_flags(labeled)
    precisions: list[float] = []
    recalls: list[float] = []
    tp = 0
    for k, is_tp in enumerate(flags, start=1):
        tp += is_tp
        precisions.append(tp / k)
        recalls.append(tp / n_pos)

    # interpolated precision at rank k: max precision at any later rank
    interp = list(precisions)
    for i in range(len(interp) - 2, -1, -1):
        interp[i] = max(interp[i], interp[i + 1])

    if method == "continuous":
        total = sum(p for p, is_tp in zip(interp, flags) if is_tp)
        return total / n_pos

    # voc07_11point
    total = 0.0
    for tenth in range(11):
        r = tenth / 10.0
        p = max(
            (ip for ip, rec in zip(interp, recalls) if rec >= r - 1e-12),
            default=0.0,
        )
        total += p
    return total / 11.0


def evaluate(
    dets: list[Detection],
    gts: list[GroundTruthObject],
    iou_threshold: float = 0.5,
    method: str = "continuous",
) -> EvaluationReport:
    """Per-class AP and mAP. Classes with no non-difficult ground truth
    are skipped with a warning rather than scored zero."""
    if method not in AP_METHODS:
        raise DataError(f"unknown AP method {method!r}; expected one of {AP_METHODS}")

    classes = sorted({g.class_id for g in gts} | {d.class_id for d in dets})
    per_class: dict[str, ClassResult] = {}
    for cid in classes:
        cls_gts = [g for g in gts if g.class_id == cid]
        n_pos = sum(1 for g in cls_gts if not g.difficult)
        if n_pos == 0:
            log.warning("class %r has no non-difficult ground truth; skipped", cid)
            continue
        cls_dets = [d for d in dets if d.class_id == cid]
        labeled = label_detections(cls_dets, cls_gts, iou_threshold)
        ap = average_precision(labeled, n_pos, method)

        flags = _ranked_flags(labeled)
        scores = sorted((d.score for d in (l.detection for l in labeled)), reverse=True)
        pr: list[tuple[float, float, float]] = []
        tp = 0
        for k, (s, is_tp) in enumerate(zip(scores, flags), start=1):
            tp += is_tp
            pr.append((s, tp / k, tp / n_pos))
        per_class[cid] = ClassResult(ap=ap, n_pos=n_pos, pr_samples=tuple(pr))

    if per_class:
        map_score = sum(r.ap for r in per_class.values()) / len(per_class)
    else:
        map_score = 0.0
    return EvaluationReport(
        per_class=per_class,
        map_score=map_score,
        ap_method=method,
        iou_threshold=iou_threshold,
    )
