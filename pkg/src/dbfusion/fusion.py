"""Dynamic belief fusion: mass assignment, Dempster's rule, clustering.

The frame of discernment is {T, NT, T or NT}: target, non-target, and
the ambiguity hypothesis. Each evidence source turns a raw score into a
mass function via its prior performance model; masses for one cluster of
overlapping boxes are pooled with Dempster's combination rule, and the
fused score is m(T) - m(NT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BoundingBox, DataError, Detection, iou
from .prior import PriorModel

AMBIGUITY_FLOOR = 1e-6
_CONFLICT_EPS = 1e-12


class ConfigurationError(ValueError):
    """Raised before fusion when a required prior model is missing."""


class TotalConflictError(ArithmeticError):
    """Raised by dempster_combine when the two masses fully contradict."""


@dataclass(frozen=True)
class MassFunction:
    """Basic probability assignment over {T, NT, T or NT}."""

    m_t: float
    m_nt: float
    m_amb: float

    def __post_init__(self):
        for v in (self.m_t, self.m_nt, self.m_amb):
            if not (-1e-9 <= v <= 1.0 + 1e-9):
                raise DataError(f"mass outside [0,1]: {self!r}")
        if abs(self.m_t + self.m_nt + self.m_amb - 1.0) > 1e-9:
            raise DataError(f"masses must sum to 1: {self!r}")

    @property
    def is_vacuous(self) -> bool:
        return self.m_amb == 1.0


VACUOUS = MassFunction(0.0, 0.0, 1.0)


def assign_masses(model: PriorModel, s: float | None) -> MassFunction:
    """Score -> mass via the prior model.

    m_t = precision(s); m_nt = min(recall(s)**n, 1 - precision(s)), the
    clamp keeping the ambiguity mass non-negative; remainder is ambiguity.
    A no-evidence score (None) yields the vacuous mass.
    """
    if s is None:
        return VACUOUS
    prec, rec = model.lookup(s)
    m_t = prec
    m_nt = min(rec**model.n, 1.0 - prec)
    return MassFunction(m_t, m_nt, 1.0 - m_t - m_nt)


def dempster_combine(m1: MassFunction, m2: MassFunction) -> MassFunction:
    """Dempster's rule: conjunctive pooling normalized by 1 - conflict."""
    conflict = m1.m_t * m2.m_nt + m1.m_nt * m2.m_t
    norm = 1.0 - conflict
    if norm <= _CONFLICT_EPS:
        raise TotalConflictError(
            f"complete conflict between {m1!r} and {m2!r}"
        )
    t = (m1.m_t * m2.m_t + m1.m_t * m2.m_amb + m1.m_amb * m2.m_t) / norm
    nt = (m1.m_nt * m2.m_nt + m1.m_nt * m2.m_amb + m1.m_amb * m2.m_nt) / norm
    amb = m1.m_amb * m2.m_amb / norm
    return MassFunction(t, nt, amb)


def floor_ambiguity(m: MassFunction, floor: float = AMBIGUITY_FLOOR) -> MassFunction:
    """Ensure m_amb >= floor by proportionally rescaling m_t and m_nt.

    Applied to every non-vacuous mass entering the fusion fold so total
    conflict cannot occur on the data path.
    """
    if m.m_amb >= floor:
        return m
    body = m.m_t + m.m_nt
    scale = (1.0 - floor) / body if body > 0 else 0.0
    return MassFunction(m.m_t * scale, m.m_nt * scale, floor)


@dataclass(frozen=True)
class DetectionCluster:
    """Boxes from multiple sources judged to be one object candidate."""

    image_id: str
    class_id: str
    members: dict[str, Detection]
    representative_bbox: BoundingBox

    def __post_init__(self):
        if not self.members:
            raise DataError("cluster needs at least one member")


@dataclass(frozen=True)
class FusedDetection:
    image_id: str
    class_id: str
    bbox: BoundingBox
    fused_score: float
    mass: MassFunction


def cluster_detections(
    dets: list[Detection], cluster_iou: float = 0.5
) -> list[DetectionCluster]:
    """Greedy per-image clustering across sources.

    Repeatedly seed with the highest-scoring unassigned detection; absorb
    from each other source its highest-IoU unassigned detection with IoU
    at or above the threshold. Same-source boxes never merge.
    """
    if not 0.0 < cluster_iou < 1.0:
        raise DataError(f"cluster_iou must be in (0,1), got {cluster_iou}")

    by_image: dict[str, list[int]] = {}
    for i, d in enumerate(dets):
        by_image.setdefault(d.image_id, []).append(i)

    clusters: list[DetectionCluster] = []
    for image_id in by_image:
        idxs = by_image[image_id]
        unassigned = set(idxs)
        order = sorted(idxs, key=lambda i: (-_score(dets[i]), i))
        for seed_i in order:
            if seed_i not in unassigned:
                continue
            unassigned.discard(seed_i)
            seed = dets[seed_i]
            members = {seed.source_id: seed}
            other_sources = {
                dets[i].source_id for i in unassigned
            } - {seed.source_id}
            for src in sorted(other_sources):
                best_i, best_v = -1, 0.0
                for i in unassigned:
                    if dets[i].source_id != src:
                        continue
                    v = iou(seed.bbox, dets[i].bbox)
                    if v > best_v:
                        best_v, best_i = v, i
                if best_i >= 0 and best_v >= cluster_iou:
                    unassigned.discard(best_i)
                    members[src] = dets[best_i]
            clusters.append(
                DetectionCluster(
                    image_id=image_id,
                    class_id=seed.class_id,
                    members=members,
                    representative_bbox=seed.bbox,
                )
            )
    return clusters


def _score(d: Detection) -> float:
    if d.score is None:
        raise DataError(f"cannot cluster a no-evidence detection: {d!r}")
    return d.score


def fuse_cluster(
    cluster: DetectionCluster,
    detector_sources: list[str],
    priors: dict[tuple[str, str], PriorModel],
    classifier_mass: MassFunction,
) -> FusedDetection:
    """Fold Dempster's rule over one cluster's evidence.

    One mass per detector source (vacuous when the source contributed no
    box), then the classifier's mass; every non-vacuous mass has its
    ambiguity floored first so the fold cannot hit total conflict.
    """
    combined = VACUOUS
    for src in detector_sources:
        member = cluster.members.get(src)
        if member is None:
            m = VACUOUS
        else:
            model = priors[(cluster.class_id, src)]
            m = floor_ambiguity(assign_masses(model, member.score))
        combined = dempster_combine(combined, m)
    combined = dempster_combine(combined, floor_ambiguity(classifier_mass))
    return FusedDetection(
        image_id=cluster.image_id,
        class_id=cluster.class_id,
        bbox=cluster.representative_bbox,
        fused_score=combined.m_t - combined.m_nt,
        mass=combined,
    )


def fuse_dataset(
    detections: list[Detection],
    classification,
    priors: dict[tuple[str, str], PriorModel],
    cluster_iou: float = 0.5,
) -> list[FusedDetection]:
    """Cluster and fuse a whole multi-source detection set.

    ``classification`` records all share one classifier source_id; images
    without a record give the classifier a vacuous vote. A missing prior
    for any present (class, detector) or (class, classifier) pair is a
    configuration error raised before any fusion happens.
    """
    detector_sources = sorted({d.source_id for d in detections})
    classes = sorted({d.class_id for d in detections})

    cls_by_key: dict[tuple[str, str], float] = {}
    classifier_sources = sorted({c.source_id for c in classification})
    if len(classifier_sources) > 1:
        raise ConfigurationError(
            f"expected one classifier source, got {classifier_sources}"
        )
    classifier_source = classifier_sources[0] if classifier_sources else None
    for c in classification:
        cls_by_key[(c.image_id, c.class_id)] = c.score

    missing = []
    for cid in classes:
        for src in detector_sources:
            if (cid, src) not in priors:
                missing.append((cid, src))
        if classifier_source is not None and (cid, classifier_source) not in priors:
            missing.append((cid, classifier_source))
    if missing:
        raise ConfigurationError(f"missing prior model(s) for {missing}")

    fused: list[tuple[float, FusedDetection]] = []
    for cid in classes:
        cls_dets = [d for d in detections if d.class_id == cid]
        for cluster in cluster_detections(cls_dets, cluster_iou):
            if classifier_source is None:
                cmass = VACUOUS
            else:
                s = cls_by_key.get((cluster.image_id, cid))
                cmass = assign_masses(priors[(cid, classifier_source)], s)
            anchor = max(_score(m) for m in cluster.members.values())
            fused.append(
                (anchor, fuse_cluster(cluster, detector_sources, priors, cmass))
            )

    # fused-score ties are broken by the strongest raw member score so a
    # score-monotone fusion reproduces the raw ranking exactly
    fused.sort(
        key=lambda af: (
            af[1].class_id,
            -af[1].fused_score,
            -af[0],
            af[1].image_id,
            af[1].bbox.x_min,
            af[1].bbox.y_min,
            af[1].bbox.x_max,
            af[1].bbox.y_max,
        )
    )
    return [f for _, f in fused]
