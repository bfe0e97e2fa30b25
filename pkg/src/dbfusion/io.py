"""File formats: JSON Lines records, VOC results text, prior-model JSON.

Every reader is total over its grammar: a line either parses into a
valid record or raises a DataError naming the line. Writers emit the
shortest round-trip decimal for reals, so write/read is an identity.
"""

from __future__ import annotations

import json
import math
import os
from typing import Iterable

from .core import (
    BoundingBox,
    ClassificationScore,
    DataError,
    DatasetBundle,
    Detection,
    GroundTruthObject,
)
from .prior import PriorModel, PriorSample


def _parse_bbox(raw, path, lineno) -> BoundingBox:
    if not (isinstance(raw, list) and len(raw) == 4):
        raise DataError(f"{path}:{lineno}: bbox must be [x_min,y_min,x_max,y_max]")
    try:
        return BoundingBox(*(float(v) for v in raw))
    except (TypeError, ValueError, DataError) as e:
        raise DataError(f"{path}:{lineno}: invalid box: {e}") from e


def _jsonl_records(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON: {e}") from e
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: record must be a JSON object")
            yield lineno, rec


def _require(rec: dict, keys: tuple[str, ...], path, lineno):
    for k in keys:
        if k not in rec:
            raise DataError(f"{path}:{lineno}: missing field {k!r}")


def _finite(value, name, path, lineno) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}:{lineno}: {name} is not a number") from e
    if not math.isfinite(v):
        raise DataError(f"{path}:{lineno}: non-finite {name}")
    return v


def read_detections(path, source_id: str) -> list[Detection]:
    """Read detection JSONL, stamping source_id on every record."""
    out = []
    for lineno, rec in _jsonl_records(path):
        _require(rec, ("image_id", "class_id", "bbox", "score"), path, lineno)
        bbox = _parse_bbox(rec["bbox"], path, lineno)
        score = _finite(rec["score"], "score", path, lineno)
        try:
            det = Detection(
                image_id=str(rec["image_id"]),
                class_id=str(rec["class_id"]),
                bbox=bbox,
                score=score,
                source_id=source_id,
            )
        except DataError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
        out.append(det)
    return out


def read_voc_detections(path, class_id: str, source_id: str) -> list[Detection]:
    """Read VOC results text: `image_id score x_min y_min x_max y_max`,
    whitespace-separated, one class per file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            image_id = parts[0]
            score = _finite(parts[1], "score", path, lineno)
            bbox = _parse_bbox([_finite(v, "coordinate", path, lineno) for v in parts[2:]], path, lineno)
            out.append(Detection(image_id, class_id, bbox, score, source_id))
    return out


def read_ground_truth(path) -> list[GroundTruthObject]:
    out = []
    for lineno, rec in _jsonl_records(path):
        _require(rec, ("image_id", "class_id", "bbox"), path, lineno)
        out.append(
            GroundTruthObject(
                image_id=str(rec["image_id"]),
                class_id=str(rec["class_id"]),
                bbox=_parse_bbox(rec["bbox"], path, lineno),
                difficult=bool(rec.get("difficult", False)),
            )
        )
    return out


def read_classification(path, source_id: str) -> list[ClassificationScore]:
    out = []
    seen: set[tuple[str, str]] = set()
    for lineno, rec in _jsonl_records(path):
        _require(rec, ("image_id", "class_id", "score"), path, lineno)
        key = (str(rec["image_id"]), str(rec["class_id"]))
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate classification record for {key}")
        seen.add(key)
        out.append(
            ClassificationScore(
                image_id=key[0],
                class_id=key[1],
                score=_finite(rec["score"], "score", path, lineno),
                source_id=source_id,
            )
        )
    return out


def write_detections(dets: Iterable[Detection], path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in dets:
            fh.write(
                json.dumps(
                    {
                        "image_id": d.image_id,
                        "class_id": d.class_id,
                        "bbox": d.bbox.as_list(),
                        "score": d.score,
                    }
                )
                + "\n"
            )


def write_ground_truth(gts: Iterable[GroundTruthObject], path):
    with open(path, "w", encoding="utf-8") as fh:
        for g in gts:
            fh.write(
                json.dumps(
                    {
                        "image_id": g.image_id,
                        "class_id": g.class_id,
                        "bbox": g.bbox.as_list(),
                        "difficult": g.difficult,
                    }
                )
                + "\n"
            )


def write_classification(cls: Iterable[ClassificationScore], path):
    with open(path, "w", encoding="utf-8") as fh:
        for c in cls:
            fh.write(
                json.dumps(
                    {"image_id": c.image_id, "class_id": c.class_id, "score": c.score}
                )
                + "\n"
            )


def write_prior_model(model: PriorModel, path):
    doc = {
        "class_id": model.class_id,
        "source_id": model.source_id,
        "n": model.n,
        "thresholds": [s.threshold for s in model.samples],
        "precision": [s.precision for s in model.samples],
        "recall": [s.recall for s in model.samples],
        "meta": {
            "iou_threshold": model.iou_threshold,
            "n_pos": model.n_pos,
            "n_det": model.n_det,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_prior_model(path) -> PriorModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: malformed JSON: {e}") from e
    for key in ("class_id", "source_id", "n", "thresholds", "precision", "recall"):
        if key not in doc:
            raise DataError(f"{path}: missing field {key!r}")
    ts, ps, rs = doc["thresholds"], doc["precision"], doc["recall"]
    if not (len(ts) == len(ps) == len(rs)):
        raise DataError(
            f"{path}: thresholds/precision/recall lengths differ "
            f"({len(ts)}/{len(ps)}/{len(rs)})"
        )
    meta = doc.get("meta", {})
    try:
        return PriorModel(
            class_id=str(doc["class_id"]),
            source_id=str(doc["source_id"]),
            samples=tuple(
                PriorSample(float(t), float(p), float(r))
                for t, p, r in zip(ts, ps, rs)
            ),
            n=int(doc["n"]),
            n_pos=int(meta.get("n_pos", 0)),
            iou_threshold=float(meta.get("iou_threshold", 0.5)),
            n_det=int(meta.get("n_det", 0)),
        )
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}: invalid prior model: {e}") from e


def prior_model_filename(class_id: str, source_id: str) -> str:
    return f"prior_{class_id}_{source_id}.json"


def read_prior_models(directory) -> dict[tuple[str, str], PriorModel]:
    """Load every prior_*.json in a directory, keyed by (class, source)."""
    priors: dict[tuple[str, str], PriorModel] = {}
    for name in sorted(os.listdir(directory)):
        if name.startswith("prior_") and name.endswith(".json"):
            m = read_prior_model(os.path.join(directory, name))
            priors[(m.class_id, m.source_id)] = m
    return priors


def write_fused(fused, path):
    """Fused output: the detections grammar plus fused_score and mass."""
    with open(path, "w", encoding="utf-8") as fh:
        for f in fused:
            fh.write(
                json.dumps(
                    {
                        "image_id": f.image_id,
                        "class_id": f.class_id,
                        "bbox": f.bbox.as_list(),
                        "score": f.fused_score,
                        "fused_score": f.fused_score,
                        "mass": [f.mass.m_t, f.mass.m_nt, f.mass.m_amb],
                    }
                )
                + "\n"
            )


def read_image_list(path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}


def check_image_universe(bundle: DatasetBundle, universe: set[str]):
    """Every detection/classification image_id must be a declared image."""
    for d in bundle.detections:
        if d.image_id not in universe:
            raise DataError(f"detection references undeclared image {d.image_id!r}")
    for c in bundle.classification:
        if c.image_id not in universe:
            raise DataError(
                f"classification references undeclared image {c.image_id!r}"
            )
