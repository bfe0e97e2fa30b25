import json

import pytest

from dbfusion import io
from dbfusion.core import BoundingBox, ClassificationScore, DataError, Detection, GroundTruthObject
from dbfusion.prior import PriorModel, PriorSample


def write_lines(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


class TestReadDetections:
    def test_count_and_order(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(
            p,
            [
                {"image_id": "a", "class_id": "c", "bbox": [0, 0, 1, 1], "score": s}
                for s in (0.1, 0.9, 0.5)
            ],
        )
        dets = io.read_detections(p, "src")
        assert [d.score for d in dets] == [0.1, 0.9, 0.5]
        assert all(d.source_id == "src" for d in dets)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        assert io.read_detections(p, "src") == []

    def test_invalid_box_names_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(
            p,
            [
                {"image_id": "a", "class_id": "c", "bbox": [0, 0, 1, 1], "score": 0.5},
                {"image_id": "a", "class_id": "c", "bbox": [10, 10, 5, 20], "score": 0.5},
            ],
        )
        with pytest.raises(DataError, match=":2"):
            io.read_detections(p, "src")

    def test_non_finite_score(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"image_id":"a","class_id":"c","bbox":[0,0,1,1],"score":Infinity}\n')
        with pytest.raises(DataError):
            io.read_detections(p, "src")

    def test_malformed_line_positioned(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"image_id":"a","class_id":"c","bbox":[0,0,1,1],"score":0.5}\nnot json\n')
        with pytest.raises(DataError, match=":2"):
            io.read_detections(p, "src")


class TestReadGroundTruth:
    def test_difficult_defaults_false(self, tmp_path):
        p = tmp_path / "g.jsonl"
        write_lines(p, [{"image_id": "a", "class_id": "c", "bbox": [0, 0, 1, 1]}])
        assert io.read_ground_truth(p)[0].difficult is False

    def test_two_records_two_classes(self, tmp_path):
        p = tmp_path / "g.jsonl"
        write_lines(
            p,
            [
                {"image_id": "a", "class_id": "c1", "bbox": [0, 0, 1, 1]},
                {"image_id": "a", "class_id": "c2", "bbox": [2, 2, 3, 3]},
            ],
        )
        assert len(io.read_ground_truth(p)) == 2

    def test_duplicates_kept(self, tmp_path):
        p = tmp_path / "g.jsonl"
        rec = {"image_id": "a", "class_id": "c", "bbox": [0, 0, 1, 1]}
        write_lines(p, [rec, rec])
        assert len(io.read_ground_truth(p)) == 2


class TestReadClassification:
    def test_one_image_many_classes(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_lines(
            p,
            [{"image_id": "img1", "class_id": f"c{i}", "score": 0.5} for i in range(20)],
        )
        assert len(io.read_classification(p, "cls")) == 20

    def test_duplicate_pair_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_lines(
            p,
            [
                {"image_id": "img1", "class_id": "dog", "score": 0.5},
                {"image_id": "img1", "class_id": "dog", "score": 0.6},
            ],
        )
        with pytest.raises(DataError, match="duplicate"):
            io.read_classification(p, "cls")

    def test_score_round_trip(self, tmp_path):
        p = tmp_path / "c.jsonl"
        io.write_classification(
            [ClassificationScore("img1", "dog", 0.73, "cls")], p
        )
        assert io.read_classification(p, "cls")[0].score == 0.73


class TestRoundTrips:
    def test_detections(self, tmp_path):
        dets = [
            Detection("a", "c", BoundingBox(0.1, 0.2, 10.3, 20.7), 0.123456789, "s"),
            Detection("b", "c", BoundingBox(5, 5, 6, 6), -1.5e-8, "s"),
        ]
        p = tmp_path / "d.jsonl"
        io.write_detections(dets, p)
        assert io.read_detections(p, "s") == dets

    def test_ground_truth(self, tmp_path):
        gts = [
            GroundTruthObject("a", "c", BoundingBox(0, 0, 1, 1), True),
            GroundTruthObject("a", "c", BoundingBox(2, 2, 3, 3), False),
        ]
        p = tmp_path / "g.jsonl"
        io.write_ground_truth(gts, p)
        assert io.read_ground_truth(p) == gts

    def test_prior_model(self, tmp_path):
        model = PriorModel(
            class_id="dog",
            source_id="det",
            samples=(
                PriorSample(0.9, 1.0, 0.5),
                PriorSample(0.7, 2 / 3, 1.0),
            ),
            n=3,
            n_pos=17,
            iou_threshold=0.5,
            n_det=42,
        )
        p = tmp_path / "prior.json"
        io.write_prior_model(model, p)
        assert io.read_prior_model(p) == model

    def test_prior_model_length_mismatch(self, tmp_path):
        p = tmp_path / "prior.json"
        p.write_text(
            json.dumps(
                {
                    "class_id": "c",
                    "source_id": "s",
                    "n": 1,
                    "thresholds": [0.9, 0.5],
                    "precision": [1.0],
                    "recall": [0.5, 1.0],
                }
            )
        )
        with pytest.raises(DataError, match="lengths differ"):
            io.read_prior_model(p)

    def test_prior_model_n_mandatory(self, tmp_path):
        p = tmp_path / "prior.json"
        p.write_text(
            json.dumps(
                {
                    "class_id": "c",
                    "source_id": "s",
                    "thresholds": [0.9],
                    "precision": [1.0],
                    "recall": [0.5],
                }
            )
        )
        with pytest.raises(DataError, match="'n'"):
            io.read_prior_model(p)


class TestVocFormat:
    def test_read(self, tmp_path):
        p = tmp_path / "comp.txt"
        p.write_text("img1 0.9 10 10 50 50\nimg2 0.3 5.5 5.5 20 30\n")
        dets = io.read_voc_detections(p, "dog", "det")
        assert len(dets) == 2
        assert dets[0].image_id == "img1"
        assert dets[0].class_id == "dog"
        assert dets[1].bbox == BoundingBox(5.5, 5.5, 20, 30)

    def test_bad_field_count(self, tmp_path):
        p = tmp_path / "comp.txt"
        p.write_text("img1 0.9 10 10 50\n")
        with pytest.raises(DataError, match=":1"):
            io.read_voc_detections(p, "dog", "det")


class TestImageUniverse:
    def test_undeclared_image_rejected(self, tmp_path):
        from dbfusion.core import DatasetBundle

        bundle = DatasetBundle(
            detections=[Detection("ghost", "c", BoundingBox(0, 0, 1, 1), 0.5, "s")]
        )
        with pytest.raises(DataError, match="ghost"):
            io.check_image_universe(bundle, {"a", "b"})
