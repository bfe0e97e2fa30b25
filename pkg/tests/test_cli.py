import json
import os

import pytest

from dbfusion import io
from dbfusion.cli import main

CONFIG = {
    "n_images": 40,
    "image_size": [640, 480],
    "classes": ["c0", "c1", "c2"],
    "objects_per_image": [1, 3],
    "class_presence": 0.5,
    "detectors": [
        {
            "source_id": "det",
            "tp_recall": 0.8,
            "fp_rate": 2.0,
            "tp_score_dist": [5, 3],
            "fp_score_dist": [3, 5],
            "localization_jitter": 0.05,
        }
    ],
    "classifier": {
        "source_id": "cls",
        "pos_score_dist": [8, 2],
        "neg_score_dist": [2, 8],
    },
    "seed": 0,
}


@pytest.fixture
def workspace(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(CONFIG))
    out = tmp_path / "data"
    code = main(["simulate", "--config", str(cfg), "--out-dir", str(out)])
    assert code == 0
    return tmp_path


def run_build_prior(ws, out="priors", n="auto"):
    val = ws / "data" / "val"
    return main(
        [
            "build-prior",
            "--detections", f"det={val / 'detections_det.jsonl'}",
            "--classification", f"cls={val / 'classification_cls.jsonl'}",
            "--groundtruth", str(val / "ground_truth.jsonl"),
            "--n", n,
            "--out", str(ws / out),
        ]
    )


class TestSimulate:
    def test_partitions_and_manifest(self, workspace):
        for part in ("train", "val", "test"):
            pdir = workspace / "data" / part
            assert (pdir / "ground_truth.jsonl").exists()
            assert (pdir / "detections_det.jsonl").exists()
            assert (pdir / "classification_cls.jsonl").exists()
        manifest = json.loads(
            (workspace / "data" / "manifest_simulate.json").read_text()
        )
        assert manifest["command"] == "simulate"
        assert manifest["options"]["config"]["seed"] == 0

    def test_byte_deterministic(self, workspace, tmp_path):
        cfg = workspace / "config.json"
        out2 = tmp_path / "again"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out2)]) == 0
        a = (workspace / "data" / "test" / "detections_det.jsonl").read_bytes()
        b = (out2 / "test" / "detections_det.jsonl").read_bytes()
        assert a == b

    def test_missing_config_is_data_error(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "no.json"),
                     "--out-dir", str(tmp_path / "o")]) == 2


class TestBuildPrior:
    def test_one_file_per_class_and_source(self, workspace):
        assert run_build_prior(workspace) == 0
        files = sorted(os.listdir(workspace / "priors"))
        priors = [f for f in files if f.startswith("prior_")]
        assert len(priors) == 6  # 3 classes x (1 detector + 1 classifier)

    def test_fixed_n_written(self, workspace):
        assert run_build_prior(workspace, out="priors4", n="4") == 0
        for key, model in io.read_prior_models(workspace / "priors4").items():
            assert model.n == 4

    def test_bad_n_is_usage_error(self, workspace):
        assert run_build_prior(workspace, out="bad", n="many") == 1

    def test_missing_input_is_data_error(self, workspace):
        code = main(
            [
                "build-prior",
                "--detections", "det=/nonexistent.jsonl",
                "--groundtruth", str(workspace / "data" / "val" / "ground_truth.jsonl"),
                "--out", str(workspace / "p"),
            ]
        )
        assert code == 2


class TestFuse:
    def run_fuse(self, ws, out_name="fused.jsonl", priors="priors"):
        test = ws / "data" / "test"
        return main(
            [
                "fuse",
                "--detections", f"det={test / 'detections_det.jsonl'}",
                "--classification", f"cls={test / 'classification_cls.jsonl'}",
                "--priors", str(ws / priors),
                "--out", str(ws / out_name),
            ]
        )

    def test_fuse_writes_output_and_manifest(self, workspace):
        assert run_build_prior(workspace) == 0
        assert self.run_fuse(workspace) == 0
        lines = (workspace / "fused.jsonl").read_text().splitlines()
        assert lines
        rec = json.loads(lines[0])
        assert set(rec) >= {"image_id", "class_id", "bbox", "fused_score", "mass"}
        assert (workspace / "manifest_fuse.json").exists()

    def test_missing_prior_is_data_error(self, workspace):
        assert run_build_prior(workspace) == 0
        os.remove(workspace / "priors" / "prior_c1_det.json")
        assert self.run_fuse(workspace, out_name="f2.jsonl") == 2

    def test_byte_deterministic(self, workspace):
        assert run_build_prior(workspace) == 0
        assert self.run_fuse(workspace, out_name="f1.jsonl") == 0
        assert self.run_fuse(workspace, out_name="f2.jsonl") == 0
        assert (workspace / "f1.jsonl").read_bytes() == (workspace / "f2.jsonl").read_bytes()


class TestEval:
    def test_perfect_detector_map_one(self, tmp_path, capsys):
        cfg = dict(CONFIG)
        cfg["detectors"] = [
            {
                "source_id": "det",
                "tp_recall": 1.0,
                "fp_rate": 0.0,
                "tp_score_dist": [5, 3],
                "fp_score_dist": [3, 5],
                "localization_jitter": 0.0,
            }
        ]
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "d")]) == 0
        test = tmp_path / "d" / "test"
        code = main(
            [
                "eval",
                "--detections", str(test / "detections_det.jsonl"),
                "--groundtruth", str(test / "ground_truth.jsonl"),
            ]
        )
        assert code == 0
        assert "mAP = 1.000000" in capsys.readouterr().out

    def test_report_files_and_figures(self, workspace):
        test = workspace / "data" / "test"
        report = workspace / "report"
        code = main(
            [
                "eval",
                "--detections", str(test / "detections_det.jsonl"),
                "--groundtruth", str(test / "ground_truth.jsonl"),
                "--report", str(report),
            ]
        )
        assert code == 0
        assert (report / "report.json").exists()
        assert (report / "report.txt").exists()
        assert (report / "pr_c0.csv").exists()
        assert (report / "pr_curves.png").exists()
        assert (report / "ap_by_class.png").exists()
        doc = json.loads((report / "report.json").read_text())
        assert set(doc["per_class"]) == {"c0", "c1", "c2"}

    def test_no_figures_flag(self, workspace):
        test = workspace / "data" / "test"
        report = workspace / "report_nofig"
        code = main(
            [
                "eval",
                "--detections", str(test / "detections_det.jsonl"),
                "--groundtruth", str(test / "ground_truth.jsonl"),
                "--report", str(report),
                "--no-figures",
            ]
        )
        assert code == 0
        assert not (report / "pr_curves.png").exists()

    def test_bad_ap_value_is_usage_error(self, workspace):
        test = workspace / "data" / "test"
        code = main(
            [
                "eval",
                "--detections", str(test / "detections_det.jsonl"),
                "--groundtruth", str(test / "ground_truth.jsonl"),
                "--ap", "coco",
            ]
        )
        assert code == 1


class TestManifests:
    def test_reruns_differ_only_in_timestamp(self, workspace, tmp_path):
        cfg = workspace / "config.json"
        out2 = tmp_path / "rerun"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out2)]) == 0
        m1 = json.loads((workspace / "data" / "manifest_simulate.json").read_text())
        m2 = json.loads((out2 / "manifest_simulate.json").read_text())
        m1.pop("timestamp")
        m2.pop("timestamp")
        m1.pop("outputs")
        m2.pop("outputs")  # paths differ by tmp dir
        assert m1 == m2
