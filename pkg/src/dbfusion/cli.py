"""Command-line pipeline: simulate -> build-prior -> fuse -> eval.

Every command is file-mediated and writes a run manifest next to its
outputs. Exit codes: 0 success, 1 usage error, 2 data/configuration
error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys

from . import __version__, io
from .core import DataError, DatasetBundle
from .evaluate import evaluate
from .fusion import ConfigurationError, fuse_dataset
from .plots import render_report_figures
from .prior import DEFAULT_N_MAX, broadcast_classification, build_prior_model
from .synth import GenerationError, SyntheticConfig, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(ValueError):
    """Bad flag values caught after argparse (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _config_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir, command: str, options: dict, inputs: list, outputs: list):
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "options": options,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": sorted(str(p) for p in outputs),
        "version": __version__,
        "config_hash": _config_hash({"command": command, "options": options}),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(out_dir, f"manifest_{command}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _parse_source_arg(value: str) -> tuple[str, str]:
    if "=" not in value:
        raise DataError(
            f"expected SOURCE_ID=PATH, got {value!r}"
        )
    src, path = value.split("=", 1)
    if not src or not path:
        raise DataError(f"expected SOURCE_ID=PATH, got {value!r}")
    return src, path


def _load_inputs(args) -> DatasetBundle:
    bundle = DatasetBundle()
    for spec in args.detections:
        src, path = _parse_source_arg(spec)
        bundle.detections.extend(io.read_detections(path, src))
    if getattr(args, "classification", None):
        src, path = _parse_source_arg(args.classification)
        bundle.classification.extend(io.read_classification(path, src))
    if getattr(args, "groundtruth", None):
        bundle.ground_truth.extend(io.read_ground_truth(args.groundtruth))
    if getattr(args, "image_list", None):
        io.check_image_universe(bundle, io.read_image_list(args.image_list))
    return bundle


def cmd_simulate(args) -> int:
    config = SyntheticConfig.from_file(args.config)
    if args.seed is not None:
        doc = config.to_dict()
        doc["seed"] = args.seed
        config = SyntheticConfig.from_dict(doc)

    outputs = []
    for partition in ("train", "val", "test"):
        pdir = os.path.join(args.out_dir, partition)
        os.makedirs(pdir, exist_ok=True)
        bundle = generate(config, partition)
        gt_path = os.path.join(pdir, "ground_truth.jsonl")
        io.write_ground_truth(bundle.ground_truth, gt_path)
        outputs.append(gt_path)
        for profile in config.detectors:
            path = os.path.join(pdir, f"detections_{profile.source_id}.jsonl")
            io.write_detections(
                [d for d in bundle.detections if d.source_id == profile.source_id],
                path,
            )
            outputs.append(path)
        if config.classifier is not None:
            path = os.path.join(
                pdir, f"classification_{config.classifier.source_id}.jsonl"
            )
            io.write_classification(bundle.classification, path)
            outputs.append(path)

    write_manifest(
        args.out_dir,
        "simulate",
        {"config": config.to_dict(), "seed": config.seed},
        [args.config],
        outputs,
    )
    print(f"wrote train/val/test partitions under {args.out_dir}")
    return EXIT_OK


def cmd_build_prior(args) -> int:
    bundle = _load_inputs(args)
    if not bundle.ground_truth:
        raise DataError(f"no ground truth records in {args.groundtruth}")

    if args.n == "auto":
        n = None
    else:
        try:
            n = int(args.n)
        except ValueError as e:
            raise UsageError(f"--n must be 'auto' or an integer, got {args.n!r}") from e
        if n < 1:
            raise UsageError(f"--n must be >= 1, got {n}")
    classes = sorted({g.class_id for g in bundle.ground_truth})
    detector_sources = sorted({d.source_id for d in bundle.detections})

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for cid in classes:
        for src in detector_sources:
            model = build_prior_model(
                bundle.detections,
                bundle.ground_truth,
                cid,
                src,
                iou_threshold=args.iou,
                n=n,
                n_max=DEFAULT_N_MAX,
            )
            path = os.path.join(args.out, io.prior_model_filename(cid, src))
            io.write_prior_model(model, path)
            outputs.append(path)

        if bundle.classification:
            cls_src = bundle.classification[0].source_id
            cls_records = [c for c in bundle.classification if c.class_id == cid]
            cls_dets = [d for d in bundle.detections if d.class_id == cid]
            broadcast = [
                d
                for d in broadcast_classification(cls_records, cls_dets)
                if d.score is not None
            ]
            model = build_prior_model(
                broadcast,
                bundle.ground_truth,
                cid,
                cls_src,
                iou_threshold=args.iou,
                n=n,
                n_max=DEFAULT_N_MAX,
            )
            path = os.path.join(args.out, io.prior_model_filename(cid, cls_src))
            io.write_prior_model(model, path)
            outputs.append(path)

    inputs = [s.split("=", 1)[1] for s in args.detections] + [args.groundtruth]
    if args.classification:
        inputs.append(args.classification.split("=", 1)[1])
    write_manifest(
        args.out,
        "build_prior",
        {"iou": args.iou, "n": args.n},
        inputs,
        outputs,
    )
    print(f"wrote {len(outputs)} prior model(s) to {args.out}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    bundle = _load_inputs(args)
    priors = io.read_prior_models(args.priors)
    fused = fuse_dataset(
        bundle.detections, bundle.classification, priors, args.cluster_iou
    )
    io.write_fused(fused, args.out)
    inputs = [s.split("=", 1)[1] for s in args.detections] + [args.priors]
    if args.classification:
        inputs.append(args.classification.split("=", 1)[1])
    write_manifest(
        os.path.dirname(os.path.abspath(args.out)),
        "fuse",
        {"cluster_iou": args.cluster_iou},
        inputs,
        [args.out],
    )
    print(f"wrote {len(fused)} fused detection(s) to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dets = io.read_detections(args.detections, "eval")
    gts = io.read_ground_truth(args.groundtruth)
    method = "voc07_11point" if args.ap == "voc07" else "continuous"
    report = evaluate(dets, gts, iou_threshold=args.iou, method=method)

    outputs = []
    if args.report:
        os.makedirs(args.report, exist_ok=True)
        json_path = os.path.join(args.report, "report.json")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        txt_path = os.path.join(args.report, "report.txt")
        with open(txt_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_table())
        outputs += [json_path, txt_path]
        for cid, result in sorted(report.per_class.items()):
            csv_path = os.path.join(args.report, f"pr_{cid}.csv")
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["threshold", "precision", "recall"])
                w.writerows(result.pr_samples)
            outputs.append(csv_path)
        if args.figures:
            outputs += render_report_figures(report, args.report)
        write_manifest(
            args.report,
            "eval",
            {"iou": args.iou, "ap": args.ap},
            [args.detections, args.groundtruth],
            outputs,
        )

    print(report.to_table())
    print(f"mAP = {report.map_score:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dbfusion",
        description="Belief fusion of object-detector outputs with "
        "image-classification priors.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark")
    p.add_argument("--config", required=True, help="synthetic config JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-prior", help="build prior PR models from a val split")
    p.add_argument(
        "--detections", action="append", required=True, metavar="SOURCE=PATH"
    )
    p.add_argument("--classification", default=None, metavar="SOURCE=PATH")
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--n", default="auto", help="ambiguity exponent: auto or an integer")
    p.add_argument("--image-list", default=None)
    p.add_argument("--out", required=True, help="output directory for prior files")
    p.set_defaults(func=cmd_build_prior)

    p = sub.add_parser("fuse", help="fuse detections with classification priors")
    p.add_argument(
        "--detections", action="append", required=True, metavar="SOURCE=PATH"
    )
    p.add_argument("--classification", default=None, metavar="SOURCE=PATH")
    p.add_argument("--priors", required=True, help="directory of prior model files")
    p.add_argument("--cluster-iou", type=float, default=0.5)
    p.add_argument("--image-list", default=None)
    p.add_argument("--out", required=True, help="fused detections JSONL path")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="VOC-style AP/mAP evaluation")
    p.add_argument("--detections", required=True)
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--ap", choices=("continuous", "voc07"), default="continuous")
    p.add_argument("--report", default=None, help="report output directory")
    p.add_argument(
        "--no-figures", dest="figures", action="store_false",
        help="skip PNG figure rendering",
    )
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (
        DataError,
        ConfigurationError,
        GenerationError,
        FileNotFoundError,
        NotADirectoryError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
