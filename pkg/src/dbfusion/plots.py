"""Figure rendering for evaluation reports."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluate import EvaluationReport


def render_report_figures(report: EvaluationReport, out_dir) -> list[str]:
    """Write PR curves and a per-class AP chart next to the report files."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    for cid in sorted(report.per_class):
        r = report.per_class[cid]
        recalls = [s[2] for s in r.pr_samples]
        precisions = [s[1] for s in r.pr_samples]
        ax.plot(recalls, precisions, label=f"{cid} (AP {r.ap:.3f})")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_title(f"PR curves (mAP {report.map_score:.3f}, {report.ap_method})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "pr_curves.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3))
    classes = sorted(report.per_class)
    aps = [report.per_class[c].ap for c in classes]
    ax.bar(range(len(classes)), aps, color="#4878a8")
    ax.axhline(report.map_score, color="#742d18", ls="--", lw=1, label="mAP")
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels(classes, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("AP")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, "ap_by_class.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written
