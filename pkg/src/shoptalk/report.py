"""Evaluation report files: JSON, a tab-separated score table, the per-turn
prediction dump, and matplotlib figures rendered alongside them.

All text outputs are byte-deterministic for identical inputs; figures carry
no timestamps so repeated runs produce identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import Domain
from .metrics import TABLE_COLUMNS, MetricsReport

_PNG_METADATA = {"Software": "shoptalk"}


def write_table(path: Path, reports: Mapping[Domain, MetricsReport]) -> None:
    """Tab-separated score table, one row per domain."""
    lines = ["\t".join(("domain", "n_turns") + TABLE_COLUMNS)]
    for domain in sorted(reports, key=lambda d: d.value):
        rep = reports[domain]
        lines.append(f"{rep.domain}\t{rep.n_turns}\t{rep.table_row()}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, reports: Mapping[Domain, MetricsReport]) -> None:
    payload = {
        "reports": {
            domain.value: reports[domain].to_dict()
            for domain in sorted(reports, key=lambda d: d.value)
        }
    }
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_predictions(path: Path, predictions: Sequence[Mapping]) -> None:
    """JSONL dump, one record per decoded turn."""
    with path.open("w", encoding="utf-8") as fh:
        for record in predictions:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def plot_training(path: Path, log: Sequence[Mapping]) -> None:
    """Per-task mean loss per epoch, with the phase boundary marked."""
    tasks = sorted({task for rec in log for task in rec["losses"]})
    fig, ax = plt.subplots(figsize=(7, 4))
    for task in tasks:
        xs = [rec["epoch"] for rec in log if task in rec["losses"]]
        ys = [rec["losses"][task] for rec in log if task in rec["losses"]]
        ax.plot(xs, ys, marker=".", label=task)
    boundary = next((rec["epoch"] for rec in log if rec["phase"] == "mt"), None)
    if boundary is not None:
        ax.axvline(boundary - 0.5, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("training loss by task")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_metrics(path: Path, reports: Mapping[Domain, MetricsReport]) -> None:
    """Grouped bars of the rate-valued columns per domain."""
    shown = (
        ("Act.Acc", "action_accuracy"),
        ("Attr.Score", "attribute_score"),
        ("BLEU-4", "bleu4"),
        ("R@1", "recall_at_1"),
        ("MRR", "mrr"),
        ("IntentF1", "intent_f1"),
        ("SlotF1", "slot_f1"),
        ("Joint", "joint_accuracy"),
    )
    domains = sorted(reports, key=lambda d: d.value)
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.8 / len(domains)
    for di, domain in enumerate(domains):
        rep = reports[domain]
        xs = [i + di * width for i in range(len(shown))]
        ax.bar(xs, [getattr(rep, attr) for _, attr in shown], width, label=domain.value)
    ax.set_xticks([i + width * (len(domains) - 1) / 2 for i in range(len(shown))])
    ax.set_xticklabels([label for label, _ in shown], rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("evaluation summary")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def write_report(
    out_dir: str | Path,
    reports: Mapping[Domain, MetricsReport],
    predictions: Sequence[Mapping] | None = None,
    train_log: Sequence[Mapping] | None = None,
) -> list[Path]:
    """Write every report artifact into out_dir; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    table = out / "report.tsv"
    write_table(table, reports)
    written.append(table)

    as_json = out / "report.json"
    write_json(as_json, reports)
    written.append(as_json)

    if predictions is not None:
        preds = out / "predictions.jsonl"
        write_predictions(preds, predictions)
        written.append(preds)

    summary = out / "metrics.png"
    plot_metrics(summary, reports)
    written.append(summary)

    if train_log:
        curves = out / "loss_curves.png"
        plot_training(curves, train_log)
        written.append(curves)
    return written
