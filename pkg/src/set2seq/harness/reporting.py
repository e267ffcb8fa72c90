"""Report rendering: turn training logs and metric records into CSV + figures.

Inputs are the line-delimited JSON files the trainer and recipes emit.  The
renderer groups records, writes flat CSV tables, and draws matplotlib figures
next to them (PNG, non-interactive backend).
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def read_jsonl(path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from None
    return records


def _save_fig(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=200, bbox_inches="tight")
    plt.close(fig)


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def render_training_report(log_path, out_dir) -> list[Path]:
    """Loss/metric curves and a per-epoch CSV from a train_log.jsonl."""
    out = Path(out_dir)
    epochs = [r for r in read_jsonl(log_path) if r.get("event") == "epoch"]
    if not epochs:
        raise ValueError(f"{log_path}: no epoch records to report")
    keys = sorted({k for r in epochs for k in r} - {"event"})
    ordered = ["epoch"] + [k for k in keys if k != "epoch"]
    outputs = []
    csv_path = out / "training_curves.csv"
    _write_csv(csv_path, ordered, epochs)
    outputs.append(csv_path)

    xs = [r["epoch"] for r in epochs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [r["train_loss"] for r in epochs], label="train loss")
    if any("val_loss" in r for r in epochs):
        pts = [(r["epoch"], r["val_loss"]) for r in epochs if "val_loss" in r]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label="val loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    loss_path = out / "loss_curve.png"
    _save_fig(fig, loss_path)
    outputs.append(loss_path)

    metric_keys = [k for k in ordered
                   if k.startswith("val_") and k != "val_loss"
                   and any(isinstance(r.get(k), (int, float)) for r in epochs)]
    if metric_keys:
        fig, ax = plt.subplots(figsize=(6, 4))
        for key in metric_keys:
            pts = [(r["epoch"], r[key]) for r in epochs if key in r]
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", label=key[len("val_"):])
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation metric")
        ax.legend()
        metrics_path = out / "metrics_curve.png"
        _save_fig(fig, metrics_path)
        outputs.append(metrics_path)
    return outputs


def render_metric_report(records_path, out_dir) -> list[Path]:
    """Grouped bar chart + CSV from flat metric records.

    Accepts either EvalReport rows (mean/std per metric) or recipe run
    records (one value per seed, aggregated here).
    """
    out = Path(out_dir)
    records = read_jsonl(records_path)
    if not records:
        raise ValueError(f"{records_path}: no records to report")

    if all("mean" in r and "metric" in r for r in records):
        rows = [{"task": r.get("task", ""), "group": r.get("group", ""),
                 "metric": r["metric"], "mean": r["mean"], "std": r.get("std", 0.0),
                 "count": r.get("count", 1)} for r in records]
    elif all("metric" in r and "value" in r for r in records):
        bags: dict[tuple, list[float]] = defaultdict(list)
        for r in records:
            label = str(r.get("task", r.get("variant", r.get("order",
                        r.get("cardinality", r.get("recipe", ""))))))
            bags[(label, r["metric"])].append(float(r["value"]))
        rows = []
        for (label, metric), values in sorted(bags.items()):
            n = len(values)
            mean = sum(values) / n
            var = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
            rows.append({"task": label, "group": "", "metric": metric,
                         "mean": mean, "std": var ** 0.5, "count": n})
    elif all("tour_length" in r for r in records):
        bags = defaultdict(list)
        for r in records:
            bags[(str(r.get("method", "")), "tour_length", r.get("cardinality", 0))] \
                .append(float(r["tour_length"]))
        rows = []
        for (label, metric, card), values in sorted(bags.items()):
            n = len(values)
            mean = sum(values) / n
            var = sum((v - mean) ** 2 for v in values) / (n - 1) if n > 1 else 0.0
            rows.append({"task": label, "group": str(card), "metric": metric,
                         "mean": mean, "std": var ** 0.5, "count": n})
    else:
        raise ValueError(
            f"{records_path}: records are neither report rows (mean/std) nor "
            f"run records (metric/value)")

    outputs = []
    csv_path = out / "metrics.csv"
    _write_csv(csv_path, ["task", "group", "metric", "mean", "std", "count"], rows)
    outputs.append(csv_path)

    metrics = sorted({r["metric"] for r in rows})
    for metric in metrics:
        sel = [r for r in rows if r["metric"] == metric]
        labels = [f'{r["task"]}{":" + r["group"] if r["group"] else ""}' for r in sel]
        fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(sel)), 4))
        ax.bar(range(len(sel)), [r["mean"] for r in sel],
               yerr=[r["std"] for r in sel], capsize=4)
        ax.set_xticks(range(len(sel)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylabel(metric)
        fig_path = out / f"{metric}.png"
        _save_fig(fig, fig_path)
        outputs.append(fig_path)
    return outputs


def render_report(input_path, out_dir) -> list[Path]:
    """Choose the renderer by sniffing the record shape."""
    records = read_jsonl(input_path)
    if not records:
        raise ValueError(f"{input_path}: empty input")
    if any(r.get("event") in ("epoch", "config") for r in records):
        return render_training_report(input_path, out_dir)
    return render_metric_report(input_path, out_dir)
