"""Ordering metrics and multi-run aggregation.

Kendall's tau is reported on a x100 scale: with D discordant
pairs out of C(n, 2), tau = 100 * (1 - 2D / C(n, 2)), so identity scores
100 and a full reversal -100.  D is counted exactly with a merge-sort
inversion count (integers; no floating error until the final division).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence


def _as_perm(seq, n: int | None = None) -> list[int]:
    out = [int(v) for v in seq]
    if n is not None and len(out) != n:
        raise ValueError(f"expected a permutation of length {n}, got {len(out)}")
    if sorted(out) != list(range(len(out))):
        raise ValueError(f"not a permutation of range({len(out)}): {out}")
    return out


def _count_inversions(a: list[int]) -> int:
    """Exact inversion count, O(n log n) merge sort."""
    n = len(a)
    if n < 2:
        return 0
    mid = n // 2
    left, right = a[:mid], a[mid:]
    inv = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    a[:] = merged
    return inv


def kendall_tau(pred: Sequence[int], truth: Sequence[int]) -> float:
    """Rank correlation (x100) between two permutations of the same indices."""
    p = _as_perm(pred)
    t = _as_perm(truth, n=len(p))
    n = len(p)
    if n < 2:
        raise ValueError(f"kendall_tau needs n >= 2 (no pairs at n={n})")
    rank_in_truth = [0] * n
    for r, idx in enumerate(t):
        rank_in_truth[idx] = r
    seq = [rank_in_truth[idx] for idx in p]
    discordant = _count_inversions(seq)
    pairs = n * (n - 1) // 2
    return 100.0 * (1.0 - 2.0 * discordant / pairs)


def pmr(preds: Sequence[Sequence[int]], truths: Sequence[Sequence[int]]) -> float:
    """Perfect match ratio (x100): share of predictions equal to the target."""
    if len(preds) != len(truths) or not preds:
        raise ValueError("need equal, non-empty prediction/target lists")
    hits = sum(1 for p, t in zip(preds, truths)
               if _as_perm(p) == _as_perm(t, n=len(list(p))))
    return 100.0 * hits / len(preds)


def mean_kendall_tau(preds: Sequence[Sequence[int]], truths: Sequence[Sequence[int]]) -> float:
    """Per-instance tau, averaged over the dataset."""
    if len(preds) != len(truths) or not preds:
        raise ValueError("need equal, non-empty prediction/target lists")
    return sum(kendall_tau(p, t) for p, t in zip(preds, truths)) / len(preds)


def validity_rate(preds: Sequence[Sequence[int]], checkers: Sequence[Callable[[Sequence[int]], bool]]) -> float:
    """Share (x100) of predictions whose reordered instance passes its checker."""
    if len(preds) != len(checkers) or not preds:
        raise ValueError("need equal, non-empty prediction/checker lists")
    return 100.0 * sum(1 for p, chk in zip(preds, checkers) if chk(p)) / len(preds)


def avg_tour_length(lengths: Sequence[float]) -> float:
    vals = [float(v) for v in lengths]
    if not vals:
        raise ValueError("need at least one tour length")
    return sum(vals) / len(vals)


def aggregate_runs(values: Sequence[float]) -> tuple[float, float, int]:
    """Mean, sample standard deviation (ddof=1; 0.0 for a single run), count."""
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        raise ValueError("need at least one run value")
    mean = sum(vals) / n
    if n == 1:
        return mean, 0.0, 1
    var = sum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var), n


@dataclass
class MetricRow:
    task: str
    metric: str
    mean: float
    std: float
    count: int
    config_hash: str = ""
    group: str = ""  # optional split key, e.g. cardinality bucket or seed


@dataclass
class EvalReport:
    rows: list[MetricRow] = field(default_factory=list)

    def add(self, task: str, metric: str, values: Sequence[float],
            config_hash: str = "", group: str = "") -> MetricRow:
        mean, std, count = aggregate_runs(values)
        row = MetricRow(task=task, metric=metric, mean=mean, std=std,
                        count=count, config_hash=config_hash, group=group)
        self.rows.append(row)
        return row

    def get(self, task: str, metric: str, group: str = "") -> MetricRow:
        for row in self.rows:
            if row.task == task and row.metric == metric and row.group == group:
                return row
        raise KeyError(f"no row for task={task!r} metric={metric!r} group={group!r}")

    def to_records(self) -> list[dict]:
        return [
            {"task": r.task, "metric": r.metric, "mean": r.mean, "std": r.std,
             "count": r.count, "config_hash": r.config_hash, "group": r.group}
            for r in self.rows
        ]

    def save_jsonl(self, path) -> None:
        import json
        from pathlib import Path

        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", encoding="utf-8") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec) + "\n")

    def save_csv(self, path) -> None:
        import csv
        from pathlib import Path

        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        fields = ["task", "metric", "mean", "std", "count", "config_hash", "group"]
        with p.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for rec in self.to_records():
                writer.writerow(rec)
