"""Dataset records and line-delimited JSON persistence.

One instance per line: {"elements": [[...], ...], "target": [...] | null,
"task": "...", "meta": {...}}.  Floats round-trip exactly (json emits the
shortest representation that parses back to the same binary64 value).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Instance:
    elements: np.ndarray           # (n, d_raw) float64
    target: list[int] | None       # permutation of range(n), or None for eval-only
    task: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=np.float64)
        if self.elements.ndim != 2 or self.elements.shape[0] < 1:
            raise ValueError(f"elements must be a non-empty 2-D array, got shape {self.elements.shape}")
        if self.target is not None:
            n = self.elements.shape[0]
            t = [int(v) for v in self.target]
            if sorted(t) != list(range(n)):
                raise ValueError(f"target must be a permutation of range({n}), got {t}")
            self.target = t

    @property
    def n(self) -> int:
        return self.elements.shape[0]

    @property
    def d_raw(self) -> int:
        return self.elements.shape[1]


def save_dataset(instances: list[Instance], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            rec = {
                "elements": inst.elements.tolist(),
                "target": inst.target,
                "task": inst.task,
                "meta": inst.meta,
            }
            fh.write(json.dumps(rec) + "\n")


def _parse_record(rec: dict, lineno: int) -> Instance:
    for key in ("elements", "target", "task", "meta"):
        if key not in rec:
            raise ValueError(f"line {lineno}: missing key {key!r}")
    elements = rec["elements"]
    if (not isinstance(elements, list) or not elements
            or not all(isinstance(row, list) for row in elements)):
        raise ValueError(f"line {lineno}: elements must be a non-empty list of rows")
    width = len(elements[0])
    if any(len(row) != width for row in elements):
        raise ValueError(f"line {lineno}: ragged element rows")
    try:
        arr = np.asarray(elements, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"line {lineno}: non-numeric element values") from exc
    try:
        return Instance(elements=arr, target=rec["target"], task=str(rec["task"]),
                        meta=dict(rec["meta"]))
    except ValueError as exc:
        raise ValueError(f"line {lineno}: {exc}") from exc


def load_dataset(path) -> list[Instance]:
    """Read a line-delimited dataset; any malformed line raises with its number."""
    path = Path(path)
    instances: list[Instance] = []
    d_raw: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ValueError(f"line {lineno}: record must be a JSON object")
            inst = _parse_record(rec, lineno)
            if d_raw is None:
                d_raw = inst.d_raw
            elif inst.d_raw != d_raw:
                raise ValueError(
                    f"line {lineno}: feature width {inst.d_raw} != {d_raw} from earlier records")
            instances.append(inst)
    return instances


def load_embedded(path) -> list[Instance]:
    """Load user-supplied pre-embedded sets; every record must carry a target."""
    instances = load_dataset(path)
    for i, inst in enumerate(instances, start=1):
        if inst.target is None:
            raise ValueError(f"record {i}: embedded datasets require a target on every instance")
    return instances
