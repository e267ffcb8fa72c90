"""Versioned checkpoints: parameters, optimizer moments, RNG states, config.

One .npz file holds named parameter blobs ("param/<name>"), AdamW moment
blobs ("adam_m/<name>", "adam_v/<name>") and a JSON metadata blob (format
version, step/epoch counters, resolved config, RNG snapshots, best-metric
bookkeeping).  Loading restores training bit-exactly: resuming and then
running one step equals never having stopped.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..numerics import AdamwState, SeededRng
from .builder import Model, build_model
from .config import RunConfig, load_config

FORMAT_VERSION = 1


def save_checkpoint(path, model: Model, adam: AdamwState, cfg: RunConfig,
                    epoch: int, rng_states: dict[str, dict],
                    extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    for name, p in model.store.items():
        arrays[f"param/{name}"] = p.data
        arrays[f"adam_m/{name}"] = adam.m[name]
        arrays[f"adam_v/{name}"] = adam.v[name]
    meta = {
        "format_version": FORMAT_VERSION,
        "epoch": int(epoch),
        "adam_step": int(adam.step),
        "d_input": int(model.d_input),
        "config": cfg.resolved(),
        "config_hash": cfg.config_hash(),
        "rng_states": rng_states,
        "extra": extra or {},
    }
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[Model, AdamwState, RunConfig, dict]:
    """Rebuild (model, optimizer state, config, meta) from a checkpoint file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path}: not a checkpoint (missing metadata blob)")
        meta = json.loads(bytes(data["__meta__"].tobytes()).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint format {meta.get('format_version')!r}, "
                f"expected {FORMAT_VERSION}")
        cfg = _config_from_resolved(meta["config"])
        model = build_model(cfg, d_input=int(meta["d_input"]))
        params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
        model.store.load_state_arrays(params)
        adam = AdamwState(model.store)
        adam.step = int(meta["adam_step"])
        for name in model.store.names():
            adam.m[name] = np.asarray(data[f"adam_m/{name}"], dtype=np.float64).copy()
            adam.v[name] = np.asarray(data[f"adam_v/{name}"], dtype=np.float64).copy()
    return model, adam, cfg, meta


def _config_from_resolved(resolved: dict) -> RunConfig:
    """Resolved-config dict (as stored in checkpoints/logs) -> RunConfig."""
    tree = json.loads(json.dumps(resolved))  # deep copy
    profile = tree.pop("profile", None)
    cfg = RunConfig()
    from .config import _merge_tree  # shared strict merger

    cfg.profile = profile
    _merge_tree(cfg, tree)
    return cfg.validate()


def rng_snapshot(rngs: dict[str, SeededRng]) -> dict[str, dict]:
    return {name: rng.state() for name, rng in rngs.items()}


def rng_restore(states: dict[str, dict]) -> dict[str, SeededRng]:
    return {name: SeededRng.from_state(state) for name, state in states.items()}
