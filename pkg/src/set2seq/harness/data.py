"""Dataset construction from the config's data section."""

from __future__ import annotations

from ..datagen import (
    GrammarConfig,
    Instance,
    RulesetConfig,
    TspConfig,
    gen_grammar,
    gen_ruleset,
    gen_tsp,
    load_dataset,
    load_embedded,
)
from ..numerics.rng import SeededRng
from .config import DataSection


def build_instances(data: DataSection, rng: SeededRng, split: str = "train") -> list[Instance]:
    """Generate (or load) one split.  Eval splits may use their own ranges."""
    if split not in ("train", "eval"):
        raise ValueError(f"split must be 'train' or 'eval', got {split!r}")
    path = data.train_path if split == "train" else data.eval_path
    if path:
        return load_embedded(path) if data.task == "embedded" else load_dataset(path)
    if data.task == "embedded":
        raise ValueError(f"embedded task requires data.{split}_path")

    count = data.count if split == "train" else data.eval_count
    n_min = data.n_min if split == "train" or data.eval_n_min is None else data.eval_n_min
    n_max = data.n_max if split == "train" or data.eval_n_max is None else data.eval_n_max

    if data.task == "tsp":
        with_targets = data.with_targets if split == "train" else (data.with_targets and n_max <= 13)
        cfg = TspConfig(count=count, n_min=n_min, n_max=n_max,
                        with_targets=with_targets, convention=data.convention)
        return gen_tsp(cfg, rng)
    if data.task in ("anbncn", "anbkcnk", "dyck"):
        cfg = GrammarConfig(kind=data.task, count=count, n_min=n_min, n_max=n_max,
                            k_min=data.k_min, k_max=data.k_max)
        return gen_grammar(cfg, rng)
    if data.task == "ruleset":
        card_min = data.card_min if split == "train" or data.eval_n_min is None else data.eval_n_min
        card_max = data.card_max if split == "train" or data.eval_n_max is None else data.eval_n_max
        cfg = RulesetConfig(n_rel=data.n_rel, count=count, card_min=card_min,
                            card_max=card_max, key_min=data.key_min, key_max=data.key_max,
                            modulus=data.modulus, distractor_dims=data.distractor_dims)
        return gen_ruleset(cfg, rng)
    raise ValueError(f"unknown task {data.task!r}")


def split_validation(instances: list[Instance], fraction: float,
                     rng: SeededRng) -> tuple[list[Instance], list[Instance]]:
    """Deterministic shuffled split into (train, validation)."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    order = rng.permutation(len(instances))
    n_val = int(round(len(instances) * fraction))
    val_idx = set(order[:n_val].tolist())
    train = [instances[i] for i in range(len(instances)) if i not in val_idx]
    val = [instances[i] for i in range(len(instances)) if i in val_idx]
    return train, val
