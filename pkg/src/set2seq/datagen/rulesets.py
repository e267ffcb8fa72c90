"""Synthetic n-th-order ordering rulesets.

Each element carries an integer key; its sort score couples it to every
(n_rel - 1)-subset of the other elements:

    score(i) = sum over subsets S of ((key_i + sum of keys in S)^2 mod M)

so no element's position can be decided without joint reasoning over the
set (higher n_rel = higher-order interdependence).  The modulus keeps the
mapping from keys to scores deliberately non-monotonic.  Targets sort
ascending by (score, key, original index).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..numerics.rng import SeededRng, parallel_map
from .io import Instance

DEFAULT_MODULUS = 97


@dataclass
class RulesetConfig:
    n_rel: int = 3
    count: int = 1000
    card_min: int = 10
    card_max: int = 15
    key_min: int = 1
    key_max: int = 50
    modulus: int = DEFAULT_MODULUS
    distractor_dims: int = 2

    def __post_init__(self):
        if self.n_rel < 1:
            raise ValueError(f"n_rel must be >= 1, got {self.n_rel}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 1 <= self.card_min <= self.card_max:
            raise ValueError(f"need 1 <= card_min <= card_max, got [{self.card_min}, {self.card_max}]")
        if self.card_min < self.n_rel:
            raise ValueError(
                f"cardinality must be >= n_rel ({self.n_rel}) so each element has enough partners")
        if not 1 <= self.key_min <= self.key_max:
            raise ValueError(f"need 1 <= key_min <= key_max, got [{self.key_min}, {self.key_max}]")
        if self.modulus < 2:
            raise ValueError(f"modulus must be >= 2, got {self.modulus}")
        if self.distractor_dims < 0:
            raise ValueError(f"distractor_dims must be >= 0, got {self.distractor_dims}")


def ruleset_score(keys, i: int, n_rel: int, modulus: int = DEFAULT_MODULUS) -> int:
    """Exact integer score of element i under the order-n_rel rule."""
    ks = [int(k) for k in keys]
    n = len(ks)
    if not 0 <= i < n:
        raise ValueError(f"index {i} out of range for {n} keys")
    if n_rel < 1:
        raise ValueError(f"n_rel must be >= 1, got {n_rel}")
    if n_rel > n:
        raise ValueError(f"n_rel={n_rel} exceeds cardinality {n}")
    others = [ks[j] for j in range(n) if j != i]
    return sum((ks[i] + sum(subset)) ** 2 % modulus
               for subset in combinations(others, n_rel - 1))


def ruleset_target(keys, n_rel: int, modulus: int = DEFAULT_MODULUS) -> list[int]:
    """Indices sorted ascending by (score, key, original index)."""
    scores = [ruleset_score(keys, i, n_rel, modulus) for i in range(len(keys))]
    return sorted(range(len(keys)), key=lambda i: (scores[i], int(keys[i]), i))


def check_ruleset(keys, perm, n_rel: int, modulus: int = DEFAULT_MODULUS) -> bool:
    """True iff the sequence is non-decreasing in (score, key, original index)."""
    order = [int(i) for i in perm]
    if sorted(order) != list(range(len(keys))):
        raise ValueError(f"perm must be a permutation of range({len(keys)})")
    scores = [ruleset_score(keys, i, n_rel, modulus) for i in range(len(keys))]
    triples = [(scores[i], int(keys[i]), i) for i in order]
    return all(a <= b for a, b in zip(triples, triples[1:]))


def gen_ruleset(cfg: RulesetConfig, rng: SeededRng) -> list[Instance]:
    """Instances with features [key / key_max, constant placeholder, noise dims].

    Keys are drawn without replacement when the range allows, so ties are
    the exception rather than the rule ("distinct-ish").
    """

    def make(idx: int) -> Instance:
        r = rng.derive(idx)
        card = int(r.integers(cfg.card_min, cfg.card_max + 1))
        span = cfg.key_max - cfg.key_min + 1
        if span >= card:
            keys = r.choice(np.arange(cfg.key_min, cfg.key_max + 1), size=card, replace=False)
        else:
            keys = r.integers(cfg.key_min, cfg.key_max + 1, size=card)
        keys = [int(k) for k in keys]
        feats = np.zeros((card, 2 + cfg.distractor_dims), dtype=np.float64)
        feats[:, 0] = np.asarray(keys, dtype=np.float64) / cfg.key_max
        feats[:, 1] = 1.0
        if cfg.distractor_dims:
            feats[:, 2:] = r.uniform(0.0, 1.0, (card, cfg.distractor_dims))
        target = ruleset_target(keys, cfg.n_rel, cfg.modulus)
        return Instance(
            elements=feats,
            target=target,
            task=f"ruleset:{cfg.n_rel}",
            meta={"keys": keys, "n_rel": cfg.n_rel, "modulus": cfg.modulus},
        )

    return parallel_map(make, range(cfg.count))
