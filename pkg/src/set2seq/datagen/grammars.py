"""Formal-language reconstruction tasks.

Each instance is the shuffled multiset of tokens of one grammatical string;
the target permutation restores the canonical string.  Three languages:

  anbncn   a^n b^n c^n
  anbkcnk  a^n b^k c^(n*k)
  dyck     balanced strings over two bracket kinds, sampled uniformly
           among all shapes with the ballot (prefix-feasibility) method

Tokens are featurized as a one-hot over the task alphabet plus one random
tiebreak feature that carries no count information.  Duplicate tokens are
interchangeable, so targets assign canonical slots to equal tokens in
ascending input-index order; metric code must canonicalize predictions the
same way (see canonical_duplicate_order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.rng import SeededRng, parallel_map
from .io import Instance

GRAMMAR_KINDS = ("anbncn", "anbkcnk", "dyck")

ALPHABETS = {
    "anbncn": ("a", "b", "c"),
    "anbkcnk": ("a", "b", "c"),
    "dyck": ("(", ")", "{", "}"),
}

# Matching bracket per opener; dyck strings mix the two kinds freely.
_BRACKET_PAIRS = {"(": ")", "{": "}"}


@dataclass
class GrammarConfig:
    kind: str = "anbncn"
    count: int = 1000
    n_min: int = 1
    n_max: int = 100   # anbncn exponent range; dyck pair-count range is [max(2, n_min), n_max]
    k_min: int = 1
    k_max: int = 25    # anbkcnk only

    def __post_init__(self):
        if self.kind not in GRAMMAR_KINDS:
            raise ValueError(f"kind must be one of {GRAMMAR_KINDS}, got {self.kind!r}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if self.kind == "anbkcnk" and not 1 <= self.k_min <= self.k_max:
            raise ValueError(f"need 1 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if self.kind == "dyck" and self.n_max < 2:
            raise ValueError("dyck needs n_max >= 2 pairs")


def _dyck_shape(pairs: int, rng: SeededRng) -> list[bool]:
    """Uniform random Dyck shape (True=open) via sequential ballot sampling.

    With o opens and c closes left (o <= c), the number of valid completions
    is N(o, c) = C(o+c, o) * (c-o+1) / (c+1); choosing "open" next with
    probability N(o-1, c) / N(o, c) = (o * (c-o+2)) / ((o+c) * (c-o+1))
    makes every shape equally likely.
    """
    shape: list[bool] = []
    o = c = pairs
    while o + c:
        if o == 0:
            shape.append(False)
            c -= 1
            continue
        p_open = (o * (c - o + 2)) / ((o + c) * (c - o + 1))
        if rng.random() < p_open:
            shape.append(True)
            o -= 1
        else:
            shape.append(False)
            c -= 1
    return shape


def _dyck_string(pairs: int, rng: SeededRng) -> list[str]:
    shape = _dyck_shape(pairs, rng)
    kinds = [("{", "}") if rng.random() < 0.5 else ("(", ")") for _ in range(pairs)]
    tokens = [""] * len(shape)
    stack: list[int] = []
    pair_no = 0
    for i, is_open in enumerate(shape):
        if is_open:
            opener, closer = kinds[pair_no]
            pair_no += 1
            tokens[i] = opener
            stack.append(i)
        else:
            j = stack.pop()
            tokens[i] = _BRACKET_PAIRS[tokens[j]]
    return tokens


def _canonical_tokens(cfg: GrammarConfig, rng: SeededRng) -> list[str]:
    if cfg.kind == "anbncn":
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
        return ["a"] * n + ["b"] * n + ["c"] * n
    if cfg.kind == "anbkcnk":
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
        k = int(rng.integers(cfg.k_min, cfg.k_max + 1))
        return ["a"] * n + ["b"] * k + ["c"] * (n * k)
    pairs = int(rng.integers(max(2, cfg.n_min), cfg.n_max + 1))
    return _dyck_string(pairs, rng)


def _featurize(tokens: list[str], alphabet: tuple[str, ...], rng: SeededRng) -> np.ndarray:
    feats = np.zeros((len(tokens), len(alphabet) + 1), dtype=np.float64)
    index = {sym: i for i, sym in enumerate(alphabet)}
    for row, tok in enumerate(tokens):
        feats[row, index[tok]] = 1.0
    feats[:, -1] = rng.uniform(0.0, 1.0, len(tokens))
    return feats


def _target_for_shuffle(canonical: list[str], shuffled: list[str]) -> list[int]:
    """Canonical slot -> input index, equal tokens assigned in ascending input order."""
    queues: dict[str, list[int]] = {}
    for idx, tok in enumerate(shuffled):
        queues.setdefault(tok, []).append(idx)
    cursors = {tok: 0 for tok in queues}
    target = []
    for tok in canonical:
        target.append(queues[tok][cursors[tok]])
        cursors[tok] += 1
    return target


def gen_grammar(cfg: GrammarConfig, rng: SeededRng) -> list[Instance]:
    alphabet = ALPHABETS[cfg.kind]

    def make(i: int) -> Instance:
        r = rng.derive(i)
        canonical = _canonical_tokens(cfg, r)
        order = r.permutation(len(canonical))
        shuffled = [canonical[j] for j in order]
        target = _target_for_shuffle(canonical, shuffled)
        feats = _featurize(shuffled, alphabet, r)
        return Instance(
            elements=feats,
            target=target,
            task=f"grammar:{cfg.kind}",
            meta={"kind": cfg.kind, "symbols": shuffled, "length": len(canonical)},
        )

    return parallel_map(make, range(cfg.count))


def check_grammar(tokens: list[str], kind: str) -> bool:
    """Is the token sequence a well-formed string of the given language?"""
    if kind not in GRAMMAR_KINDS:
        raise ValueError(f"kind must be one of {GRAMMAR_KINDS}, got {kind!r}")
    if not tokens:
        return False
    if kind in ("anbncn", "anbkcnk"):
        counts = {"a": 0, "b": 0, "c": 0}
        seen_order = []
        for tok in tokens:
            if tok not in counts:
                return False
            if not seen_order or seen_order[-1] != tok:
                seen_order.append(tok)
            counts[tok] += 1
        if seen_order != ["a", "b", "c"]:
            return False
        n, k, nc = counts["a"], counts["b"], counts["c"]
        return nc == n * k if kind == "anbkcnk" else (n == k == nc)
    stack: list[str] = []
    for tok in tokens:
        if tok in _BRACKET_PAIRS:
            stack.append(tok)
        elif tok in (")", "}"):
            if not stack or _BRACKET_PAIRS[stack.pop()] != tok:
                return False
        else:
            return False
    return not stack


def canonical_duplicate_order(perm, symbols: list[str]) -> list[int]:
    """Normalize a permutation over interchangeable tokens.

    Keeps which symbol lands in each output slot, but reassigns the concrete
    input indices of equal symbols in ascending order.  Predictions and
    targets normalized this way compare equal iff they spell the same string.
    """
    order = [int(i) for i in perm]
    if sorted(order) != list(range(len(symbols))):
        raise ValueError(f"perm must be a permutation of range({len(symbols)})")
    pools: dict[str, list[int]] = {}
    for idx, sym in enumerate(symbols):
        pools.setdefault(sym, []).append(idx)  # ascending by construction
    cursors = {sym: 0 for sym in pools}
    out = []
    for idx in order:
        sym = symbols[idx]
        out.append(pools[sym][cursors[sym]])
        cursors[sym] += 1
    return out
