"""Task generators with exact oracles, plus dataset persistence."""

from .grammars import (
    ALPHABETS,
    GRAMMAR_KINDS,
    GrammarConfig,
    canonical_duplicate_order,
    check_grammar,
    gen_grammar,
)
from .io import Instance, load_dataset, load_embedded, save_dataset
from .rulesets import (
    DEFAULT_MODULUS,
    RulesetConfig,
    check_ruleset,
    gen_ruleset,
    ruleset_score,
    ruleset_target,
)
from .tsp import (
    CONVENTIONS,
    DEFAULT_CONVENTION,
    HELD_KARP_EVAL_MAX_N,
    HELD_KARP_TARGET_MAX_N,
    TspConfig,
    calibrate_convention,
    gen_tsp,
    held_karp,
    held_karp_lengths,
    random_tour_lengths,
    tour_length,
)

__all__ = [
    "ALPHABETS", "GRAMMAR_KINDS", "GrammarConfig", "canonical_duplicate_order",
    "check_grammar", "gen_grammar",
    "Instance", "load_dataset", "load_embedded", "save_dataset",
    "DEFAULT_MODULUS", "RulesetConfig", "check_ruleset", "gen_ruleset",
    "ruleset_score", "ruleset_target",
    "CONVENTIONS", "DEFAULT_CONVENTION", "HELD_KARP_EVAL_MAX_N", "HELD_KARP_TARGET_MAX_N",
    "TspConfig", "calibrate_convention", "gen_tsp", "held_karp", "held_karp_lengths",
    "random_tour_lengths", "tour_length",
]
