"""Set-to-sequence model with set-interdependence attention.

A permutation-invariant set encoder (multihead attention, attention pooling,
interdependence layers over the set-augmented element matrix) feeds an
LSTM pointer decoder with pairwise history/future context.  Everything runs
on a small reverse-mode autodiff core over numpy arrays; data generators and
exact oracles (Held-Karp, grammar and ruleset checkers) plus a training CLI
round out the package.
"""

from . import datagen, harness, metrics, numerics
from .decoder import (
    DecoderConfig,
    DecoderWeights,
    batch_loss,
    build_decoder_weights,
    decode_greedy,
    teacher_forced_nll,
)
from .encoder import (
    EncodedSet,
    EncoderConfig,
    EncoderWeights,
    build_encoder_weights,
    encode_set,
)

__version__ = "1.0.0"

__all__ = [
    "DecoderConfig", "DecoderWeights", "EncodedSet", "EncoderConfig",
    "EncoderWeights", "batch_loss", "build_decoder_weights",
    "build_encoder_weights", "datagen", "decode_greedy", "encode_set",
    "harness", "metrics", "numerics", "teacher_forced_nll", "__version__",
]
