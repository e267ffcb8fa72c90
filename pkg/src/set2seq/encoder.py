"""Permutation-aware set encoder.

Pipeline: a linear projection lifts raw element features to d_model, one
multi-head self-attention layer produces per-element embeddings (order
equivariant), attention pooling against learned per-head seed queries
collapses them into a single set vector (order invariant).  The element
matrix and the set vector are then stacked into one (n+1) x d_model matrix
and refined jointly by a stack of set-interdependence layers: multi-head
self-attention over the augmented matrix, so every element attends to the
set summary and vice versa.  Splitting the result recovers refined element
embeddings and a refined set vector for the decoder.

Scaled dot-product attention everywhere:

    att(Q, K, V) = softmax(Q K^T / sqrt(d_k)) V

with d_k = d_model / n_heads inside the element encoder and the pooling
layer, and d_k = d_model inside the interdependence layers (the augmented
matrix shares one scale across heads).  The softmax can be swapped for an
elementwise tanh/relu scoring via config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    ParameterStore,
    SeededRng,
    Tensor,
    add,
    concat_cols,
    concat_rows,
    dropout,
    layer_norm_rows,
    masked_softmax_rows,
    matmul,
    mul,
    relu,
    slice_rows,
    tanh,
    transpose,
)

SIGMA_CHOICES = ("softmax", "tanh", "relu")


@dataclass
class EncoderConfig:
    d_model: int = 256
    n_heads: int = 4
    n_sit_layers: int = 3
    sigma: str = "softmax"
    use_residual: bool = True
    use_layer_norm: bool = True
    dropout: float = 0.1
    augment_set: bool = True

    def __post_init__(self):
        if self.d_model <= 0:
            raise ValueError(f"d_model must be positive, got {self.d_model}")
        if self.n_heads <= 0 or self.d_model % self.n_heads != 0:
            raise ValueError(
                f"n_heads must divide d_model, got d_model={self.d_model} n_heads={self.n_heads}")
        if self.n_sit_layers < 0:
            raise ValueError(f"n_sit_layers must be >= 0, got {self.n_sit_layers}")
        if self.sigma not in SIGMA_CHOICES:
            raise ValueError(f"sigma must be one of {SIGMA_CHOICES}, got {self.sigma!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class HeadWeights:
    wq: Tensor
    wk: Tensor
    wv: Tensor


@dataclass
class MhaWeights:
    heads: list[HeadWeights]
    wo: Tensor


@dataclass
class PmaWeights:
    seeds: list[Tensor]  # one learned 1 x d_model query seed per head
    heads: list[HeadWeights]
    wo: Tensor


@dataclass
class SitLayerWeights:
    heads: list[HeadWeights]
    wo: Tensor
    ln_gain: Tensor | None = None
    ln_bias: Tensor | None = None


@dataclass
class EncoderWeights:
    in_w: Tensor
    in_b: Tensor
    elem_attn: MhaWeights
    pool: PmaWeights
    sit_layers: list[SitLayerWeights] = field(default_factory=list)


@dataclass
class EncodedSet:
    """Refined element embeddings, refined set vector, and the real-row mask."""

    elements: Tensor  # n x d_model (rows at padded positions are meaningless)
    set_vec: Tensor   # 1 x d_model
    mask: np.ndarray  # bool (n,), True for real elements

    @property
    def n_real(self) -> int:
        return int(self.mask.sum())


def _build_heads(store: ParameterStore, prefix: str, cfg: EncoderConfig) -> list[HeadWeights]:
    return [
        HeadWeights(
            wq=store.create(f"{prefix}.h{i}.wq", (cfg.d_model, cfg.d_head)),
            wk=store.create(f"{prefix}.h{i}.wk", (cfg.d_model, cfg.d_head)),
            wv=store.create(f"{prefix}.h{i}.wv", (cfg.d_model, cfg.d_head)),
        )
        for i in range(cfg.n_heads)
    ]


def build_encoder_weights(store: ParameterStore, cfg: EncoderConfig, d_input: int) -> EncoderWeights:
    if d_input <= 0:
        raise ValueError(f"d_input must be positive, got {d_input}")
    w = EncoderWeights(
        in_w=store.create("encoder.in_proj.w", (d_input, cfg.d_model)),
        in_b=store.create("encoder.in_proj.b", (1, cfg.d_model), kind="zeros"),
        elem_attn=MhaWeights(
            heads=_build_heads(store, "encoder.elem_attn", cfg),
            wo=store.create("encoder.elem_attn.wo", (cfg.d_model, cfg.d_model)),
        ),
        pool=PmaWeights(
            seeds=[store.create(f"encoder.pool.h{i}.seed", (1, cfg.d_model))
                   for i in range(cfg.n_heads)],
            heads=_build_heads(store, "encoder.pool", cfg),
            wo=store.create("encoder.pool.wo", (cfg.d_model, cfg.d_model)),
        ),
    )
    for layer in range(cfg.n_sit_layers):
        prefix = f"encoder.sit{layer}"
        lw = SitLayerWeights(
            heads=_build_heads(store, prefix, cfg),
            wo=store.create(f"{prefix}.wo", (cfg.d_model, cfg.d_model)),
        )
        if cfg.use_layer_norm:
            lw.ln_gain = store.add(_ones_param(f"{prefix}.ln_g", cfg.d_model, store.dtype))
            lw.ln_bias = store.create(f"{prefix}.ln_b", (1, cfg.d_model), kind="zeros")
        w.sit_layers.append(lw)
    return w


def _ones_param(name: str, d: int, dtype):
    from .numerics.params import Parameter

    return Parameter(name, np.ones((1, d), dtype=dtype))


def _full_mask(n: int, mask) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    m = np.asarray(mask, dtype=bool).reshape(-1)
    if m.shape[0] != n:
        raise ValueError(f"mask length {m.shape[0]} != {n} rows")
    if not m.any():
        raise ValueError("mask excludes every element; need at least one real row")
    return m


def _attend(q: Tensor, kv: Tensor, head: HeadWeights, scale: float, key_mask: np.ndarray,
            sigma: str = "softmax", drop_rate: float = 0.0,
            rng: SeededRng | None = None) -> Tensor:
    """One attention head: sigma(q Wq (kv Wk)^T / scale) (kv Wv)."""
    qh = matmul(q, head.wq)
    kh = matmul(kv, head.wk)
    vh = matmul(kv, head.wv)
    scores = mul(matmul(qh, transpose(kh)), Tensor(np.asarray(1.0 / scale, dtype=q.dtype)))
    if sigma == "softmax":
        att = masked_softmax_rows(scores, key_mask)
    else:
        act = tanh if sigma == "tanh" else relu
        att = act(scores)
        # Padded keys must contribute nothing: zero their columns outright.
        keep = key_mask.astype(q.dtype.type).reshape(1, -1)
        att = mul(att, Tensor(keep))
    if drop_rate > 0.0 and rng is not None:
        att = dropout(att, drop_rate, rng)
    return matmul(att, vh)


def multi_head_attention(q_input: Tensor, kv_input: Tensor, weights: MhaWeights,
                         cfg: EncoderConfig, mask=None) -> Tensor:
    """Standard multi-head attention; queries and keys may come from different matrices."""
    key_mask = _full_mask(kv_input.shape[0], mask)
    scale = math.sqrt(cfg.d_head)
    heads = [_attend(q_input, kv_input, h, scale, key_mask) for h in weights.heads]
    return matmul(concat_cols(heads), weights.wo)


def encode_elements(x_proj: Tensor, weights: MhaWeights, cfg: EncoderConfig, mask=None) -> Tensor:
    """Order-equivariant element embeddings: one self-attention layer."""
    return multi_head_attention(x_proj, x_proj, weights, cfg, mask=mask)


def pma(elements: Tensor, weights: PmaWeights, cfg: EncoderConfig, mask=None) -> Tensor:
    """Pooling by multi-head attention: learned seed queries -> one set vector.

    Invariant under any permutation of the element rows, since each head's
    softmax-weighted sum ranges over the (unordered) unmasked rows.
    """
    key_mask = _full_mask(elements.shape[0], mask)
    scale = math.sqrt(cfg.d_head)
    heads = [_attend(seed, elements, h, scale, key_mask)
             for seed, h in zip(weights.seeds, weights.heads)]
    return matmul(concat_cols(heads), weights.wo)


def augment(elements: Tensor, set_vec: Tensor) -> Tensor:
    """Stack the set vector under the element rows: (n, d) + (1, d) -> (n+1, d)."""
    if set_vec.shape[0] != 1 or set_vec.shape[1] != elements.shape[1]:
        raise ValueError(f"set_vec must be 1 x {elements.shape[1]}, got {set_vec.shape}")
    return concat_rows([elements, set_vec])


def split(augmented: Tensor) -> tuple[Tensor, Tensor]:
    """Inverse of augment: last row is the set vector."""
    n_plus_1 = augmented.shape[0]
    if n_plus_1 < 2:
        raise ValueError("augmented matrix must have at least 2 rows")
    return slice_rows(augmented, 0, n_plus_1 - 1), slice_rows(augmented, n_plus_1 - 1, n_plus_1)


def sit_layer(s_matrix: Tensor, weights: SitLayerWeights, cfg: EncoderConfig, mask=None,
              rng: SeededRng | None = None) -> Tensor:
    """One set-interdependence layer over the augmented matrix.

    Shape-preserving multi-head self-attention with a single sqrt(d_model)
    scale (the augmented matrix is scored as a whole, not per head width),
    followed by optional residual and row layer-norm.  The attention
    activation sigma is softmax by default; tanh/relu score the pairs
    elementwise without normalization.
    """
    key_mask = _full_mask(s_matrix.shape[0], mask)
    scale = math.sqrt(cfg.d_model)
    drop = cfg.dropout if rng is not None else 0.0
    heads = [_attend(s_matrix, s_matrix, h, scale, key_mask, sigma=cfg.sigma,
                     drop_rate=drop, rng=rng) for h in weights.heads]
    out = matmul(concat_cols(heads), weights.wo)
    if cfg.use_residual:
        out = add(out, s_matrix)
    if cfg.use_layer_norm:
        out = layer_norm_rows(out, weights.ln_gain, weights.ln_bias)
    return out


def encode_set(x: Tensor | np.ndarray, weights: EncoderWeights, cfg: EncoderConfig,
               mask=None, rng: SeededRng | None = None) -> EncodedSet:
    """Full encoder pass: raw n x d_input features -> EncodedSet.

    With augment_set on, the interdependence layers run over (elements | set
    vector) jointly and the refined pair is split back out.  With it off
    (ablation), the same layers run over the element matrix alone and the set
    vector is re-pooled from the refined elements at the end; with zero
    layers the two paths coincide exactly.
    """
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=np.result_type(weights.in_w.dtype)))
    if x.dtype != weights.in_w.dtype:
        raise ValueError(f"input dtype {x.dtype} != parameter dtype {weights.in_w.dtype}")
    if x.shape[1] != weights.in_w.shape[0]:
        raise ValueError(f"input has {x.shape[1]} features, projection expects {weights.in_w.shape[0]}")
    m = _full_mask(x.shape[0], mask)

    h = add(matmul(x, weights.in_w), weights.in_b)
    elements = encode_elements(h, weights.elem_attn, cfg, mask=m)
    set_vec = pma(elements, weights.pool, cfg, mask=m)

    if cfg.augment_set:
        s_matrix = augment(elements, set_vec)
        aug_mask = np.concatenate([m, [True]])  # the set row is never masked
        for lw in weights.sit_layers:
            s_matrix = sit_layer(s_matrix, lw, cfg, mask=aug_mask, rng=rng)
        elements, set_vec = split(s_matrix)
    else:
        for lw in weights.sit_layers:
            elements = sit_layer(elements, lw, cfg, mask=m, rng=rng)
        set_vec = pma(elements, weights.pool, cfg, mask=m)

    return EncodedSet(elements=elements, set_vec=set_vec, mask=m)
