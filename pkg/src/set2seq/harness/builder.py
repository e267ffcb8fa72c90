"""Model assembly from a RunConfig: one parameter store, encoder + decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..decoder import DecoderConfig, DecoderWeights, build_decoder_weights
from ..encoder import EncoderConfig, EncoderWeights, build_encoder_weights
from ..numerics import ParameterStore, SeededRng
from .config import RunConfig


@dataclass
class Model:
    store: ParameterStore
    enc_cfg: EncoderConfig
    dec_cfg: DecoderConfig
    enc_w: EncoderWeights
    dec_w: DecoderWeights
    d_input: int

    @property
    def dtype(self):
        return self.store.dtype


def build_model(cfg: RunConfig, d_input: int, init_rng: SeededRng | None = None) -> Model:
    """Fresh model; initialization is a pure function of (seed, config, d_input)."""
    dtype = np.float64 if cfg.precision == "double" else np.float32
    if init_rng is None:
        init_rng = SeededRng(cfg.seed).derive(2)
    store = ParameterStore(rng=init_rng, dtype=dtype)
    enc_cfg = EncoderConfig(
        d_model=cfg.model.d_model,
        n_heads=cfg.model.n_heads,
        n_sit_layers=cfg.model.n_sit_layers,
        sigma=cfg.model.sigma,
        use_residual=cfg.model.use_residual,
        use_layer_norm=cfg.model.use_layer_norm,
        dropout=cfg.optim.dropout,
        augment_set=cfg.model.augment_set,
    )
    dec_cfg = DecoderConfig(
        d_model=cfg.model.d_model,
        d_att=cfg.model.d_att,
        pair_hidden=cfg.model.pair_hidden,
        dropout=cfg.optim.dropout,
        pair_cap=cfg.optim.pair_cap,
    )
    enc_w = build_encoder_weights(store, enc_cfg, d_input)
    dec_w = build_decoder_weights(store, dec_cfg)
    return Model(store=store, enc_cfg=enc_cfg, dec_cfg=dec_cfg,
                 enc_w=enc_w, dec_w=dec_w, d_input=d_input)
