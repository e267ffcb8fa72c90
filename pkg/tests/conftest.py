"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from set2seq.decoder import DecoderConfig, build_decoder_weights
from set2seq.encoder import EncoderConfig, build_encoder_weights
from set2seq.numerics import ParameterStore, SeededRng

settings.register_profile(
    "suite", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


def tiny_enc_cfg(**kw) -> EncoderConfig:
    base = dict(d_model=8, n_heads=2, n_sit_layers=1, sigma="softmax",
                use_residual=True, use_layer_norm=True, dropout=0.0,
                augment_set=True)
    base.update(kw)
    return EncoderConfig(**base)


def tiny_dec_cfg(d_model=8, **kw) -> DecoderConfig:
    base = dict(d_model=d_model, dropout=0.0, pair_cap=64)
    base.update(kw)
    return DecoderConfig(**base)


def make_store(seed: int = 0, dtype=np.float64) -> ParameterStore:
    return ParameterStore(rng=SeededRng(seed).derive(2), dtype=dtype)


def tiny_model(seed: int = 0, d_input: int = 3, dtype=np.float64,
               enc_kw: dict | None = None, dec_kw: dict | None = None):
    """(store, enc_cfg, dec_cfg, enc_w, dec_w) with small dims, no dropout."""
    store = make_store(seed, dtype)
    enc_cfg = tiny_enc_cfg(**(enc_kw or {}))
    dec_cfg = tiny_dec_cfg(d_model=enc_cfg.d_model, **(dec_kw or {}))
    enc_w = build_encoder_weights(store, enc_cfg, d_input)
    dec_w = build_decoder_weights(store, dec_cfg)
    return store, enc_cfg, dec_cfg, enc_w, dec_w


@pytest.fixture
def rng() -> SeededRng:
    return SeededRng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from _acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
