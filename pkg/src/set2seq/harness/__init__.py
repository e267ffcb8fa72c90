"""Training/evaluation engine: config, batching, loop, checkpoints, CLI."""

from .batching import TrainBatch, make_batches, pad_batch
from .builder import Model, build_model
from .checkpoint import load_checkpoint, rng_restore, rng_snapshot, save_checkpoint
from .config import (
    ConfigError,
    DataSection,
    ModelSection,
    OptimSection,
    PROFILES,
    RunConfig,
    load_config,
    parse_overrides,
)
from .data import build_instances, split_validation
from .evaluate import (
    dataset_loss,
    decode_dataset,
    decode_instance,
    encode_instance,
    evaluate_instances,
    evaluation_report,
)
from .recipes import RECIPES, run_recipe
from .reporting import render_report
from .train import DivergenceError, TrainResult, train

__all__ = [
    "ConfigError", "DataSection", "DivergenceError", "Model", "ModelSection",
    "OptimSection", "PROFILES", "RECIPES", "RunConfig", "TrainBatch",
    "TrainResult", "build_instances", "build_model", "dataset_loss",
    "decode_dataset", "decode_instance", "encode_instance",
    "evaluate_instances", "evaluation_report", "load_checkpoint", "load_config",
    "make_batches", "pad_batch", "parse_overrides", "render_report",
    "rng_restore", "rng_snapshot", "run_recipe", "save_checkpoint",
    "split_validation", "train",
]
