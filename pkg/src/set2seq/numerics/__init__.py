"""Matrix autodiff substrate: tensors, parameters, AdamW, RNG, grad checking."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .optim import AdamwState, adamw_step, clip_grad_norm, global_grad_norm
from .params import Parameter, ParameterStore, glorot_uniform, init_param
from .rng import SeededRng, parallel_map, worker_count
from .tensor import (
    NEG_CAP,
    Tensor,
    add,
    assert_all_finite,
    concat_cols,
    concat_rows,
    div,
    dropout,
    exp,
    future_context,
    grad_enabled,
    history_context,
    layer_norm_rows,
    log,
    masked_log_softmax_rows,
    masked_softmax_rows,
    matmul,
    mean_all,
    mul,
    neg,
    no_grad,
    relu,
    repeat_rows,
    row_mean,
    sigmoid,
    slice_cols,
    slice_rows,
    softplus,
    sqrt,
    square,
    sub,
    sum_all,
    take_rows,
    tanh,
    tile_rows,
    transpose,
)

__all__ = [
    "GradCheckReport", "grad_check", "relative_error",
    "AdamwState", "adamw_step", "clip_grad_norm", "global_grad_norm",
    "Parameter", "ParameterStore", "glorot_uniform", "init_param",
    "SeededRng", "parallel_map", "worker_count",
    "NEG_CAP", "Tensor", "add", "assert_all_finite", "concat_cols", "concat_rows",
    "div", "dropout", "exp", "future_context", "grad_enabled", "history_context",
    "layer_norm_rows", "log", "masked_log_softmax_rows", "masked_softmax_rows",
    "matmul", "mean_all", "mul", "neg", "no_grad", "relu", "repeat_rows", "row_mean",
    "sigmoid", "slice_cols", "slice_rows", "softplus", "sqrt", "square", "sub",
    "sum_all", "take_rows", "tanh", "tile_rows", "transpose",
]
