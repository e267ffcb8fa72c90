"""Autodiff core, initialization, optimizer, rng, and gradient checker."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from set2seq.numerics import (
    AdamwState,
    ParameterStore,
    SeededRng,
    Tensor,
    adamw_step,
    add,
    assert_all_finite,
    clip_grad_norm,
    concat_cols,
    concat_rows,
    div,
    dropout,
    exp,
    future_context,
    glorot_uniform,
    grad_check,
    history_context,
    init_param,
    layer_norm_rows,
    log,
    masked_log_softmax_rows,
    masked_softmax_rows,
    matmul,
    mean_all,
    mul,
    neg,
    no_grad,
    parallel_map,
    relative_error,
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

F64 = np.float64


def t(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=F64))


# ---------------------------------------------------------------- softmax

def test_softmax_uniform_on_equal_scores():
    out = masked_softmax_rows(t([[0.0, 0.0]]), None)
    np.testing.assert_allclose(out.data, [[0.5, 0.5]], atol=1e-12)


def test_softmax_single_unmasked_entry_is_one():
    mask = np.array([[True, False]])
    out = masked_softmax_rows(t([[3.7, 1.2]]), mask)
    np.testing.assert_array_equal(out.data, [[1.0, 0.0]])


def test_softmax_reference_values():
    # e^1/(e^1+e^2+e^3) etc., evaluated independently to 8 digits
    out = masked_softmax_rows(t([[1.0, 2.0, 3.0]]), None)
    np.testing.assert_allclose(
        out.data, [[0.09003057, 0.24472847, 0.66524096]], atol=5e-9)


def test_softmax_fully_masked_row_errors():
    with pytest.raises(ValueError):
        masked_softmax_rows(t([[1.0, 2.0]]), np.array([[False, False]]))


def test_softmax_masked_entries_exactly_zero():
    mask = np.array([[True, False, True]])
    out = masked_softmax_rows(t([[5.0, 100.0, 6.0]]), mask)
    assert out.data[0, 1] == 0.0
    assert abs(out.data[0, 0] + out.data[0, 2] - 1.0) < 1e-12


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
def test_softmax_rows_sum_to_one(xs):
    out = masked_softmax_rows(t([xs]), None)
    assert abs(out.data.sum() - 1.0) < 1e-6
    assert (out.data >= 0).all()


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=8),
       st.floats(-100, 100))
def test_softmax_shift_invariance(xs, shift):
    a = masked_softmax_rows(t([xs]), None)
    b = masked_softmax_rows(t([[x + shift for x in xs]]), None)
    np.testing.assert_allclose(a.data, b.data, atol=1e-6)


def test_log_softmax_consistent_with_softmax():
    x = t(SeededRng(5).normal(0, 3, (4, 6)))
    mask = np.ones((4, 6), dtype=bool)
    mask[1, 2] = mask[3, 0] = False
    soft = masked_softmax_rows(x, mask)
    logs = masked_log_softmax_rows(x, mask)
    np.testing.assert_allclose(np.exp(logs.data) * mask, soft.data, atol=1e-12)


# ------------------------------------------------------------- init/params

def test_glorot_single_value_within_bound():
    p = init_param("w", (1, 1), SeededRng(3), dtype=F64)
    bound = math.sqrt(3.0)  # sqrt(6 / (1 + 1))
    assert -bound < p.data[0, 0] < bound


def test_glorot_respects_fan_bound_generally():
    p = init_param("w", (20, 30), SeededRng(4), dtype=F64)
    bound = math.sqrt(6.0 / 50.0)
    assert np.abs(p.data).max() <= bound


def test_bias_initializes_to_zeros():
    p = init_param("b", (1, 4), SeededRng(3), kind="zeros", dtype=F64)
    np.testing.assert_array_equal(p.data, np.zeros((1, 4)))


def test_same_seed_same_init():
    a = init_param("w", (5, 7), SeededRng(11), dtype=F64)
    b = init_param("w", (5, 7), SeededRng(11), dtype=F64)
    np.testing.assert_array_equal(a.data, b.data)


def test_store_zero_grads_and_shapes():
    store = ParameterStore(rng=SeededRng(0), dtype=F64)
    p = store.create("w", (3, 4))
    p.grad[:] = 1.0
    store.zero_grads()
    np.testing.assert_array_equal(p.grad, np.zeros((3, 4)))
    assert p.grad.shape == p.data.shape
    assert store.n_scalars() == 12


# ------------------------------------------------------------------ adamw

def test_adamw_pure_decay():
    store = ParameterStore(rng=SeededRng(0), dtype=F64)
    p = store.create("w", (1, 1))
    p.data[:] = 1.0
    state = AdamwState(store)
    for step in range(1, 4):
        store.zero_grads()
        adamw_step(store, state, lr=0.1, weight_decay=0.01)
        np.testing.assert_allclose(p.data[0, 0], (1 - 0.001) ** step, rtol=1e-12)


def test_adamw_first_step_magnitude():
    store = ParameterStore(rng=SeededRng(0), dtype=F64)
    p = store.create("w", (1, 1))
    p.data[:] = 0.0
    p.grad[:] = 1.0
    state = AdamwState(store)
    adamw_step(store, state, lr=0.1, weight_decay=0.0)
    # m_hat = 1, v_hat = 1 at t=1, so the update is -lr/(1+eps) ~ -0.1
    np.testing.assert_allclose(p.data[0, 0], -0.1, atol=1e-8)
    assert state.step == 1


def test_adamw_nan_gradient_names_parameter():
    store = ParameterStore(rng=SeededRng(0), dtype=F64)
    store.create("w_fine", (1, 1))
    bad = store.create("w_bad", (1, 1))
    bad.grad[:] = np.nan
    state = AdamwState(store)
    with pytest.raises(ValueError, match="w_bad"):
        adamw_step(store, state)
    assert state.step == 0  # aborted before any update


def test_adamw_no_decay_no_grad_is_identity():
    store = ParameterStore(rng=SeededRng(2), dtype=F64)
    p = store.create("w", (3, 3))
    before = p.data.copy()
    adamw_step(store, AdamwState(store), lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(p.data, before)


def test_clip_grad_norm_scales_to_cap():
    store = ParameterStore(rng=SeededRng(0), dtype=F64)
    p = store.create("w", (1, 2))
    p.grad[:] = [[3.0, 4.0]]  # norm 5
    clip_grad_norm(store, 1.0)
    np.testing.assert_allclose(np.linalg.norm(p.grad), 1.0, rtol=1e-12)
    p.grad[:] = [[0.3, 0.4]]
    clip_grad_norm(store, 1.0)  # below cap: untouched
    np.testing.assert_allclose(p.grad, [[0.3, 0.4]], rtol=0, atol=0)


# ------------------------------------------------------------- grad_check

def test_grad_check_linear_function():
    store = ParameterStore(rng=SeededRng(1), dtype=F64)
    p = store.create("w", (2, 3))

    report = grad_check(lambda: sum_all(p), store, tol=1e-6)
    assert report.passed
    assert report.max_rel_err < 1e-8


def test_grad_check_constant_function():
    store = ParameterStore(rng=SeededRng(1), dtype=F64)
    store.create("w", (2, 2))
    report = grad_check(lambda: t([[1.5]]), store, tol=1e-6)
    assert report.passed


def test_grad_check_rejects_float32():
    store = ParameterStore(rng=SeededRng(1), dtype=np.float32)
    p = store.create("w", (1, 1))
    with pytest.raises(ValueError, match="float64"):
        grad_check(lambda: sum_all(p), store)


def test_relative_error_definition():
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(2.0, 1.0) == 0.5
    assert relative_error(0.0, 0.0) == 0.0


# ----------------------------------------------- op-level gradient audits

def _op_check(build, shapes, tol=1e-4, seed=0, transform=None):
    """grad_check an op applied to glorot-initialized parameter inputs."""
    store = ParameterStore(rng=SeededRng(seed).derive(2), dtype=F64)
    params = [store.create(f"p{i}", shape) for i, shape in enumerate(shapes)]
    if transform:
        transform(params)

    report = grad_check(lambda: build(*params), store, tol=tol,
                        max_coords_per_param=6, rng=SeededRng(99))
    assert report.passed, report.summary()


def test_grad_elementwise_binary_ops():
    _op_check(lambda a, b: sum_all(mul(add(a, b), sub(a, b))), [(3, 4), (3, 4)])
    _op_check(lambda a, b: sum_all(div(a, add(square(b), t(np.full((3, 4), 0.5))))),
              [(3, 4), (3, 4)])


def test_grad_broadcast_row_col_scalar():
    _op_check(lambda a, r: sum_all(add(a, r)), [(3, 4), (1, 4)])
    _op_check(lambda a, c: sum_all(mul(a, c)), [(3, 4), (3, 1)])
    _op_check(lambda a, s: sum_all(mul(a, s)), [(3, 4), (1, 1)])


def test_grad_matmul_transpose():
    _op_check(lambda a, b: sum_all(matmul(a, b)), [(3, 4), (4, 2)])
    _op_check(lambda a: sum_all(matmul(a, transpose(a))), [(3, 4)])


def test_grad_unary_ops():
    _op_check(lambda a: sum_all(exp(a)), [(3, 3)])
    _op_check(lambda a: sum_all(log(add(square(a), t(np.full((3, 3), 0.7))))), [(3, 3)])
    _op_check(lambda a: sum_all(tanh(a)), [(3, 3)])
    _op_check(lambda a: sum_all(sigmoid(a)), [(3, 3)])
    _op_check(lambda a: sum_all(softplus(a)), [(3, 3)])
    _op_check(lambda a: sum_all(sqrt(add(square(a), t(np.full((3, 3), 0.4))))), [(3, 3)])
    _op_check(lambda a: sum_all(neg(a)), [(3, 3)])


def test_grad_relu_away_from_kink():
    def shift(params):
        p = params[0]
        p.data[:] = np.sign(p.data) * (np.abs(p.data) + 0.2)

    _op_check(lambda a: sum_all(relu(a)), [(3, 3)], transform=shift)


def test_grad_reductions_and_layout_ops():
    _op_check(lambda a: mean_all(a), [(3, 4)])
    _op_check(lambda a: sum_all(row_mean(a)), [(3, 4)])
    _op_check(lambda a, b: sum_all(square(concat_rows([a, b]))), [(2, 3), (4, 3)])
    _op_check(lambda a, b: sum_all(square(concat_cols([a, b]))), [(3, 2), (3, 4)])
    _op_check(lambda a: sum_all(square(slice_rows(a, 1, 3))), [(4, 3)])
    _op_check(lambda a: sum_all(square(slice_cols(a, 0, 2))), [(3, 4)])
    _op_check(lambda a: sum_all(square(take_rows(a, [2, 0, 2]))), [(4, 3)])
    _op_check(lambda a: sum_all(square(repeat_rows(a, 3))), [(1, 4)])
    _op_check(lambda a: sum_all(square(tile_rows(a, 3))), [(2, 4)])


def test_grad_masked_softmax_ops():
    mask = np.array([[True, True, False, True]] * 3)
    _op_check(lambda a: sum_all(square(masked_softmax_rows(a, mask))), [(3, 4)])
    _op_check(lambda a: sum_all(mul(masked_log_softmax_rows(a, mask), t(mask * 1.0))),
              [(3, 4)])


def test_grad_layer_norm():
    _op_check(lambda a, g, b: sum_all(square(layer_norm_rows(a, g, b))),
              [(3, 6), (1, 6), (1, 6)])


def test_grad_pairwise_context_ops():
    n = 3
    cand = np.array([True, False, True])
    sel = np.array([False, True, False])
    _op_check(lambda pairs: sum_all(square(future_context(pairs, cand, n))),
              [(n * n, 4)])
    _op_check(lambda pairs: sum_all(square(history_context(pairs, sel, n))),
              [(n * n, 4)])


def test_future_context_empty_mean_is_zero():
    pairs = t(np.ones((4, 3)))
    only_one = np.array([True, False])
    out = future_context(pairs, only_one, 2)
    np.testing.assert_array_equal(out.data[0], np.zeros(3))


def test_history_context_no_selection_is_zero():
    pairs = t(np.ones((4, 3)))
    out = history_context(pairs, np.array([False, False]), 2)
    np.testing.assert_array_equal(out.data, np.zeros((2, 3)))


# -------------------------------------------------------- autodiff basics

def test_backward_accumulates_shared_subexpression():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    y = add(mul(x, x), x)  # y = x^2 + x, dy/dx = 2x + 1 = 5
    y.backward()
    np.testing.assert_allclose(x.grad, [[5.0]])


def test_no_grad_blocks_graph_building():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    with no_grad():
        y = mul(x, x)
    assert not y.requires_grad


def test_dropout_inverted_scaling_and_determinism():
    x = t(np.ones((200, 50)))
    a = dropout(x, 0.25, SeededRng(7))
    b = dropout(x, 0.25, SeededRng(7))
    np.testing.assert_array_equal(a.data, b.data)
    kept = a.data != 0
    np.testing.assert_allclose(a.data[kept], 1.0 / 0.75)
    assert abs(kept.mean() - 0.75) < 0.02


def test_assert_all_finite_raises():
    with pytest.raises(ValueError, match="logits"):
        assert_all_finite(np.array([[np.nan]]), "logits")
    with pytest.raises(ValueError):
        assert_all_finite(np.array([[np.inf]]), "x")
    assert_all_finite(np.zeros((2, 2)), "fine")


# -------------------------------------------------------------------- rng

def test_rng_same_seed_bit_identical():
    a = SeededRng(42).uniform(0, 1, (4, 4))
    b = SeededRng(42).uniform(0, 1, (4, 4))
    np.testing.assert_array_equal(a, b)


def test_rng_derive_streams_differ_and_are_stable():
    root = SeededRng(42)
    a1 = root.derive(1).normal(0, 1, (8,))
    a2 = SeededRng(42).derive(1).normal(0, 1, (8,))
    b = root.derive(2).normal(0, 1, (8,))
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, b)


def test_rng_state_round_trip_continues_stream():
    rng = SeededRng(9)
    rng.uniform(0, 1, (10,))
    snap = rng.state()
    rest = SeededRng.from_state(snap)
    np.testing.assert_array_equal(rng.uniform(0, 1, (5,)),
                                  rest.uniform(0, 1, (5,)))


def test_parallel_map_preserves_order_and_matches_serial(monkeypatch):
    xs = list(range(24))
    serial = parallel_map(lambda v: v * v, xs)
    monkeypatch.setenv("SET2SEQ_THREADS", "4")
    threaded = parallel_map(lambda v: v * v, xs)
    assert serial == threaded == [v * v for v in xs]


def test_glorot_uniform_bound_formula():
    vals = glorot_uniform((4, 8), SeededRng(6), dtype=F64)
    assert np.abs(vals).max() <= math.sqrt(6.0 / 12.0)
    assert vals.shape == (4, 8)
