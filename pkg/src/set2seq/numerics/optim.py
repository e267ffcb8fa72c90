"""AdamW: Adam moment estimates plus decoupled weight decay.

The decay term is applied directly to the parameter, outside the adaptive
update, so with zero gradients a parameter decays by exactly
(1 - lr * weight_decay) per step:

    m <- b1*m + (1-b1)*g        mhat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2      vhat = v / (1 - b2^t)
    p <- p - lr * (mhat / (sqrt(vhat) + eps) + weight_decay * p)
"""

from __future__ import annotations

import numpy as np

from .params import ParameterStore


class AdamwState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, store: ParameterStore):
        self.step = 0
        self.m = {name: np.zeros_like(p.data, dtype=np.float64) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data, dtype=np.float64) for name, p in store.items()}


def adamw_step(store: ParameterStore, state: AdamwState, lr: float = 1e-4,
               betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 1e-2) -> None:
    """One optimizer step over every parameter in the store, in order."""
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    b1, b2 = betas
    if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
        raise ValueError(f"betas must lie in [0, 1), got {betas}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if weight_decay < 0:
        raise ValueError(f"weight_decay must be non-negative, got {weight_decay}")

    for name, p in store.items():
        if p.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient buffer")
        if not np.isfinite(p.grad).all():
            raise ValueError(f"non-finite gradient in parameter {name!r}; step aborted")

    state.step += 1
    t = state.step
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, p in store.items():
        g = p.grad.astype(np.float64)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        update = mhat / (np.sqrt(vhat) + eps) + weight_decay * p.data.astype(np.float64)
        p.data = (p.data.astype(np.float64) - lr * update).astype(p.data.dtype)


def global_grad_norm(store: ParameterStore) -> float:
    total = 0.0
    for _, p in store.items():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_grad_norm(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    norm = global_grad_norm(store)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for _, p in store.items():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm
