"""Finite-difference verification of reverse-mode gradients.

Compares the analytic gradient of a scalar loss against central differences
(loss(p+eps) - loss(p-eps)) / (2*eps), coordinate by coordinate.  Meant to be
run in double precision with all stochastic pieces (dropout, subsampling)
disabled, since the loss function is re-evaluated many times and must be a
pure function of the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import ParameterStore
from .rng import SeededRng
from .tensor import Tensor


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


@dataclass
class ParamCheck:
    name: str
    n_checked: int
    max_rel_err: float
    worst_coord: tuple[int, int]
    analytic: float
    numeric: float


@dataclass
class GradCheckReport:
    tol: float
    eps: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((p.max_rel_err for p in self.params), default=0.0)

    @property
    def passed(self) -> bool:
        return all(p.max_rel_err < self.tol for p in self.params)

    def failures(self) -> list[ParamCheck]:
        return [p for p in self.params if p.max_rel_err >= self.tol]

    def summary(self) -> str:
        lines = [f"grad check: eps={self.eps:g} tol={self.tol:g} "
                 f"params={len(self.params)} max_rel_err={self.max_rel_err:.3e} "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for p in sorted(self.params, key=lambda p: -p.max_rel_err):
            flag = "ok  " if p.max_rel_err < self.tol else "FAIL"
            lines.append(f"  {flag} {p.name:<40s} rel_err={p.max_rel_err:.3e} "
                         f"at {p.worst_coord} analytic={p.analytic:+.6e} numeric={p.numeric:+.6e}")
        return "\n".join(lines)


def grad_check(loss_fn: Callable[[], Tensor], store: ParameterStore, *,
               eps: float = 1e-5, tol: float = 1e-3,
               max_coords_per_param: int = 8,
               rng: SeededRng | None = None) -> GradCheckReport:
    """Check d(loss)/d(param) for sampled coordinates of every parameter.

    loss_fn must rebuild the graph from current store values on each call and
    return a scalar Tensor.  Parameters should be float64; float32 rounding
    drowns the 1e-3 tolerance.
    """
    for name, p in store.items():
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 parameters; {name!r} is {p.data.dtype}")
    if rng is None:
        rng = SeededRng(0)

    store.zero_grads()
    loss = loss_fn()
    if loss.data.size != 1:
        raise ValueError(f"loss_fn must return a scalar, got shape {loss.shape}")
    if loss.requires_grad:  # a loss with no parameter dependence has zero grads
        loss.backward()
    analytic = {name: p.grad.copy() for name, p in store.items()}

    report = GradCheckReport(tol=tol, eps=eps)
    for name, p in store.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        worst = ParamCheck(name=name, n_checked=len(coords), max_rel_err=0.0,
                           worst_coord=(0, 0), analytic=0.0, numeric=0.0)
        for ci in np.sort(coords):
            orig = flat[ci]
            flat[ci] = orig + eps
            up = loss_fn().item()
            flat[ci] = orig - eps
            down = loss_fn().item()
            flat[ci] = orig
            numeric = (up - down) / (2.0 * eps)
            ana = float(analytic[name].reshape(-1)[ci])
            err = relative_error(ana, numeric)
            if err >= worst.max_rel_err:
                worst.max_rel_err = err
                worst.worst_coord = divmod(int(ci), p.data.shape[1])
                worst.analytic = ana
                worst.numeric = numeric
        report.params.append(worst)
    return report
