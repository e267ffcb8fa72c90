"""Named trainable parameters and their initialization."""

from __future__ import annotations

import math

import numpy as np

from .rng import SeededRng
from .tensor import Tensor


class Parameter(Tensor):
    """A leaf tensor with a name, tracked gradient, and Glorot/zeros init."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)


def glorot_uniform(shape: tuple[int, int], rng: SeededRng, dtype=np.float32) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) for a (fan_in, fan_out) matrix."""
    fan_in, fan_out = shape
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, shape).astype(dtype)


def init_param(name: str, shape: tuple[int, int], rng: SeededRng, kind: str = "glorot",
               dtype=np.float32) -> Parameter:
    """Fresh parameter: Glorot-uniform weights or zeros for bias-role params."""
    if kind == "glorot":
        data = glorot_uniform(shape, rng, dtype)
    elif kind == "zeros":
        data = np.zeros(shape, dtype=dtype)
    else:
        raise ValueError(f"unknown init kind {kind!r} (expected 'glorot' or 'zeros')")
    return Parameter(name, data, dtype=dtype)


class ParameterStore:
    """Insertion-ordered registry of named parameters.

    Iteration order is creation order, which makes optimizer updates and
    checkpoint layout deterministic for a fixed model-building sequence.
    """

    def __init__(self, rng: SeededRng | None = None, dtype=np.float32):
        self._params: dict[str, Parameter] = {}
        self.rng = rng
        self.dtype = dtype

    def create(self, name: str, shape: tuple[int, int], kind: str = "glorot") -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if self.rng is None:
            raise ValueError("ParameterStore needs an rng to create parameters")
        p = init_param(name, shape, self.rng, kind=kind, dtype=self.dtype)
        self._params[name] = p
        return p

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise ValueError(f"duplicate parameter name {param.name!r}")
        self._params[param.name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad = np.zeros_like(p.data)

    def n_scalars(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in self._params.items():
            arr = np.asarray(arrays[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name!r}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()
