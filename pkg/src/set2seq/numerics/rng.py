"""Deterministic random number streams.

Every source of randomness in the library flows through a SeededRng so that
a run is reproducible bit-for-bit from its integer seed.  Independent child
streams are derived from (seed, key...) tuples, which keeps parallel and
serial generation identical: worker i always draws from derive(i) no matter
which thread executes it.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np


class SeededRng:
    """A numpy PCG64 generator addressed by an explicit seed path."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
        self.seed = int(seed)
        self.path = _path
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *_path])))

    def derive(self, *keys: int) -> "SeededRng":
        """Child stream for (seed, *path, *keys); independent of draws made here."""
        return SeededRng(self.seed, self.path + tuple(int(k) for k in keys))

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Any = None) -> Any:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Any = None) -> Any:
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int, size: Any = None) -> Any:
        return self._gen.integers(low, high, size)

    def random(self, size: Any = None) -> Any:
        return self._gen.random(size)

    def shuffle(self, x: Any) -> None:
        self._gen.shuffle(x)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, a: Any, size: Any = None, replace: bool = True) -> Any:
        return self._gen.choice(a, size=size, replace=replace)

    def state(self) -> dict:
        """JSON-serializable snapshot of the generator position."""
        st = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "path": list(self.path),
            "bg_state": {
                "bit_generator": st["bit_generator"],
                "state": {"state": str(st["state"]["state"]), "inc": str(st["state"]["inc"])},
                "has_uint32": int(st["has_uint32"]),
                "uinteger": int(st["uinteger"]),
            },
        }

    @classmethod
    def from_state(cls, snapshot: dict) -> "SeededRng":
        rng = cls(int(snapshot["seed"]), tuple(snapshot["path"]))
        bg = snapshot["bg_state"]
        rng._gen.bit_generator.state = {
            "bit_generator": bg["bit_generator"],
            "state": {"state": int(bg["state"]["state"]), "inc": int(bg["state"]["inc"])},
            "has_uint32": int(bg["has_uint32"]),
            "uinteger": int(bg["uinteger"]),
        }
        return rng

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={self.path})"


def worker_count() -> int:
    """Worker threads allowed by SET2SEQ_THREADS; 1 (serial) when unset."""
    import os

    raw = os.environ.get("SET2SEQ_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"SET2SEQ_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def parallel_map(fn, items: Sequence) -> list:
    """Map fn over items, threaded when SET2SEQ_THREADS > 1, order preserved.

    fn must not share mutable state across items; give each item its own
    derived SeededRng so threaded and serial runs produce identical output.
    """
    n_workers = worker_count()
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items))
