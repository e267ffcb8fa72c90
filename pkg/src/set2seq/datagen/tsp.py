"""Planar travelling-salesman instances with an exact dynamic-programming oracle.

Points are i.i.d. uniform in the unit square.  Targets come from the
Held-Karp O(n^2 * 2^n) subset DP, which is exact; its exponential cost is
why target generation is capped at n <= 13 and length evaluation at n <= 20.

Tour convention: "closed" scores a tour as the cycle through all points
returning to the start; "open" scores the Hamiltonian path from point 0
with no return edge.  The dataset default is closed, fixed by Monte Carlo
calibration of mean optimal/random lengths at n = 10 (see the calibrate
helper and README).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.rng import SeededRng, parallel_map
from .io import Instance

HELD_KARP_TARGET_MAX_N = 13
HELD_KARP_EVAL_MAX_N = 20

CONVENTIONS = ("closed", "open")

# Fixed by calibrate_convention() against mean optimal tour length at n=10;
# see notes in README. "closed" reproduces the oracle anchor.
DEFAULT_CONVENTION = "closed"


@dataclass
class TspConfig:
    count: int = 1000
    n_min: int = 5
    n_max: int = 10
    with_targets: bool = True
    convention: str = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if self.with_targets and self.n_max > HELD_KARP_TARGET_MAX_N:
            raise ValueError(
                f"targets need the exact oracle, which is capped at n <= {HELD_KARP_TARGET_MAX_N}; "
                f"got n_max={self.n_max} (generate with with_targets=False for eval-only sets)")


def tour_length(points: np.ndarray, perm, closed: bool = True) -> float:
    """Euclidean length of the tour visiting points in `perm` order."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    order = np.asarray(perm, dtype=np.intp).reshape(-1)
    if sorted(order.tolist()) != list(range(n)):
        raise ValueError(f"perm must be a permutation of range({n})")
    if n == 1:
        return 0.0
    seq = pts[order]
    length = float(np.sqrt(((seq[1:] - seq[:-1]) ** 2).sum(axis=1)).sum())
    if closed:
        length += float(np.sqrt(((seq[0] - seq[-1]) ** 2).sum()))
    return length


def held_karp(points: np.ndarray, closed: bool = True) -> tuple[list[int], float]:
    """Exact optimal tour from point 0: returns (tour, length).

    DP over cost-to-go: g[mask][j] = cheapest completion from point j with
    `mask` still unvisited (mask bits index points 1..n-1).  Reconstruction
    walks forward picking the smallest feasible next point, which makes
    tie-breaking deterministic (lexicographically smallest optimal tour).
    Closed tours are then direction-canonicalized so the second visited
    index is smaller than the last.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if n > HELD_KARP_EVAL_MAX_N:
        raise ValueError(f"held_karp is exponential; capped at n <= {HELD_KARP_EVAL_MAX_N}, got {n}")
    if n == 1:
        return [0], 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))

    m = n - 1  # mask bits cover points 1..n-1
    full = (1 << m) - 1
    g = np.empty((full + 1, n), dtype=np.float64)
    g[0, :] = dist[:, 0] if closed else 0.0
    members: list[np.ndarray] = [None] * (full + 1)  # type: ignore[list-item]
    for mask in range(1, full + 1):
        vs = np.array([i + 1 for i in range(m) if mask >> i & 1], dtype=np.intp)
        members[mask] = vs
        prev = np.array([mask & ~(1 << (v - 1)) for v in vs], dtype=np.intp)
        # candidate cost from any j: d(j, v) + g[mask without v][v]
        cand = dist[:, vs] + g[prev, vs]
        g[mask] = cand.min(axis=1)

    tour = [0]
    mask, j = full, 0
    while mask:
        vs = members[mask]
        prev = np.array([mask & ~(1 << (v - 1)) for v in vs], dtype=np.intp)
        cand = dist[j, vs] + g[prev, vs]
        pick = int(np.flatnonzero(cand == g[mask, j])[0])  # smallest index achieving the min
        v = int(vs[pick])
        tour.append(v)
        mask &= ~(1 << (v - 1))
        j = v

    if closed and n >= 3 and tour[1] > tour[-1]:
        tour = [0] + tour[:0:-1]
    return tour, float(g[full, 0])


def held_karp_lengths(points_batch: np.ndarray, closed: bool = True,
                      chunk: int = 2000) -> np.ndarray:
    """Optimal tour lengths for a batch of same-size instances, vectorized.

    points_batch: (B, n, 2).  Used by the Monte Carlo calibration, where
    per-instance held_karp would be needlessly slow; cross-checked against
    it in the tests.
    """
    pts = np.asarray(points_batch, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[2] != 2:
        raise ValueError(f"points_batch must be (B, n, 2), got {pts.shape}")
    B, n = pts.shape[0], pts.shape[1]
    if n > HELD_KARP_EVAL_MAX_N:
        raise ValueError(f"held_karp_lengths capped at n <= {HELD_KARP_EVAL_MAX_N}, got {n}")
    if n == 1:
        return np.zeros(B, dtype=np.float64)
    out = np.empty(B, dtype=np.float64)
    m = n - 1
    full = (1 << m) - 1
    for lo in range(0, B, chunk):
        sub = pts[lo:lo + chunk]
        b = sub.shape[0]
        diff = sub[:, :, None, :] - sub[:, None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=3))  # (b, n, n)
        g = np.empty((full + 1, n, b), dtype=np.float64)
        g[0] = dist[:, :, 0].T if closed else 0.0
        for mask in range(1, full + 1):
            vs = [i + 1 for i in range(m) if mask >> i & 1]
            prev = [mask & ~(1 << (v - 1)) for v in vs]
            # (len(vs), n, b): cost via v = d(j, v) + g[mask\v][v]
            cand = dist[:, :, vs].transpose(2, 1, 0) + g[prev, vs, :][:, None, :]
            g[mask] = cand.min(axis=0)
        out[lo:lo + b] = g[full, 0, :]
    return out


def gen_tsp(cfg: TspConfig, rng: SeededRng) -> list[Instance]:
    """Uniform planar instances; targets are exact optimal tours when requested."""

    def make(i: int) -> Instance:
        r = rng.derive(i)
        n = int(r.integers(cfg.n_min, cfg.n_max + 1))
        pts = r.uniform(0.0, 1.0, (n, 2)).astype(np.float64)
        target = None
        meta = {"n": n, "convention": cfg.convention}
        if cfg.with_targets:
            tour, length = held_karp(pts, closed=cfg.convention == "closed")
            target = tour
            meta["optimal_length"] = length
        return Instance(elements=pts, target=target, task="tsp", meta=meta)

    return parallel_map(make, range(cfg.count))


def random_tour_lengths(n: int, count: int, rng: SeededRng, closed: bool = True) -> np.ndarray:
    """Lengths of uniformly random tours on fresh uniform instances."""
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        r = rng.derive(i)
        pts = r.uniform(0.0, 1.0, (n, 2))
        perm = r.permutation(n)
        out[i] = tour_length(pts, perm, closed=closed)
    return out


def calibrate_convention(n: int = 10, count: int = 50_000, seed: int = 20_240_613) -> dict:
    """Monte Carlo means of optimal and random tour lengths under both conventions.

    Returns {"closed": {"held_karp": ..., "random": ...}, "open": {...}}.
    Used once to pin DEFAULT_CONVENTION against the published oracle anchors.
    """
    rng = SeededRng(seed)
    pts = np.stack([rng.derive(i).uniform(0.0, 1.0, (n, 2)) for i in range(count)])
    perm_rng = rng.derive(999_999)
    perms = np.stack([perm_rng.permutation(n) for _ in range(count)])
    result: dict[str, dict[str, float]] = {}
    for conv in CONVENTIONS:
        closed = conv == "closed"
        hk = held_karp_lengths(pts, closed=closed)
        seq = np.take_along_axis(pts, perms[:, :, None], axis=1)
        seg = np.sqrt(((seq[:, 1:] - seq[:, :-1]) ** 2).sum(axis=2)).sum(axis=1)
        if closed:
            seg = seg + np.sqrt(((seq[:, 0] - seq[:, -1]) ** 2).sum(axis=1))
        result[conv] = {"held_karp": float(hk.mean()), "random": float(seg.mean())}
    return result
