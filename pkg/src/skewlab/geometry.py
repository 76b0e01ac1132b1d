"""Metric geometry of the base circle and the fiber interval.

The base manifold is the circle R/Z with the arc metric (diameter 1/2); the
fiber is [0, 1] with the absolute-value metric (diameter 1). Hölder seminorms
of sampled functions are estimated from below by evaluating difference
quotients over adjacent sample pairs plus a seeded batch of long-range pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def wrap_circle(x: float) -> float:
    """Reduce a real number to its representative in [0, 1)."""
    return x - math.floor(x)


def circle_distance(x: float, y: float) -> float:
    """Arc distance on R/Z; symmetric, bounded by 1/2."""
    d = abs(wrap_circle(x) - wrap_circle(y))
    return min(d, 1.0 - d)


def circle_distance_array(x, y):
    """Vectorized arc distance for numpy arrays already in [0, 1)."""
    d = np.abs(np.asarray(x) - np.asarray(y))
    return np.minimum(d, 1.0 - d)


def line_distance(x: float, y: float) -> float:
    return abs(x - y)


def torus2_distance(p, q):
    """Euclidean distance on the 2-torus [0,1)^2 using minimal images."""
    dx = circle_distance(p[0], q[0])
    dy = circle_distance(p[1], q[1])
    return math.hypot(dx, dy)


@dataclass
class HolderData:
    """Hölder seminorm and sup norm of a scalar function, plus their sum."""

    zeta: float
    seminorm: float
    sup_norm: float
    attaining_pair: tuple[int, int] | None = None

    @property
    def combined(self) -> float:
        return self.seminorm + self.sup_norm


def holder_seminorm_estimate(
    samples,
    zeta: float,
    pair_budget: int,
    seed: int,
    distance=circle_distance,
) -> HolderData:
    """Lower estimate of the zeta-Hölder seminorm of a sampled function.

    `samples` is a sequence of (point, value) pairs with distinct points.
    All pairs adjacent in position order (including the wrap pair) are
    evaluated, plus `pair_budget` seeded long-range pairs; if the budget
    covers every remaining pair the enumeration is exhaustive, which makes
    the estimate monotone under sample refinement. The estimate never
    exceeds the true seminorm. Ties are broken toward the earliest pair
    in evaluation order.
    """
    if not 0.0 < zeta <= 1.0:
        raise InvalidInputError(f"zeta must lie in (0, 1], got {zeta}")
    pts = np.asarray([s[0] for s in samples], dtype=float)
    vals = np.asarray([s[1] for s in samples], dtype=float)
    n = len(pts)
    if n < 2:
        raise InvalidInputError(f"need at least 2 samples, got {n}")

    order = np.argsort(pts, kind="stable")
    pairs: list[tuple[int, int]] = []
    seen = set()

    def push(i: int, j: int):
        key = (min(i, j), max(i, j))
        if i != j and key not in seen:
            seen.add(key)
            pairs.append(key)

    for a, b in zip(order[:-1], order[1:]):
        push(int(a), int(b))
    push(int(order[-1]), int(order[0]))

    remaining = n * (n - 1) // 2 - len(pairs)
    if pair_budget >= remaining:
        for i in range(n):
            for j in range(i + 1, n):
                push(i, j)
    elif pair_budget > 0:
        rng = np.random.default_rng(seed)
        drawn = 0
        while drawn < pair_budget:
            i, j = rng.integers(0, n, size=2)
            if i == j:
                continue
            drawn += 1
            push(int(i), int(j))

    best = 0.0
    best_pair = None
    for i, j in pairs:
        d = distance(pts[i], pts[j])
        if d <= 0.0:
            continue
        ratio = abs(vals[i] - vals[j]) / d**zeta
        if ratio > best:
            best = ratio
            best_pair = (i, j)
    return HolderData(
        zeta=zeta,
        seminorm=best,
        sup_norm=float(np.max(np.abs(vals))),
        attaining_pair=best_pair,
    )


def grid_holder_data(values, zeta: float, pair_budget: int = 0, seed: int = 0) -> HolderData:
    """Hölder data of a function sampled at the N uniform cell centers of R/Z."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    centers = (np.arange(n) + 0.5) / n
    return holder_seminorm_estimate(
        list(zip(centers, values)), zeta, pair_budget=pair_budget, seed=seed
    )
