"""Signed measures on the product of the circle with the fiber interval,
stored as a grid-indexed path of atomic fiber measures plus a marginal
density.

Cell k of an N-cell measure holds the fiber restriction over the cell
center (k+1/2)/N; the marginal value of a cell always equals the total
mass of its fiber (the restriction convention: fibers are weighted by the
marginal, so no division by a vanishing density ever occurs). The weak
norm takes the largest fiber dual-Hölder norm over cells; the strong norm
adds the Hölder norm of the marginal density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvariantViolationError
from .fiber_measure import AtomicMeasure, WEIGHT_FLOOR, w_norm, zero_measure
from .geometry import circle_distance, grid_holder_data

MARGINAL_TOL = 1e-10


@dataclass
class DisintegratedMeasure:
    """Grid-indexed path of fiber measures with a consistent marginal."""

    fibers: list[AtomicMeasure]
    marginal: np.ndarray
    consolidation_error: float = 0.0

    def __post_init__(self):
        self.marginal = np.asarray(self.marginal, dtype=float)
        if len(self.fibers) != self.marginal.size:
            raise InvalidInputError("one marginal value per fiber cell required")
        if len(self.fibers) == 0:
            raise InvalidInputError("a disintegrated measure needs at least one cell")
        for k, fiber in enumerate(self.fibers):
            if abs(fiber.mass() - self.marginal[k]) > MARGINAL_TOL:
                raise InvariantViolationError(
                    f"cell {k}: marginal {self.marginal[k]} != fiber mass {fiber.mass()}"
                )

    @classmethod
    def from_fibers(cls, fibers, consolidation_error=0.0) -> "DisintegratedMeasure":
        marginal = np.asarray([f.mass() for f in fibers])
        return cls(list(fibers), marginal, consolidation_error)

    @property
    def n_cells(self) -> int:
        return len(self.fibers)

    @property
    def centers(self) -> np.ndarray:
        n = self.n_cells
        return (np.arange(n) + 0.5) / n

    def total_mass(self) -> float:
        return float(self.marginal.mean())

    def max_support(self) -> int:
        return max(len(f) for f in self.fibers)

    def scaled(self, a: float) -> "DisintegratedMeasure":
        return DisintegratedMeasure(
            [f.scaled(a) for f in self.fibers],
            a * self.marginal,
            abs(a) * self.consolidation_error,
        )

    def __sub__(self, other: "DisintegratedMeasure") -> "DisintegratedMeasure":
        if other.n_cells != self.n_cells:
            raise InvalidInputError("grid sizes differ")
        return DisintegratedMeasure(
            [f - g for f, g in zip(self.fibers, other.fibers)],
            self.marginal - other.marginal,
            self.consolidation_error + other.consolidation_error,
        )

    def __add__(self, other: "DisintegratedMeasure") -> "DisintegratedMeasure":
        if other.n_cells != self.n_cells:
            raise InvalidInputError("grid sizes differ")
        return DisintegratedMeasure(
            [f + g for f, g in zip(self.fibers, other.fibers)],
            self.marginal + other.marginal,
            self.consolidation_error + other.consolidation_error,
        )


def zero_disintegrated(n_cells: int) -> DisintegratedMeasure:
    return DisintegratedMeasure([zero_measure() for _ in range(n_cells)], np.zeros(n_cells))


def product_measure(nu: AtomicMeasure, n_cells: int) -> DisintegratedMeasure:
    """Constant path: every cell carries a copy of the probability nu."""
    if not nu.is_probability():
        raise InvalidInputError(
            f"product measure needs a probability fiber, got mass {nu.mass()}"
        )
    fibers = [AtomicMeasure(nu.positions.copy(), nu.weights.copy()) for _ in range(n_cells)]
    return DisintegratedMeasure(fibers, np.full(n_cells, nu.mass()))


# ------------------------------------------------------------------ norms


def weak_norm(mu: DisintegratedMeasure, zeta: float) -> float:
    """Largest fiber dual-Hölder norm over the grid cells."""
    return max(w_norm(f, zeta) for f in mu.fibers)


def strong_norm(mu: DisintegratedMeasure, zeta: float) -> float:
    """Marginal Hölder norm (seminorm estimate plus sup) plus the weak norm."""
    marg = grid_holder_data(mu.marginal, zeta, pair_budget=2 * mu.n_cells, seed=0)
    return marg.combined + weak_norm(mu, zeta)


@dataclass
class PathHolderEstimate:
    value: float
    attaining_pair: tuple[int, int] | None


def path_holder_constant(
    mu: DisintegratedMeasure, zeta: float, pair_budget: int, seed: int
) -> PathHolderEstimate:
    """Largest fiber-to-fiber difference quotient along the path.

    Evaluates every adjacent cell pair plus `pair_budget` seeded random
    pairs; deterministic for a fixed seed, ties resolved toward the
    earliest pair evaluated.

    Distances are taken along the fundamental interval [0, 1), not around
    the circle: the path-regularity recursion pairs branch preimages
    inside common branch atoms, and the wrap point is a branch-image
    boundary where the fiber family may legitimately jump. Interior
    discontinuities are still detected (adjacent ratios grow like the
    inverse cell width there).
    """
    n = mu.n_cells
    if n < 2:
        raise InvalidInputError("need at least 2 cells for a path estimate")
    centers = mu.centers
    pairs = [(k, k + 1) for k in range(n - 1)]
    seen = set(pairs)
    if pair_budget > 0:
        rng = np.random.default_rng(seed)
        drawn = 0
        while drawn < pair_budget:
            i, j = (int(v) for v in rng.integers(0, n, size=2))
            if i == j:
                continue
            drawn += 1
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                pairs.append(key)
    best = 0.0
    best_pair = None
    for i, j in pairs:
        d = abs(centers[i] - centers[j])
        if d <= 0.0:
            continue
        diff = w_norm(mu.fibers[i] - mu.fibers[j], zeta)
        ratio = diff / d**zeta
        if ratio > best:
            best = ratio
            best_pair = (i, j)
    return PathHolderEstimate(best, best_pair)


# ------------------------------------------------------------ observables


@dataclass
class Observable:
    """Scalar function on the product space with declared Hölder data
    for the sum metric (circle arc plus fiber distance). `fn` must
    broadcast over numpy arrays in both arguments."""

    fn: object
    sup_norm: float
    holder_seminorm: float
    name: str = ""

    def __call__(self, x, y):
        return self.fn(x, y)

    @property
    def holder_norm(self) -> float:
        return self.sup_norm + self.holder_seminorm

    def scaled(self, c: float) -> "Observable":
        return Observable(
            lambda x, y, f=self.fn: c * f(x, y),
            abs(c) * self.sup_norm,
            abs(c) * self.holder_seminorm,
            name=f"{c}*{self.name}",
        )

    def sampled_seminorm(self, zeta: float, n: int = 48) -> float:
        """Grid lower bound of the true seminorm, for validating the
        declared value."""
        xs = (np.arange(n) + 0.5) / n
        ys = np.linspace(0.0, 1.0, n)
        vals = np.asarray(self.fn(xs[:, None], ys[None, :]), dtype=float)
        dx = (1.0 / n) ** zeta
        dy = (ys[1] - ys[0]) ** zeta
        best_x = np.abs(np.diff(vals, axis=0)).max() / dx if n > 1 else 0.0
        best_y = np.abs(np.diff(vals, axis=1)).max() / dy if n > 1 else 0.0
        return float(max(best_x, best_y))


def _lipschitz_holder_bound(lip: float, sup: float, zeta: float) -> float:
    """A C-Lipschitz function bounded by S is zeta-Hölder with constant
    at most C^zeta * (2S)^(1-zeta)."""
    if zeta == 1.0:
        return lip
    if lip == 0.0:
        return 0.0
    return lip**zeta * (2.0 * sup) ** (1.0 - zeta)


def observable_from_id(obs_id: str, zeta: float = 1.0) -> Observable:
    """Gallery: "const:c", "coord_y", "cos_x", "sin_x", "xy"."""
    if obs_id.startswith("const:"):
        c = float(obs_id.split(":", 1)[1])
        return Observable(lambda x, y, c=c: c + 0.0 * np.asarray(x) + 0.0 * np.asarray(y),
                          abs(c), 0.0, name=obs_id)
    if obs_id == "coord_y":
        return Observable(lambda x, y: np.asarray(y, dtype=float) + 0.0 * np.asarray(x),
                          1.0, _lipschitz_holder_bound(1.0, 1.0, zeta), name=obs_id)
    if obs_id == "cos_x":
        return Observable(lambda x, y: np.cos(2 * np.pi * np.asarray(x)) + 0.0 * np.asarray(y),
                          1.0, _lipschitz_holder_bound(2 * np.pi, 1.0, zeta), name=obs_id)
    if obs_id == "sin_x":
        return Observable(lambda x, y: np.sin(2 * np.pi * np.asarray(x)) + 0.0 * np.asarray(y),
                          1.0, _lipschitz_holder_bound(2 * np.pi, 1.0, zeta), name=obs_id)
    if obs_id == "xy":
        return Observable(lambda x, y: np.asarray(x) * np.asarray(y),
                          1.0, _lipschitz_holder_bound(2.0, 1.0, zeta), name=obs_id)
    raise InvalidInputError(f"unknown observable id {obs_id!r}")


# ------------------------------------------------- weighting and quadrature


def multiply_observable(mu0: DisintegratedMeasure, h: Observable) -> DisintegratedMeasure:
    """The measure with density h against mu0: atoms are reweighted by the
    observable value at their location and the marginal becomes the fiber
    average of h. Cells whose reweighted atoms all vanish carry the zero
    fiber; a signed h may leave a zero-mass signed fiber, which is kept."""
    for k, fiber in enumerate(mu0.fibers):
        if len(fiber) and fiber.weights.min() < -MARGINAL_TOL:
            raise InvalidInputError(f"cell {k}: multiply_observable needs nonnegative fibers")
    centers = mu0.centers
    fibers = []
    for k, fiber in enumerate(mu0.fibers):
        if len(fiber) == 0:
            fibers.append(zero_measure())
            continue
        weights = np.asarray(h(centers[k], fiber.positions), dtype=float) * fiber.weights
        keep = np.abs(weights) >= WEIGHT_FLOOR
        fibers.append(AtomicMeasure(fiber.positions[keep], weights[keep]))
    return DisintegratedMeasure.from_fibers(fibers)


def integrate(g: Observable, mu: DisintegratedMeasure) -> float:
    """Grid quadrature of the observable against the measure: cell average
    of the fiber sums."""
    centers = mu.centers
    total = 0.0
    for k, fiber in enumerate(mu.fibers):
        if len(fiber) == 0:
            continue
        vals = np.asarray(g(centers[k], fiber.positions), dtype=float)
        total += float(np.dot(vals, fiber.weights))
    return total / mu.n_cells


# ----------------------------------------------------------- serialization


def save_measure(mu: DisintegratedMeasure, path) -> None:
    """Plain-text checkpoint; floats are written with repr so the
    round-trip is bit-exact."""
    lines = ["skewlab-measure 1", f"cells {mu.n_cells}",
             f"consolidation_error {float(mu.consolidation_error)!r}"]
    for k, fiber in enumerate(mu.fibers):
        lines.append(f"cell {k} {float(mu.marginal[k])!r} {len(fiber)}")
        for p, w in zip(fiber.positions, fiber.weights):
            lines.append(f"{float(p)!r} {float(w)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_measure(path) -> DisintegratedMeasure:
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != "skewlab-measure 1":
        raise InvalidInputError(f"{path}: not a skewlab measure checkpoint")
    n_cells = int(lines[1].split()[1])
    cons_err = float(lines[2].split()[1])
    fibers: list[AtomicMeasure] = []
    marginal = np.empty(n_cells)
    idx = 3
    for _ in range(n_cells):
        tag, k, phi, count = lines[idx].split()
        if tag != "cell":
            raise InvalidInputError(f"{path}: malformed checkpoint near line {idx + 1}")
        k, count = int(k), int(count)
        marginal[k] = float(phi)
        idx += 1
        pos = np.empty(count)
        wts = np.empty(count)
        for j in range(count):
            a, b = lines[idx].split()
            pos[j], wts[j] = float(a), float(b)
            idx += 1
        fibers.append(AtomicMeasure(pos, wts))
    return DisintegratedMeasure(fibers, marginal, cons_err)
