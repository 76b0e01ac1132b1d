"""Signed atomic measures on the fiber [0, 1] and their dual-Hölder norm.

The norm of an atomic measure sum_j w_j δ_{y_j} is the exact optimum of the
finite linear program

    maximize  sum_j w_j g_j
    s.t.      |g_j| <= 1,   |g_j - g_k| <= |y_j - y_k|^zeta  for all pairs,

i.e. the supremum over the discrete zeta-Hölder unit ball of test functions.
Only values at support points matter, so the LP is exact, not a
discretization. For zeta = 1 the pair constraints on a sorted support
telescope, so only adjacent pairs are kept; for zeta < 1 the snowflaked
metric is strictly subadditive along the line and all pairs are required.

Solved with HiGHS dual simplex (deterministic pivoting) via scipy.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import CapExceededError, InvalidInputError, InvariantViolationError, NumericFailureError

# Atoms below this absolute weight are ignored by the LP.
WEIGHT_FLOOR = 1e-15

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass
class AtomicMeasure:
    """Weighted atoms on [0, 1], kept sorted by position with exact
    duplicates merged. `cap` is an advisory support bound enforced by
    consolidate(), not by the constructor."""

    positions: np.ndarray
    weights: np.ndarray
    cap: int | None = None

    @classmethod
    def from_atoms(cls, atoms, cap=None) -> "AtomicMeasure":
        if len(atoms) == 0:
            return cls(np.empty(0), np.empty(0), cap)
        pos = np.asarray([a[0] for a in atoms], dtype=float)
        wts = np.asarray([a[1] for a in atoms], dtype=float)
        return cls(pos, wts, cap)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.positions.shape != self.weights.shape:
            raise InvalidInputError("positions and weights must have equal length")
        if self.positions.size and (
            self.positions.min() < -1e-12 or self.positions.max() > 1.0 + 1e-12
        ):
            raise InvalidInputError("atom positions must lie in [0, 1]")
        self.positions = np.clip(self.positions, 0.0, 1.0)
        self._canonicalize()

    def _canonicalize(self):
        if self.positions.size == 0:
            return
        order = np.argsort(self.positions, kind="stable")
        pos = self.positions[order]
        wts = self.weights[order]
        # merge exact duplicates by weight addition
        keep_pos, keep_wts = [pos[0]], [wts[0]]
        for p, w in zip(pos[1:], wts[1:]):
            if p == keep_pos[-1]:
                keep_wts[-1] += w
            else:
                keep_pos.append(p)
                keep_wts.append(w)
        self.positions = np.asarray(keep_pos)
        self.weights = np.asarray(keep_wts)

    def __len__(self) -> int:
        return self.positions.size

    def mass(self) -> float:
        return float(self.weights.sum()) if len(self) else 0.0

    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum()) if len(self) else 0.0

    def scaled(self, a: float) -> "AtomicMeasure":
        return AtomicMeasure(self.positions.copy(), a * self.weights, self.cap)

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.weights, other.weights]),
            self.cap,
        )

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return self + other.scaled(-1.0)

    def __neg__(self) -> "AtomicMeasure":
        return self.scaled(-1.0)

    def pruned(self, floor: float = WEIGHT_FLOOR) -> "AtomicMeasure":
        if len(self) == 0:
            return self
        keep = np.abs(self.weights) >= floor
        return AtomicMeasure(self.positions[keep], self.weights[keep], self.cap)

    def is_probability(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.weights >= -tol)) and abs(self.mass() - 1.0) <= tol


def zero_measure() -> AtomicMeasure:
    return AtomicMeasure(np.empty(0), np.empty(0))


def dirac(y: float, weight: float = 1.0) -> AtomicMeasure:
    return AtomicMeasure(np.array([y]), np.array([weight]))


def _pair_constraints(pos: np.ndarray, zeta: float):
    """Rows of A_ub for the Hölder constraints on a sorted support."""
    n = pos.size
    rows = []
    bounds = []
    if zeta == 1.0:
        idx_pairs = [(i, i + 1) for i in range(n - 1)]
    else:
        idx_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in idx_pairs:
        d = abs(pos[j] - pos[i]) ** zeta
        row = np.zeros(n)
        row[i], row[j] = 1.0, -1.0
        rows.append(row)
        bounds.append(d)
        rows.append(-row)
        bounds.append(d)
    if rows:
        return np.asarray(rows), np.asarray(bounds)
    return None, None


def w_norm(mu: AtomicMeasure, zeta: float) -> float:
    """Dual-Hölder norm of an atomic measure, exact via LP."""
    if not 0.0 < zeta <= 1.0:
        raise InvalidInputError(f"zeta must lie in (0, 1], got {zeta}")
    mu = mu.pruned()
    n = len(mu)
    if n == 0:
        return 0.0
    a_ub, b_ub = _pair_constraints(mu.positions, zeta)
    res = linprog(
        -mu.weights,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(-1.0, 1.0)] * n,
        method="highs-ds",
        options=_LP_OPTIONS,
    )
    if res.status != 0:
        raise NumericFailureError(f"LP solver failed with status {res.status}: {res.message}")
    return float(-res.fun)


def w_distance(mu: AtomicMeasure, nu: AtomicMeasure, zeta: float) -> float:
    """Dual-Hölder distance between two atomic measures."""
    return w_norm(mu - nu, zeta)


@dataclass
class FiberContraction:
    """A fiber map y -> G(x, y) at a fixed base point, with contraction
    factor alpha. `mapping` must accept numpy arrays."""

    mapping: object
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"contraction factor must lie in (0, 1), got {self.alpha}")

    def __call__(self, y):
        return self.mapping(np.asarray(y, dtype=float))

    def validate(self, n_samples: int = 64, tol: float = 1e-10):
        """Sampled check of the contraction bound and the range [0, 1]."""
        ys = np.linspace(0.0, 1.0, n_samples)
        img = self(ys)
        if img.min() < -tol or img.max() > 1.0 + tol:
            raise InvariantViolationError(
                f"fiber map range [{img.min():.3g}, {img.max():.3g}] leaves [0, 1]"
            )
        diff = np.abs(img[1:] - img[:-1])
        gaps = ys[1:] - ys[:-1]
        if np.any(diff > self.alpha * gaps + tol):
            raise InvariantViolationError("sampled contraction check failed")


def push_contraction(mu: AtomicMeasure, f_gamma: FiberContraction) -> AtomicMeasure:
    """Exact pushforward of atoms: (y, w) -> (G(y), w). Mass is unchanged."""
    if len(mu) == 0:
        return zero_measure()
    img = f_gamma(mu.positions)
    if img.min() < -1e-12 or img.max() > 1.0 + 1e-12:
        raise InvariantViolationError(
            f"pushforward image [{img.min():.6g}, {img.max():.6g}] leaves [0, 1]"
        )
    return AtomicMeasure(np.clip(img, 0.0, 1.0), mu.weights.copy(), mu.cap)


@dataclass
class ConsolidationResult:
    measure: AtomicMeasure
    w_error: float
    radius: float = 0.0


def _merge_same_sign(pos, wts, radius, cap, zeta):
    """Greedy nearest-pair merging of same-sign atoms within `radius`.

    On a sorted support the nearest same-sign pair is adjacent within its
    sign class, so only class-adjacent pairs are candidates. Ties go to
    the lowest index. The merged atom (weighted centroid, summed weight)
    is reinserted at its sorted position. Returns the new lists and the
    accumulated dual-norm perturbation bound.
    """
    pos = list(pos)
    wts = list(wts)
    err = 0.0
    while len(pos) > cap:
        best = None
        best_d = radius
        prev_by_sign = {1: None, -1: None}
        for k in range(len(pos)):
            s = 1 if wts[k] > 0 else -1
            p = prev_by_sign[s]
            if p is not None:
                d = pos[k] - pos[p]
                if d < best_d:
                    best, best_d = (p, k), d
            prev_by_sign[s] = k
        if best is None:
            break
        i, j = best
        w = wts[i] + wts[j]
        c = (pos[i] * wts[i] + pos[j] * wts[j]) / w
        err += abs(wts[i]) * abs(pos[i] - c) ** zeta + abs(wts[j]) * abs(pos[j] - c) ** zeta
        del pos[j], wts[j]
        del pos[i], wts[i]
        k = bisect.bisect_left(pos, c)
        pos.insert(k, c)
        wts.insert(k, w)
    return pos, wts, err


def _cancel_opposite_sign(pos, wts, radius, cap, zeta):
    """Cancel mass between nearby opposite-sign atoms (closest pair first).

    The nearest opposite-sign pair is always adjacent in the sorted order
    (an atom strictly between would form a closer opposite-sign pair with
    one of the two), so only adjacent pairs are scanned.
    """
    pos = list(pos)
    wts = list(wts)
    err = 0.0
    while len(pos) > cap:
        best = None
        best_d = radius
        for k in range(len(pos) - 1):
            if wts[k] * wts[k + 1] < 0:
                d = pos[k + 1] - pos[k]
                if d < best_d:
                    best, best_d = k, d
        if best is None:
            break
        i, j = best, best + 1
        m = min(abs(wts[i]), abs(wts[j]))
        err += m * (pos[j] - pos[i]) ** zeta
        keep, drop = (i, j) if abs(wts[i]) >= abs(wts[j]) else (j, i)
        wts[keep] = wts[i] + wts[j]
        kept_weight = wts[keep]
        del pos[drop], wts[drop]
        keep = keep if drop > keep else keep - 1
        if abs(kept_weight) < WEIGHT_FLOOR:
            del pos[keep], wts[keep]
    return pos, wts, err


def consolidate(
    mu: AtomicMeasure, radius: float, cap: int, zeta: float = 1.0
) -> ConsolidationResult:
    """Reduce the support of `mu` to at most `cap` atoms.

    Same-sign atoms within `radius` are merged first (weighted centroid,
    summed weight, exact total mass); if the cap is still exceeded,
    opposite-sign atoms within `radius` cancel. The returned `w_error`
    bounds the dual-Hölder perturbation of every merge performed.

    Raises CapExceededError if the cap cannot be reached within `radius`.
    """
    if radius < 0:
        raise InvalidInputError(f"radius must be nonnegative, got {radius}")
    mu = mu.pruned()
    if len(mu) <= cap:
        return ConsolidationResult(mu, 0.0, 0.0)
    pos, wts, err = _merge_same_sign(mu.positions, mu.weights, radius, cap, zeta)
    if len(pos) > cap:
        pos, wts, err2 = _cancel_opposite_sign(pos, wts, radius, cap, zeta)
        err += err2
    if len(pos) > cap:
        raise CapExceededError(
            f"cannot reduce {len(mu)} atoms to cap {cap} within radius {radius}"
        )
    out = AtomicMeasure(np.asarray(pos), np.asarray(wts), mu.cap).pruned()
    return ConsolidationResult(out, err, radius)


def consolidate_to_cap(mu: AtomicMeasure, cap: int, zeta: float = 1.0) -> ConsolidationResult:
    """Consolidate with the smallest radius (from the adjacent-gap ladder)
    that reaches the cap; escalates geometrically if merges cascade short."""
    mu = mu.pruned()
    if len(mu) <= cap:
        return ConsolidationResult(mu, 0.0, 0.0)
    gaps = np.sort(np.diff(mu.positions))
    excess = len(mu) - cap
    radius = max(gaps[min(excess - 1, gaps.size - 1)], 1e-15) * (1 + 1e-12)
    total_err = 0.0
    for _ in range(64):
        # partial progress within the current radius is kept before escalating
        pos, wts, err = _merge_same_sign(mu.positions, mu.weights, radius, cap, zeta)
        if len(pos) > cap:
            pos, wts, err2 = _cancel_opposite_sign(pos, wts, radius, cap, zeta)
            err += err2
        total_err += err
        mu = AtomicMeasure(np.asarray(pos), np.asarray(wts), mu.cap).pruned()
        if len(mu) <= cap:
            return ConsolidationResult(mu, total_err, radius)
        radius *= 2.0
    raise CapExceededError(f"radius escalation failed to reach cap {cap}")
