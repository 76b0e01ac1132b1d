"""The pushforward operator of a skew product acting on disintegrated
measures, iteration to the invariant measure, and empirical checks of the
operator inequalities.

One transfer step at a cell center pulls the fiber measures sitting over
the branch preimages, pushes each through the corresponding fiber
contraction evaluated at the exact preimage point, scales by the branch
weight, sums, and (optionally) consolidates the support back to the cap.
The new marginal coincides with the grid transfer of the old marginal by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base_dynamics import BaseMap, SystemParams, estimate_base_rate
from .errors import CapExceededError, InvalidInputError, InvariantViolationError
from .fiber_measure import AtomicMeasure, consolidate_to_cap, zero_measure
from .reporting import Report
from .skew_measure import (
    DisintegratedMeasure,
    PathHolderEstimate,
    path_holder_constant,
    product_measure,
    weak_norm,
    strong_norm,
)

DEFAULT_CAP = 64


@dataclass
class FiberFamily:
    """Per-branch fiber maps (x, y) -> G_i(x, y) with a shared contraction
    factor. A single callable may be given for branch-independent G."""

    maps: list
    alpha: float
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if callable(self.maps):
            self.maps = [self.maps]

    def branch_map(self, i: int):
        return self.maps[i % len(self.maps)]

    def x_independent(self, n_probe: int = 17) -> bool:
        ys = np.linspace(0.0, 1.0, 9)
        ref = self.branch_map(0)(0.0, ys)
        for g in self.maps:
            for x in np.linspace(0.0, 1.0 - 1e-9, n_probe):
                if np.max(np.abs(g(x, ys) - ref)) > 1e-14:
                    return False
        return True


def affine_fiber(alpha: float, c0: float = 0.0, cx: float = 0.0) -> FiberFamily:
    """G(x, y) = alpha*y + c0 + cx*x; the range must stay inside [0, 1]."""
    lo = min(c0, c0 + cx)
    hi = max(alpha + c0, alpha + c0 + cx)
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise InvalidInputError(
            f"affine fiber family leaves [0, 1]: range [{lo:.4g}, {hi:.4g}]"
        )
    return FiberFamily(
        [lambda x, y, a=alpha, b=c0, c=cx: a * np.asarray(y) + b + c * x],
        alpha,
        name=f"affine:{c0},{cx}",
    )


def fiber_family_from_id(fam_id: str, alpha: float) -> FiberFamily:
    """Gallery: "const:c", "affine:c0,cx"."""
    if fam_id.startswith("const:"):
        c = float(fam_id.split(":", 1)[1])
        return affine_fiber(alpha, c0=c, cx=0.0)
    if fam_id.startswith("affine:"):
        c0, cx = (float(v) for v in fam_id.split(":", 1)[1].split(","))
        return affine_fiber(alpha, c0=c0, cx=cx)
    raise InvalidInputError(f"unknown fiber family id {fam_id!r}")


@dataclass
class SkewSystem:
    """Base map, fiber family and analytic parameters, with cached
    empirical constants."""

    base: BaseMap
    fiber: FiberFamily
    params: SystemParams
    _checked: bool = field(default=False, repr=False, compare=False)
    _caches: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if abs(self.fiber.alpha - self.params.alpha) > 1e-12:
            raise InvalidInputError(
                f"fiber alpha {self.fiber.alpha} differs from params alpha {self.params.alpha}"
            )

    def validate(self, n_probe: int = 33, tol: float = 1e-10):
        """Sampled contraction, range and declared x-regularity checks.
        Runs once; later calls are free."""
        if self._checked:
            return
        ys = np.linspace(0.0, 1.0, 33)
        for i, branch in enumerate(self.base.branches):
            g = self.fiber.branch_map(i)
            xs = np.linspace(branch.lo, branch.hi, n_probe, endpoint=False)
            sampled_xreg = 0.0
            prev = None
            for x in xs:
                img = np.asarray(g(x, ys), dtype=float)
                if img.min() < -tol or img.max() > 1.0 + tol:
                    raise InvariantViolationError(
                        f"branch {i}: fiber image leaves [0, 1] at x={x:.6g}"
                    )
                steps = np.abs(np.diff(img))
                if np.any(steps > self.params.alpha * np.diff(ys) + tol):
                    raise InvariantViolationError(
                        f"branch {i}: contraction factor exceeded at x={x:.6g}"
                    )
                if prev is not None:
                    dx = x - prev[0]
                    sampled_xreg = max(
                        sampled_xreg,
                        float(np.max(np.abs(img - prev[1]))) / dx**self.params.zeta,
                    )
                prev = (x, img)
            if sampled_xreg > self.params.g_holder + 1e-9:
                raise InvariantViolationError(
                    f"branch {i}: sampled x-regularity {sampled_xreg:.6g} exceeds "
                    f"declared {self.params.g_holder:.6g}"
                )
        self._checked = True

    def base_rate(self, n_max: int = 6, trials: int = 4, seed: int = 101):
        key = ("rate", n_max, trials, seed)
        if key not in self._caches:
            self._caches[key] = estimate_base_rate(
                self.base, self.params.zeta, n_max=n_max, trials=trials, seed=seed
            )
        return self._caches[key]

    def cache(self, key, factory):
        if key not in self._caches:
            self._caches[key] = factory()
        return self._caches[key]


@dataclass
class StepRecord:
    n: int
    delta_weak: float | None = None
    weak: float | None = None
    strong: float | None = None
    path_holder: float | None = None
    max_support: int = 0
    consolidation_error: float = 0.0


@dataclass
class IterationLog:
    records: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    extras: dict = field(default_factory=dict)

    def append(self, record: StepRecord):
        if self.records and record.n <= self.records[-1].n:
            raise InvalidInputError("iteration records must have increasing step index")
        self.records.append(record)


def apply_transfer(
    sys: SkewSystem,
    mu: DisintegratedMeasure,
    cap: int | None = DEFAULT_CAP,
    force: bool = False,
) -> DisintegratedMeasure:
    """One pushforward step. `cap=None` disables consolidation (the step
    is then exact). Raises CapExceededError naming the cell on failure."""
    if not force:
        sys.validate()
    n = mu.n_cells
    cells, weights, points = sys.base.preimage_table(n)
    zeta = sys.params.zeta
    fibers: list[AtomicMeasure] = []
    marginal = np.empty(n)
    step_error = 0.0
    for k in range(n):
        pos_parts = []
        wt_parts = []
        for i in range(sys.base.degree):
            src = mu.fibers[cells[k, i]]
            if len(src) == 0:
                continue
            g = sys.fiber.branch_map(i)
            img = np.asarray(g(points[k, i], src.positions), dtype=float)
            if img.min() < -1e-12 or img.max() > 1.0 + 1e-12:
                raise InvariantViolationError(
                    f"cell {k}, branch {i}: fiber image leaves [0, 1]"
                )
            pos_parts.append(np.clip(img, 0.0, 1.0))
            wt_parts.append(weights[k, i] * src.weights)
        if pos_parts:
            fiber = AtomicMeasure(np.concatenate(pos_parts), np.concatenate(wt_parts))
        else:
            fiber = zero_measure()
        if cap is not None and len(fiber) > cap:
            try:
                result = consolidate_to_cap(fiber, cap, zeta)
            except CapExceededError as exc:
                raise CapExceededError(f"cell {k}: {exc}") from exc
            fiber = result.measure
            step_error = max(step_error, result.w_error)
        fibers.append(fiber)
        marginal[k] = float(np.dot(weights[k], mu.marginal[cells[k]]))
    return DisintegratedMeasure(fibers, marginal, mu.consolidation_error + step_error)


def compute_invariant(
    sys: SkewSystem,
    nu0: AtomicMeasure,
    tol: float,
    n_max: int,
    n_cells: int = 256,
    cap: int = DEFAULT_CAP,
    collect_norms: bool = False,
) -> tuple[DisintegratedMeasure, IterationLog]:
    """Iterate the transfer operator from the product of Lebesgue with
    `nu0` until successive iterates are closer than `tol` in the weak
    norm. Returns the last iterate and the full log; non-convergence is a
    flag on the log, not an error."""
    if not nu0.is_probability():
        raise InvalidInputError("initial fiber distribution must be a probability")
    if tol <= 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    zeta = sys.params.zeta
    mu = product_measure(nu0, n_cells)
    log = IterationLog()
    if not np.isfinite(tol):
        log.converged = True
        return mu, log
    for n in range(1, n_max + 1):
        new = apply_transfer(sys, mu, cap=cap)
        delta = weak_norm(new - mu, zeta)
        record = StepRecord(
            n=n,
            delta_weak=delta,
            max_support=new.max_support(),
            consolidation_error=new.consolidation_error,
        )
        if collect_norms:
            record.weak = weak_norm(new, zeta)
            record.strong = strong_norm(new, zeta)
        log.append(record)
        mu = new
        if delta < tol:
            log.converged = True
            break
    log.extras["marginal_deviation"] = float(np.max(np.abs(mu.marginal - 1.0)))
    return mu, log


def _random_disintegrated(rng, n_cells, atoms_per_fiber, signed=True, scale=1.0):
    fibers = []
    for _ in range(n_cells):
        m = int(rng.integers(1, atoms_per_fiber + 1))
        pos = rng.random(m)
        wts = scale * (rng.normal(size=m) if signed else rng.random(m))
        fibers.append(AtomicMeasure(pos, wts))
    return DisintegratedMeasure.from_fibers(fibers)


def verify_weak_contraction(
    sys: SkewSystem,
    trials: int,
    seed: int,
    n_cells: int = 64,
    cap: int = DEFAULT_CAP,
    atoms_per_fiber: int = 8,
) -> Report:
    """Empirical check that one transfer step does not expand the weak
    norm (up to the reported consolidation slack), and of the refined
    bound alpha^zeta * weak + sup|marginal|."""
    sys.validate()
    zeta, alpha = sys.params.zeta, sys.params.alpha
    rng = np.random.default_rng(seed)
    worst_ratio = 0.0
    worst_refined = -np.inf
    rows = []
    for t in range(trials):
        mu = _random_disintegrated(rng, n_cells, atoms_per_fiber)
        before = weak_norm(mu, zeta)
        if before < 1e-12:
            rows.append((t, 0.0, 0.0, 0.0))
            continue
        pushed = apply_transfer(sys, mu, cap=cap)
        after = weak_norm(pushed, zeta)
        slack = pushed.consolidation_error - mu.consolidation_error
        ratio = (after - slack) / before
        worst_ratio = max(worst_ratio, ratio)
        refined = after - slack - (alpha**zeta * before + float(np.abs(mu.marginal).max()))
        worst_refined = max(worst_refined, refined)
        rows.append((t, before, after, slack))
    report = Report(f"weak contraction: {sys.base.name} x {sys.fiber.name}")
    report.add("weak_norm_ratio", worst_ratio <= 1.0 + 1e-9, worst_ratio, 1.0,
               note="max over trials of (weak after - slack) / weak before")
    report.add("refined_bound_excess", worst_refined <= 1e-9, worst_refined, 0.0,
               note="weak after vs alpha^zeta * weak + sup |marginal|")
    report.extras["trials"] = rows
    return report


def verify_holder_recursion(
    sys: SkewSystem,
    mu: DisintegratedMeasure,
    n: int,
    pair_budget: int = 64,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
    slack: float = 0.1,
) -> Report:
    """Track the path Hölder constant along transfer iterates against the
    geometric recursion bound beta^k |mu|_holder + D/(1-beta) * weak."""
    sys.validate()
    p = sys.params
    if float(np.max(np.abs(mu.marginal - 1.0))) > 1e-6:
        raise InvalidInputError("holder recursion check requires unit marginal density")
    beta = (p.alpha * p.L) ** p.zeta
    d_hold = p.eps_rho * p.L**p.zeta + p.g_holder * p.L**p.zeta
    if beta >= 1.0:
        raise InvalidInputError(f"recursion bound vacuous: beta = {beta} >= 1")
    w0 = weak_norm(mu, p.zeta)
    h0 = path_holder_constant(mu, p.zeta, pair_budget, seed).value
    report = Report(f"holder recursion: {sys.base.name} x {sys.fiber.name}")
    report.add("step_0", True, h0, h0, note="initial path constant")
    series = [(0, h0, h0)]
    cur = mu
    for k in range(1, n + 1):
        cur = apply_transfer(sys, cur, cap=cap)
        measured = path_holder_constant(cur, p.zeta, pair_budget, seed).value
        bound = beta**k * h0 + d_hold / (1.0 - beta) * w0
        report.add(f"step_{k}", measured <= bound + slack, measured, bound + slack,
                   note=f"bound {bound:.6g} + slack {slack}")
        series.append((k, measured, bound))
    report.extras["series"] = series
    report.extras["beta"] = beta
    report.extras["d_hold"] = d_hold
    return report
