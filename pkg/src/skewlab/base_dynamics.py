"""Full-branch piecewise circle maps and their grid transfer operator.

A base map is a list of monotone branches covering [0, 1); each branch
carries a continuous increasing lift onto [0, 1) so preimages are found
either in closed form or by bisection. The transfer operator acts on
piecewise-constant grid densities through the branch-preimage formula
with weights 1/|f'| (optionally renormalized so they sum to one at every
point, for maps whose reference measure is only approximately Lebesgue).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationFailureError, InvalidInputError, NumericFailureError
from .geometry import grid_holder_data, wrap_circle
from .reporting import Report

EXACT = "exact"
NORMALIZED = "normalized"


@dataclass
class SystemParams:
    """Analytic parameters of a skew system.

    `holder_exponent_mode` selects the exponent used in the admissibility
    balance: "use_zeta" (default) or "use_alpha"; both values are always
    reported by check_hypotheses.
    """

    zeta: float = 1.0
    alpha: float = 0.5
    L: float = 1.0
    sigma: float = 2.0
    q: int = 0
    eps_rho: float = 0.0
    g_holder: float = 0.0
    holder_exponent_mode: str = "use_zeta"

    def __post_init__(self):
        if not 0.0 < self.zeta <= 1.0:
            raise InvalidInputError(f"zeta must lie in (0, 1], got {self.zeta}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.L < 1.0:
            raise InvalidInputError(f"L must be >= 1, got {self.L}")
        if self.sigma <= 1.0:
            raise InvalidInputError(f"sigma must be > 1, got {self.sigma}")
        if self.q < 0:
            raise InvalidInputError(f"q must be nonnegative, got {self.q}")
        if self.eps_rho < 0.0:
            raise InvalidInputError(f"eps_rho must be nonnegative, got {self.eps_rho}")
        if self.g_holder < 0.0:
            raise InvalidInputError(f"g_holder must be nonnegative, got {self.g_holder}")
        if self.holder_exponent_mode not in ("use_zeta", "use_alpha"):
            raise InvalidInputError(
                f"unknown holder_exponent_mode {self.holder_exponent_mode!r}"
            )

    def admissibility_exponent(self) -> float:
        return self.zeta if self.holder_exponent_mode == "use_zeta" else self.alpha


@dataclass
class Branch:
    """One monotone branch f|_[lo, hi) with full image [0, 1).

    `forward_lift` is the continuous increasing lift with values running
    from 0 at `lo` to 1 at `hi`; `inverse` inverts it on [0, 1).
    """

    lo: float
    hi: float
    forward_lift: object
    inverse: object
    derivative: object
    label: str = ""

    def contains(self, x: float) -> bool:
        return self.lo <= x < self.hi

    def preimage(self, gamma: float) -> float:
        x = self.inverse(gamma)
        if abs(wrap_circle(self.forward_lift(x)) - wrap_circle(gamma)) > 1e-10 and (
            abs(self.forward_lift(x) - gamma) > 1e-10
        ):
            raise NumericFailureError(
                f"branch {self.label or self.lo}: inverse check failed at gamma={gamma}"
            )
        return x


def _bisect_inverse(lift, lo, hi, tol=1e-12):
    def inverse(gamma):
        a, b = lo, hi
        fa = lift(a) - gamma
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = lift(m) - gamma
            if fa * fm <= 0:
                b = m
            else:
                a, fa = m, fm
            if b - a <= tol:
                break
        else:
            raise NumericFailureError(f"bisection stalled on branch [{lo}, {hi})")
        return 0.5 * (a + b)

    return inverse


@dataclass
class BaseMap:
    """Piecewise full-branch circle map with optional mild-contraction
    region and a weight mode: EXACT uses the raw 1/|f'| (valid when
    Lebesgue is invariant), NORMALIZED rescales the preimage weights to
    sum to one at every point."""

    branches: list[Branch]
    region_a: list[tuple[float, float]] = field(default_factory=list)
    mode: str = EXACT
    name: str = "custom"
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.branches:
            raise InvalidInputError("a base map needs at least one branch")
        cover = sorted((b.lo, b.hi) for b in self.branches)
        if abs(cover[0][0]) > 1e-12 or abs(cover[-1][1] - 1.0) > 1e-12:
            raise InvalidInputError("branch domains must cover [0, 1)")
        for (a, b), (c, _) in zip(cover[:-1], cover[1:]):
            if abs(b - c) > 1e-12:
                raise InvalidInputError("branch domains must tile [0, 1) without gaps")
        if self.mode not in (EXACT, NORMALIZED):
            raise InvalidInputError(f"unknown weight mode {self.mode!r}")

    @property
    def degree(self) -> int:
        return len(self.branches)

    def apply(self, x: float) -> float:
        for b in self.branches:
            if b.contains(x):
                return wrap_circle(b.forward_lift(x))
        return wrap_circle(self.branches[-1].forward_lift(x))

    def jacobian_weight(self, x: float, branch: Branch) -> float:
        d = abs(branch.derivative(x))
        if d <= 0:
            raise NumericFailureError(
                f"branch {branch.label}: vanishing derivative at x={x}"
            )
        return 1.0 / d

    def in_region_a(self, x: float) -> bool:
        return any(lo <= x < hi for lo, hi in self.region_a)

    def preimage_table(self, n_cells: int):
        """Cached per-grid arrays (cells, weights, points), each (N, deg):
        preimage cell index, normalized weight and exact preimage point of
        every cell center under every branch."""
        if n_cells in self._tables:
            return self._tables[n_cells]
        deg = self.degree
        cells = np.empty((n_cells, deg), dtype=np.int64)
        weights = np.empty((n_cells, deg))
        points = np.empty((n_cells, deg))
        for k in range(n_cells):
            gamma = (k + 0.5) / n_cells
            for i, (x, rho) in enumerate(branch_preimages(self, gamma)):
                cells[k, i] = min(int(x * n_cells), n_cells - 1)
                weights[k, i] = rho
                points[k, i] = x
        self._tables[n_cells] = (cells, weights, points)
        return self._tables[n_cells]


def branch_preimages(f: BaseMap, gamma: float) -> list[tuple[float, float]]:
    """The deg(f) preimages of `gamma` with their transfer weights.

    In EXACT mode the weights are the raw 1/|f'(x_i)| (they sum to one by
    construction of the map); in NORMALIZED mode they are divided by
    their sum.
    """
    gamma = wrap_circle(gamma)
    pairs = []
    for b in f.branches:
        x = b.preimage(gamma)
        x = min(max(x, b.lo), np.nextafter(b.hi, b.lo))
        pairs.append((x, f.jacobian_weight(x, b)))
    if f.mode == NORMALIZED:
        total = sum(w for _, w in pairs)
        pairs = [(x, w / total) for x, w in pairs]
    return pairs


# ---------------------------------------------------------------- gallery


def doubling_map() -> BaseMap:
    return linear_full_branch([2.0, 2.0], name="doubling")


def linear_full_branch(slopes, name=None) -> BaseMap:
    """Piecewise-linear full-branch map with the given slopes; the i-th
    branch domain has width 1/slope_i. Lebesgue is invariant exactly when
    the widths sum to one."""
    widths = [1.0 / s for s in slopes]
    if abs(sum(widths) - 1.0) > 1e-12:
        raise InvalidInputError(
            f"slopes {slopes} do not tile the circle: widths sum to {sum(widths)}"
        )
    branches = []
    lo = 0.0
    for i, s in enumerate(slopes):
        hi = lo + 1.0 / s
        branches.append(
            Branch(
                lo=lo,
                hi=hi,
                forward_lift=lambda x, s=s, lo=lo: s * (x - lo),
                inverse=lambda y, s=s, lo=lo: lo + y / s,
                derivative=lambda x, s=s: s,
                label=f"linear{i}",
            )
        )
        lo = hi
    return BaseMap(branches, name=name or f"linear{slopes}")


def perturbed_doubling(a: float) -> BaseMap:
    """f(x) = 2x + (a/2pi) sin(2pi x) mod 1; Lebesgue is no longer
    invariant, so the map runs in NORMALIZED weight mode."""
    if not 0.0 <= a < 2.0:
        raise InvalidInputError(f"perturbation must satisfy 0 <= a < 2, got {a}")

    def lift(x):
        return 2.0 * x + a / (2.0 * math.pi) * math.sin(2.0 * math.pi * x)

    def deriv(x):
        return 2.0 + a * math.cos(2.0 * math.pi * x)

    branches = [
        Branch(0.0, 0.5, lambda x: lift(x), _bisect_inverse(lambda x: lift(x), 0.0, 0.5),
               deriv, label="perturbed0"),
        Branch(0.5, 1.0, lambda x: lift(x) - 1.0,
               _bisect_inverse(lambda x: lift(x) - 1.0, 0.5, 1.0), deriv,
               label="perturbed1"),
    ]
    return BaseMap(branches, mode=NORMALIZED, name=f"perturbed:{a}")


BASE_GALLERY = {
    "doubling": doubling_map,
    "tripling": lambda: linear_full_branch([3.0, 3.0, 3.0], name="tripling"),
}


def base_map_from_id(map_id: str) -> BaseMap:
    """Gallery lookup: "doubling", "tripling", "linear:3,1.5", "perturbed:0.1"."""
    if map_id in BASE_GALLERY:
        return BASE_GALLERY[map_id]()
    if map_id.startswith("linear:"):
        slopes = [float(s) for s in map_id.split(":", 1)[1].split(",")]
        return linear_full_branch(slopes, name=map_id)
    if map_id.startswith("perturbed:"):
        return perturbed_doubling(float(map_id.split(":", 1)[1]))
    raise InvalidInputError(f"unknown base map id {map_id!r}")


# ------------------------------------------------------- grid densities


@dataclass
class GridDensity:
    """Piecewise-constant density on the N uniform cells of the circle."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("density values must be finite")

    @classmethod
    def from_function(cls, fn, n_cells: int) -> "GridDensity":
        centers = (np.arange(n_cells) + 0.5) / n_cells
        return cls(fn(centers))

    def __len__(self):
        return self.values.size

    def integral(self) -> float:
        return float(self.values.mean())

    def holder_norm(self, zeta: float, pair_budget=None, seed=0):
        budget = 2 * len(self) if pair_budget is None else pair_budget
        return grid_holder_data(self.values, zeta, pair_budget=budget, seed=seed)


def perron_frobenius(f: BaseMap, phi: GridDensity) -> GridDensity:
    """One transfer step on a grid density: each cell center pulls the
    density value of the cell containing each branch preimage, weighted
    by the branch weight."""
    cells, weights, _ = f.preimage_table(len(phi))
    return GridDensity((phi.values[cells] * weights).sum(axis=1))


# ----------------------------------------------------- empirical base rate


def _random_holder_density(rng, n_cells, zeta, n_freq=64):
    """Random zero-mean trigonometric density with spectrum k^(-(1+zeta)).

    Every dyadic frequency band carries mass, so frequency-halving maps
    never annihilate the density outright, while the spectrum decays fast
    enough that the finest-scale blockiness of the grid iterates stays
    subdominant in the sampled Hölder norm.
    """
    centers = (np.arange(n_cells) + 0.5) / n_cells
    values = np.zeros(n_cells)
    for k in range(1, n_freq + 1):
        amp = k ** (-(1.0 + zeta))
        a, b = rng.uniform(-1, 1, size=2)
        values += amp * (a * np.cos(2 * np.pi * k * centers) + b * np.sin(2 * np.pi * k * centers))
    values -= values.mean()
    return GridDensity(values)


def estimate_base_rate(
    f: BaseMap,
    zeta: float,
    n_max: int,
    trials: int,
    seed: int,
    n_cells: int = 512,
) -> tuple[float, float]:
    """Empirical decay rate of the base transfer operator on zero-mean
    Hölder densities.

    Iterates random test densities, fits log of the Hölder norm against
    the step index by least squares over the tail half of the iterates
    (pooled across trials), and returns (r_hat, D_hat) with r_hat the
    fitted per-step factor and D_hat the worst observed prefactor.
    """
    rng = np.random.default_rng(seed)
    tail_start = max(1, n_max // 2)
    log_points = []
    ratios = []
    done = 0
    attempts = 0
    while done < trials:
        attempts += 1
        if attempts > 10 * trials + 10:
            raise EstimationFailureError("could not draw non-degenerate test densities")
        phi = _random_holder_density(rng, n_cells, zeta)
        phi_norm = phi.holder_norm(zeta).combined
        if phi_norm < 1e-12:
            continue  # degenerate draw, resample
        cur = phi
        norms = []
        for _ in range(n_max):
            cur = perron_frobenius(f, cur)
            norms.append(cur.holder_norm(zeta).combined)
        if min(norms) < 1e-14:
            continue  # operator annihilated the density; uninformative
        for n, value in enumerate(norms, start=1):
            if n >= tail_start:
                log_points.append((n, math.log(value)))
            ratios.append((n, value / phi_norm))
        done += 1
    ns = np.asarray([p[0] for p in log_points], dtype=float)
    logs = np.asarray([p[1] for p in log_points])
    slope, _ = np.polyfit(ns, logs, 1)
    if slope >= 0:
        raise EstimationFailureError(f"base rate fit is non-decaying (slope={slope:.3g})")
    r_hat = math.exp(slope)
    d_hat = max(ratio / r_hat**n for n, ratio in ratios)
    return r_hat, d_hat


# ------------------------------------------------------ hypothesis checks


def admissibility_value(deg, q, sigma, L, eps_rho, exponent) -> float:
    """Weighted branch-contraction balance; the map qualifies when the
    value is below one."""
    bracket = (deg - q) * sigma ** (-exponent) + q * L**exponent * (1.0 + (L - 1.0) ** exponent)
    return math.exp(eps_rho) * bracket / deg


def check_hypotheses(f: BaseMap, p: SystemParams, n_cells: int = 2048) -> Report:
    """Grid check of the expansion, covering and Jacobian-regularity
    hypotheses, plus the admissibility balance and the fiber-regularity
    precondition (alpha*L)^zeta < 1. Failures are report entries, never
    exceptions."""
    report = Report(f"hypothesis check: {f.name}")
    xs = (np.arange(n_cells) + 0.5) / n_cells
    rho = np.empty(n_cells)
    inv_lip = np.empty(n_cells)
    for k, x in enumerate(xs):
        branch = next(b for b in f.branches if b.contains(x))
        d = abs(branch.derivative(x))
        rho[k] = 1.0 / d
        inv_lip[k] = 1.0 / d
    in_a = np.asarray([f.in_region_a(x) for x in xs])

    if in_a.any():
        measured = float(inv_lip[in_a].max())
        report.add("f1_region_bound", measured <= p.L + 1e-15, measured, p.L,
                   note="max branch-inverse Lipschitz constant on the mild region")
    else:
        report.add("f1_region_bound", True, 0.0, p.L, note="mild region empty")
    off = ~in_a
    measured = float(inv_lip[off].max()) if off.any() else 0.0
    report.add("f1_expansion", measured < 1.0 / p.sigma + 1e-15, measured, 1.0 / p.sigma,
               note="max branch-inverse Lipschitz constant off the mild region")

    covering = sum(
        1
        for b in f.branches
        if any(max(lo, b.lo) < min(hi, b.hi) for lo, hi in f.region_a)
    )
    report.add("f2_cover", covering <= p.q and p.q < f.degree, covering, p.q,
               note="branch domains needed to cover the mild region")

    log_rho = np.log(rho)
    osc = float(log_rho.max() - log_rho.min())
    report.add("f3_log_ratio", osc <= p.eps_rho + 1e-15, osc, p.eps_rho)

    holder = grid_holder_data(rho, p.zeta, pair_budget=2 * n_cells, seed=0).seminorm
    threshold = p.eps_rho * float(rho.min())
    report.add("f3_holder", holder <= threshold + 1e-15, holder, threshold)

    value_zeta = admissibility_value(f.degree, p.q, p.sigma, p.L, p.eps_rho, p.zeta)
    value_alpha = admissibility_value(f.degree, p.q, p.sigma, p.L, p.eps_rho, p.alpha)
    configured = value_zeta if p.holder_exponent_mode == "use_zeta" else value_alpha
    report.add("admissibility", configured < 1.0, configured, 1.0,
               note=f"exponent mode {p.holder_exponent_mode}")
    report.extras["admissibility_use_zeta"] = value_zeta
    report.extras["admissibility_use_alpha"] = value_alpha

    beta = (p.alpha * p.L) ** p.zeta
    report.add("fiber_regularity_product", beta < 1.0, beta, 1.0,
               note="(alpha*L)^zeta")
    report.extras["alpha_times_L_pow_zeta"] = p.alpha * p.L**p.zeta
    return report


# ------------------------------------------------- mollified torus checker


def _standard_mollifier(u2):
    """exp(-1/(1-|u|^2)) inside the unit ball, 0 outside (unnormalized)."""
    out = np.zeros_like(u2)
    inside = u2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u2[inside]))
    return out


def check_torus_example(
    a: float,
    r: float,
    lam: float,
    zeta: float,
    grid: int,
    eps_rho: float = 0.2,
) -> Report:
    """Hypothesis check for the mollified two-torus construction.

    Builds the Jacobian field rho = eta_r * g on a grid of the 2-torus by
    circular FFT convolution, where g equals lam*(1-a) on the ball of
    radius r around the marked point and lam*(1+a) elsewhere, then checks

      * log-ratio:    sup log rho - inf log rho  <  eps_rho
      * holder:       H_zeta(rho) * r^zeta       <  eps_rho * inf rho
        (scale-corrected: the raw grid seminorm grows like 1/r^zeta by
        construction of the mollifier, so the scale-free quantity is the
        meaningful one)
      * admissibility: balance value with sigma = lam, L = 1/(1-a),
        q = 1, deg = round(lam), at exponent zeta.

    The weak-direction variant (sigma = 1+a) is reported as a non-gating
    entry; it is below one for no parameter choice and is kept visible
    for reference only.
    """
    if not 0.0 < a < 1.0:
        raise InvalidInputError(f"need 0 < a < 1, got {a}")
    if r <= 0.0 or lam <= 1.0:
        raise InvalidInputError(f"need r > 0 and lambda > 1, got r={r}, lambda={lam}")
    if r * grid < 4:
        raise InvalidInputError(
            f"grid too coarse for the mollifier support: r*grid = {r * grid} < 4"
        )

    centers = (np.arange(grid) + 0.5) / grid
    dx = np.minimum(np.abs(centers - 0.5), 1.0 - np.abs(centers - 0.5))
    dist2 = dx[:, None] ** 2 + dx[None, :] ** 2
    g_field = np.where(dist2 < r * r, lam * (1.0 - a), lam * (1.0 + a))

    # mollifier kernel on the same periodic grid, centered at index (0, 0)
    offsets = np.arange(grid)
    offsets = np.minimum(offsets, grid - offsets) / grid
    u2 = (offsets[:, None] ** 2 + offsets[None, :] ** 2) / (r * r)
    kernel = _standard_mollifier(u2)
    kernel /= kernel.sum()
    rho = np.real(np.fft.ifft2(np.fft.fft2(g_field) * np.fft.fft2(kernel)))

    report = Report(f"torus example check: a={a}, r={r}, lambda={lam}")
    inf_rho, sup_rho = float(rho.min()), float(rho.max())
    osc = math.log(sup_rho) - math.log(inf_rho)
    report.add("log_ratio", osc <= eps_rho + 1e-15, osc, eps_rho,
               note="sup log rho - inf log rho")

    step = 1.0 / grid
    grad = max(
        float(np.abs(np.diff(rho, axis=0, append=rho[:1, :])).max()),
        float(np.abs(np.diff(rho, axis=1, append=rho[:, :1])).max()),
    ) / step**zeta
    scaled = grad * r**zeta
    report.add("holder_scaled", scaled <= eps_rho * inf_rho + 1e-15, scaled,
               eps_rho * inf_rho, note="H_zeta(rho) * r^zeta vs eps_rho * inf rho")

    deg = max(2, round(lam))
    big_l = 1.0 / (1.0 - a)
    value = admissibility_value(deg, 1, lam, big_l, eps_rho, zeta)
    report.add("admissibility", value < 1.0, value, 1.0,
               note=f"sigma=lambda={lam}, L={big_l:.6g}, deg={deg}")
    weak = admissibility_value(deg, 1, 1.0 + a, big_l, eps_rho, zeta)
    report.add("admissibility_weak_direction", weak < 1.0, weak, 1.0,
               note="sigma = 1+a variant, reference only", gating=False)
    report.extras["inf_rho"] = inf_rho
    report.extras["sup_rho"] = sup_rho
    report.extras["grid_holder_seminorm"] = grad
    return report
