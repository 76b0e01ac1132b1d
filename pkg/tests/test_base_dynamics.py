import math

import numpy as np
import pytest

from skewlab.base_dynamics import (
    GridDensity,
    SystemParams,
    admissibility_value,
    base_map_from_id,
    branch_preimages,
    check_hypotheses,
    check_torus_example,
    doubling_map,
    estimate_base_rate,
    linear_full_branch,
    perron_frobenius,
    perturbed_doubling,
)
from skewlab.errors import InvalidInputError

from oracles import iterate_density_oracle


# ------------------------------------------------------- branch preimages


def test_doubling_preimages_of_half():
    pairs = branch_preimages(doubling_map(), 0.5)
    assert [p for p, _ in pairs] == pytest.approx([0.25, 0.75], abs=1e-12)
    assert [w for _, w in pairs] == pytest.approx([0.5, 0.5], abs=1e-15)


def test_linear_slopes_weights_are_reciprocal_slopes():
    f = linear_full_branch([3.0, 1.5])
    for gamma in [0.0, 0.3, 0.77]:
        weights = [w for _, w in branch_preimages(f, gamma)]
        assert weights == pytest.approx([1 / 3, 2 / 3], abs=1e-15)
        for x, _ in branch_preimages(f, gamma):
            assert abs(f.apply(x) - gamma) < 1e-10


def test_perturbed_map_preimages_at_zero():
    a = 0.3
    f = perturbed_doubling(a)
    pairs = branch_preimages(f, 0.0)
    xs = [x for x, _ in pairs]
    assert xs == pytest.approx([0.0, 0.5], abs=1e-9)
    raw = np.array([1 / (2 + a), 1 / (2 - a)])
    expected = raw / raw.sum()
    assert [w for _, w in pairs] == pytest.approx(list(expected), abs=1e-9)


def test_preimages_roundtrip_on_random_points():
    f = perturbed_doubling(0.4)
    rng = np.random.default_rng(1)
    for gamma in rng.random(32):
        for x, _ in branch_preimages(f, float(gamma)):
            assert abs(f.apply(x) - gamma) < 1e-10


# ------------------------------------------------------- transfer on grid


def test_doubling_preserves_constant_density():
    f = doubling_map()
    phi = GridDensity(np.ones(512))
    out = perron_frobenius(f, phi)
    assert np.max(np.abs(out.values - 1.0)) <= 1e-12


def test_doubling_annihilates_first_harmonic():
    f = doubling_map()
    phi = GridDensity.from_function(lambda x: np.cos(2 * np.pi * x), 512)
    out = perron_frobenius(f, phi)
    assert np.max(np.abs(out.values)) <= 1e-6


def test_slopes_map_preserves_constant_density():
    f = linear_full_branch([3.0, 1.5])
    out = perron_frobenius(f, GridDensity(np.ones(512)))
    assert np.max(np.abs(out.values - 1.0)) <= 1e-12


def test_positivity_preserved(rng):
    f = linear_full_branch([3.0, 1.5])
    phi = GridDensity(rng.random(256))
    out = perron_frobenius(f, phi)
    assert np.all(out.values >= 0.0)


def test_integral_preserved_exactly_on_doubling():
    f = doubling_map()
    phi = GridDensity.from_function(lambda x: 1.0 + 0.4 * np.sin(2 * np.pi * x) ** 2, 512)
    out = perron_frobenius(f, phi)
    assert abs(out.integral() - phi.integral()) <= 1e-6


def test_integral_drift_on_non_dyadic_map_stays_small():
    # cell-center lookup quantizes the branch of slope 3/2 into alternating
    # multiplicities, so preservation is only O(1/N) here
    f = linear_full_branch([3.0, 1.5])
    phi = GridDensity.from_function(lambda x: 1.0 + 0.3 * np.cos(2 * np.pi * x), 512)
    out = perron_frobenius(f, phi)
    assert abs(out.integral() - phi.integral()) <= 2e-3


def test_repeated_transfer_matches_composed_map():
    # three doubling steps vs the 8-branch map x -> 8x, C reported
    n, steps = 512, 3
    f = doubling_map()
    g = linear_full_branch([8.0] * 8)
    phi = GridDensity.from_function(lambda x: np.sin(2 * np.pi * x) + 0.5, n)
    repeated = phi
    for _ in range(steps):
        repeated = perron_frobenius(f, repeated)
    direct = perron_frobenius(g, phi)
    diff = float(np.max(np.abs(repeated.values - direct.values)))
    c_measured = diff * n
    print(f"composition lookup constant C = {c_measured:.3f}")
    assert diff <= 32.0 / n


def test_perron_frobenius_matches_bruteforce_oracle(rng):
    f = linear_full_branch([3.0, 1.5])
    phi = rng.random(128)
    out = perron_frobenius(f, GridDensity(phi))
    expected = iterate_density_oracle(f, phi, 1)
    assert np.max(np.abs(out.values - expected)) <= 1e-12


# ------------------------------------------------------------- base rate


def test_doubling_contraction_rate_at_most_half_plus_margin():
    r_hat, d_hat = estimate_base_rate(doubling_map(), zeta=1.0, n_max=6, trials=5, seed=3)
    assert 0.0 < r_hat <= 0.55
    assert d_hat > 0.0


def test_slopes_map_rate_below_one():
    r_hat, _ = estimate_base_rate(
        linear_full_branch([3.0, 1.5]), zeta=1.0, n_max=6, trials=4, seed=5
    )
    assert r_hat < 1.0


# ------------------------------------------------------ hypothesis checks


def test_admissibility_reproduces_worked_value():
    value = admissibility_value(deg=2, q=1, sigma=2.0, L=1.05, eps_rho=0.01, exponent=1.0)
    assert value == pytest.approx(0.809, abs=1e-3)
    assert value < 1.0


def test_check_hypotheses_doubling_all_pass():
    params = SystemParams(zeta=1.0, alpha=0.5, L=1.0, sigma=2.0, q=0, eps_rho=0.0)
    report = check_hypotheses(doubling_map(), params)
    assert report.passed, report.as_text()


def test_check_hypotheses_f1_trivial_for_empty_region():
    for big_l in [1.0, 5.0, 100.0]:
        params = SystemParams(zeta=1.0, alpha=0.5, L=big_l, sigma=2.0, q=0, eps_rho=0.0)
        report = check_hypotheses(doubling_map(), params)
        entry = next(c for c in report.conditions if c.name == "f1_region_bound")
        assert entry.passed


def test_fiber_regularity_product_fails_when_expected():
    params = SystemParams(zeta=1.0, alpha=0.9, L=2.0, sigma=2.0, q=0, eps_rho=0.0)
    report = check_hypotheses(doubling_map(), params)
    entry = next(c for c in report.conditions if c.name == "fiber_regularity_product")
    assert not entry.passed
    assert entry.measured == pytest.approx(1.8, abs=1e-12)


def test_check_hypotheses_reports_both_exponent_modes():
    params = SystemParams(zeta=1.0, alpha=0.25, L=1.05, sigma=2.0, q=1, eps_rho=0.01)
    report = check_hypotheses(doubling_map(), params)
    assert "admissibility_use_zeta" in report.extras
    assert "admissibility_use_alpha" in report.extras
    assert report.extras["admissibility_use_zeta"] == pytest.approx(0.809, abs=1e-3)


def test_perturbed_map_satisfies_jacobian_regularity_for_small_a():
    params = SystemParams(zeta=1.0, alpha=0.5, L=1.0, sigma=1.5, q=0, eps_rho=0.35)
    report = check_hypotheses(perturbed_doubling(0.1), params)
    log_ratio = next(c for c in report.conditions if c.name == "f3_log_ratio")
    # log((2.1)/(1.9)) is the exact oscillation of log rho
    assert log_ratio.measured == pytest.approx(math.log(2.1 / 1.9), abs=1e-4)
    assert log_ratio.passed


# ---------------------------------------------------------- torus checker


def test_torus_example_near_constant_jacobian_passes_everything():
    report = check_torus_example(a=1e-4, r=0.1, lam=2.0, zeta=1.0, grid=128)
    assert report.passed, report.as_text()


def test_torus_example_reference_case_passes():
    report = check_torus_example(a=0.05, r=0.1, lam=2.0, zeta=1.0, grid=256)
    assert report.passed, report.as_text()
    names = [c.name for c in report.conditions]
    assert {"log_ratio", "holder_scaled", "admissibility"} <= set(names)


def test_torus_example_large_a_fails_log_ratio():
    report = check_torus_example(a=0.9, r=0.1, lam=2.0, zeta=1.0, grid=256)
    entry = next(c for c in report.conditions if c.name == "log_ratio")
    assert not entry.passed
    assert entry.measured == pytest.approx(math.log(1.9 / 0.1), rel=0.05)


def test_torus_example_rejects_coarse_grid():
    with pytest.raises(InvalidInputError):
        check_torus_example(a=0.05, r=0.1, lam=2.0, zeta=1.0, grid=30)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        SystemParams(zeta=0.0)
    with pytest.raises(InvalidInputError):
        SystemParams(alpha=1.0)
    with pytest.raises(InvalidInputError):
        SystemParams(sigma=1.0)
    with pytest.raises(InvalidInputError):
        SystemParams(eps_rho=-0.1)
