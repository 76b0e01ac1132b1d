import numpy as np
import pytest

from skewlab.errors import CapExceededError, InvariantViolationError
from skewlab.fiber_measure import (
    AtomicMeasure,
    FiberContraction,
    consolidate,
    consolidate_to_cap,
    dirac,
    push_contraction,
    w_distance,
    w_norm,
    zero_measure,
)

from conftest import random_probability_measure, random_signed_measure
from oracles import w_norm_flow_oracle, w_norm_vertex_oracle


def affine_contraction(alpha, c):
    return FiberContraction(lambda y, a=alpha, b=c: a * y + b, alpha)


# ---------------------------------------------------------------- w_norm


def test_w_norm_unit_point_mass_is_one():
    assert w_norm(dirac(0.3), zeta=1.0) == pytest.approx(1.0, abs=1e-9)
    assert w_norm(dirac(0.3), zeta=0.5) == pytest.approx(1.0, abs=1e-9)


def test_w_norm_zero_measure_is_zero():
    assert w_norm(zero_measure(), zeta=1.0) == 0.0


def test_w_norm_dipole_snowflake_exponent():
    # expected 0.25^0.5 = 0.5; frozen from the vertex oracle
    mu = AtomicMeasure(np.array([0.0, 0.25]), np.array([1.0, -1.0]))
    expected = w_norm_vertex_oracle(mu.positions, mu.weights, 0.5)
    assert expected == pytest.approx(0.5, abs=1e-12)
    assert w_norm(mu, zeta=0.5) == pytest.approx(expected, abs=1e-9)


def test_w_distance_identity():
    mu = AtomicMeasure(np.array([0.1, 0.6]), np.array([0.4, 0.6]))
    assert w_distance(mu, mu, zeta=1.0) == pytest.approx(0.0, abs=1e-12)


def test_w_distance_point_masses():
    assert w_distance(dirac(0.2), dirac(0.7), zeta=1.0) == pytest.approx(0.5, abs=1e-9)


def test_w_distance_split_mass():
    mu = AtomicMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    nu = dirac(0.5)
    expected = w_norm_flow_oracle([0.0, 1.0, 0.5], [0.5, 0.5, -1.0], 1.0)
    assert expected == pytest.approx(0.5, abs=1e-9)
    assert w_distance(mu, nu, zeta=1.0) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("zeta", [0.5, 1.0])
def test_w_norm_matches_vertex_oracle_small_supports(rng, zeta):
    for _ in range(200):
        n = rng.integers(1, 4)
        mu = random_signed_measure(rng, int(n))
        assert w_norm(mu, zeta) == pytest.approx(
            w_norm_vertex_oracle(mu.positions, mu.weights, zeta), abs=1e-9
        )


@pytest.mark.parametrize("zeta", [0.5, 1.0])
def test_w_norm_matches_flow_oracle_medium_supports(rng, zeta):
    for _ in range(100):
        n = rng.integers(2, 13)
        mu = random_signed_measure(rng, int(n))
        assert w_norm(mu, zeta) == pytest.approx(
            w_norm_flow_oracle(mu.positions, mu.weights, zeta), abs=1e-8
        )


def test_w_norm_probability_measures_have_norm_one(rng):
    for _ in range(100):
        mu = random_probability_measure(rng, int(rng.integers(1, 20)))
        assert w_norm(mu, zeta=1.0) == pytest.approx(1.0, abs=1e-9)


def test_w_norm_homogeneity(rng):
    for _ in range(50):
        mu = random_signed_measure(rng, 6)
        a = float(rng.normal())
        assert w_norm(mu.scaled(a), 0.7) == pytest.approx(abs(a) * w_norm(mu, 0.7), abs=1e-9)


def test_w_distance_triangle_inequality(rng):
    for _ in range(50):
        mu = random_signed_measure(rng, 5)
        nu = random_signed_measure(rng, 5)
        rho = random_signed_measure(rng, 5)
        assert w_distance(mu, nu, 1.0) <= (
            w_distance(mu, rho, 1.0) + w_distance(rho, nu, 1.0) + 1e-9
        )


def test_w_norm_chain_reduction_matches_all_pairs(rng):
    # zeta=1 production path keeps only adjacent constraints; the flow
    # oracle carries every arc, so agreement validates the reduction
    for _ in range(50):
        mu = random_signed_measure(rng, 10)
        assert w_norm(mu, 1.0) == pytest.approx(
            w_norm_flow_oracle(mu.positions, mu.weights, 1.0), abs=1e-8
        )


# ------------------------------------------------------- push_contraction


def test_push_contraction_halving_dipole_attains_bound():
    mu = AtomicMeasure(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
    pushed = push_contraction(mu, affine_contraction(0.5, 0.0))
    assert np.allclose(pushed.positions, [0.0, 0.5])
    assert w_norm(mu, 1.0) == pytest.approx(1.0, abs=1e-9)
    assert w_norm(pushed, 1.0) == pytest.approx(0.5, abs=1e-9)


def test_push_contraction_constant_map_collapses():
    mu = random_probability_measure(np.random.default_rng(0), 8)
    pushed = push_contraction(mu, FiberContraction(lambda y: np.full_like(y, 0.37), 0.01))
    assert len(pushed) == 1
    assert pushed.positions[0] == 0.37
    assert pushed.mass() == pytest.approx(1.0, abs=1e-12)


def test_push_contraction_mass_preserved(rng):
    mu = random_signed_measure(rng, 12)
    pushed = push_contraction(mu, affine_contraction(0.3, 0.2))
    assert pushed.mass() == pytest.approx(mu.mass(), abs=1e-12)


def test_push_contraction_rejects_escape():
    mu = dirac(1.0)
    bad = FiberContraction(lambda y: 0.5 * y + 0.75, 0.5)
    with pytest.raises(InvariantViolationError):
        push_contraction(mu, bad)


def test_fiber_contraction_requires_alpha_below_one():
    from skewlab.errors import InvalidInputError

    with pytest.raises(InvalidInputError):
        FiberContraction(lambda y: y, 1.0)


@pytest.mark.parametrize("alpha,zeta", [(0.3, 0.5), (0.3, 1.0), (0.5, 1.0), (0.9, 0.5)])
def test_zero_mass_pushforward_contracts(rng, alpha, zeta):
    # exact form: w(push) <= alpha^zeta * w(input) for zero-mass measures
    for _ in range(100):
        mu = random_signed_measure(rng, int(rng.integers(2, 16)), zero_mass=True)
        c = float(rng.random() * (1 - alpha))
        pushed = push_contraction(mu, affine_contraction(alpha, c))
        assert w_norm(pushed, zeta) <= alpha**zeta * w_norm(mu, zeta) + 1e-9


def test_any_signed_pushforward_never_gains_norm(rng):
    for _ in range(100):
        mu = random_signed_measure(rng, int(rng.integers(1, 12)))
        alpha = float(rng.uniform(0.05, 0.95))
        c = float(rng.random() * (1 - alpha))
        pushed = push_contraction(mu, affine_contraction(alpha, c))
        assert w_norm(pushed, 1.0) <= w_norm(mu, 1.0) + 1e-9


# ------------------------------------------------------------ consolidate


def test_consolidate_merges_duplicate_cluster():
    mu = AtomicMeasure(np.array([0.50, 0.5001]), np.array([0.5, 0.5]))
    result = consolidate(mu, radius=0.001, cap=1)
    assert len(result.measure) == 1
    assert result.measure.positions[0] == pytest.approx(0.50005, abs=1e-12)
    assert result.measure.weights[0] == pytest.approx(1.0, abs=1e-15)


def test_consolidate_noop_under_cap(rng):
    mu = random_signed_measure(rng, 5)
    result = consolidate(mu, radius=0.1, cap=8)
    assert np.array_equal(result.measure.positions, mu.positions)
    assert result.w_error == 0.0


def test_consolidate_mass_exact(rng):
    mu = random_signed_measure(rng, 64)
    result = consolidate_to_cap(mu, cap=16)
    assert result.measure.mass() == pytest.approx(mu.mass(), abs=1e-12)
    assert len(result.measure) <= 16


def test_consolidate_cap_exceeded_when_radius_too_small():
    mu = AtomicMeasure(np.linspace(0, 1, 9), np.ones(9))
    with pytest.raises(CapExceededError):
        consolidate(mu, radius=1e-6, cap=4)


def test_consolidate_w_perturbation_within_reported_bound(rng):
    for _ in range(20):
        mu = random_probability_measure(rng, 128)
        result = consolidate_to_cap(mu, cap=32)
        moved = w_distance(mu, result.measure, 1.0)
        assert moved <= result.w_error + 1e-9
        # and the spec-level bound: total moved mass times radius^zeta
        assert moved <= result.radius * mu.total_variation() + 1e-9


def test_consolidate_opposite_sign_cancellation():
    mu = AtomicMeasure(
        np.array([0.1, 0.1001, 0.5, 0.5001]), np.array([1.0, -1.0, 0.5, -0.25])
    )
    result = consolidate(mu, radius=0.01, cap=1)
    assert len(result.measure) == 1
    assert result.measure.mass() == pytest.approx(0.25, abs=1e-12)


def test_consolidated_measure_close_in_w_distance(rng):
    mu = random_probability_measure(rng, 128)
    result = consolidate_to_cap(mu, cap=32)
    assert w_distance(mu, result.measure, 1.0) <= result.radius**1.0 * 1.0 + 1e-9
