import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fptexp import (Generator, alpha_of, build_killed, check_exponentiality, decay_rate,
                    is_qsd, mu_ladder, quasi_stationary, survival_curve, yaglom_correction)
from fptexp.errors import ConvergenceError, ValidationError
from fptexp.exponentiality import default_grid, perron_left, qsd_residual

from conftest import QSD_A, make_chain_a, random_chain, random_law
from oracles import dense_qsd, rational_ladder

Q_E_A = [[-1.5, 1.0], [2.0, -2.5]]


def test_alpha_of_point_mass(kg_c):
    assert alpha_of(kg_c, [1.0, 0.0]) == 1.0
    assert alpha_of(kg_c, [0.0, 1.0]) == 0.0


def test_alpha_of_constant_killing(kg_a, rng):
    for _ in range(5):
        assert abs(alpha_of(kg_a, random_law(rng, 2)) - 0.5) < 1e-15


def test_alpha_of_mixture(kg_c):
    assert abs(alpha_of(kg_c, [0.3, 0.7]) - 0.3) < 1e-15


def test_is_qsd_chain_a(kg_a):
    vec, _ = dense_qsd(Q_E_A)
    np.testing.assert_allclose(vec, QSD_A[:2], atol=1e-14)
    ok, res, alpha = is_qsd(kg_a, QSD_A)
    assert ok and res < 1e-12 and alpha == 0.5


def test_is_qsd_rejects_half_half(kg_a):
    ok, res, _ = is_qsd(kg_a, [0.5, 0.5])
    assert not ok
    assert abs(res - 0.5) < 1e-15


def test_is_qsd_rejects_cemetery_mass(kg_a):
    with pytest.raises(ValidationError):
        is_qsd(kg_a, [0.5, 0.4, 0.1])


def test_is_qsd_bad_tol(kg_a):
    with pytest.raises(ValidationError):
        is_qsd(kg_a, QSD_A, tol=0.0)


def test_qsd_residual_rational(kg_a):
    # (0.5, 0.5) Q_E = (0.25, -0.75); adding 0.5 mu gives (0.5, -0.5)
    np.testing.assert_allclose(qsd_residual(kg_a, [0.5, 0.5]), [0.5, -0.5, 0.0], atol=1e-15)


def test_check_exponentiality_half_half(kg_a):
    rep = check_exponentiality(kg_a, [0.5, 0.5], grid=[0.5, 1, 2, 4], tol=1e-9)
    assert rep.exponential
    assert rep.alpha == 0.5
    assert rep.max_abs_dev < 1e-10
    assert rep.high_confidence


def test_check_exponentiality_qsd(kg_a):
    assert check_exponentiality(kg_a, QSD_A).exponential


def test_check_exponentiality_chain_c(kg_c):
    rep = check_exponentiality(kg_c, [0.0, 1.0], grid=[0.5], tol=1e-9)
    assert rep.verdict == "not_exponential"
    assert rep.reason == "zero killing rate under mu"


def test_check_exponentiality_chain_c_mixture(kg_c):
    rep = check_exponentiality(kg_c, [0.5, 0.5], grid=[0.5, 1.0])
    assert not rep.exponential
    assert rep.max_abs_dev > 1e-2


def test_check_exponentiality_empty_grid(kg_a):
    with pytest.raises(ValidationError):
        check_exponentiality(kg_a, QSD_A, grid=[])


def test_low_confidence_grid_flagged(kg_a):
    rep = check_exponentiality(kg_a, QSD_A, grid=[0.01, 0.02])
    assert rep.exponential and not rep.high_confidence
    assert rep.reason


def test_default_grid_span():
    g = default_grid(0.5)
    assert len(g) == 32
    assert abs(0.5 * g[0] - 0.05) < 1e-15 and abs(0.5 * g[-1] - 5.0) < 1e-12


def test_report_dict(kg_a):
    d = check_exponentiality(kg_a, QSD_A, grid=[1.0]).to_dict()
    assert {"alpha", "max_abs_dev", "verdict", "grid"} <= set(d)


def test_ladder_qsd_fixed_point(kg_a):
    lad = mu_ladder(kg_a, QSD_A, 5)
    assert lad.terminated_reason == "converged"
    assert lad.valid_up_to == 1
    np.testing.assert_allclose(lad.levels[0], QSD_A, atol=1e-14)


def test_ladder_negativity_after_one(kg_a):
    lad = mu_ladder(kg_a, [0.7, 0.3], 5)
    ref = rational_ladder(Q_E_A, ["0.7", "0.3"], "0.5", 2)
    assert [float(x) for x in ref[0]] == pytest.approx([0.9, 0.1], abs=0)
    assert [float(x) for x in ref[1]] == pytest.approx([2.3, -1.3], abs=1e-15)
    assert lad.valid_up_to == 1
    assert lad.terminated_reason == "negativity"
    np.testing.assert_allclose(lad.levels[0][:2], [0.9, 0.1], atol=1e-14)
    np.testing.assert_allclose(lad.rejected[:2], [2.3, -1.3], atol=1e-13)


def test_ladder_negativity_immediately(kg_a):
    lad = mu_ladder(kg_a, [0.5, 0.5], 3)
    assert lad.valid_up_to == 0 and lad.terminated_reason == "negativity"
    np.testing.assert_allclose(lad.rejected[:2], [-0.5, 1.5], atol=1e-14)


def test_ladder_zero_alpha(kg_c):
    with pytest.raises(ValidationError):
        mu_ladder(kg_c, [0.0, 1.0], 2)


def test_ladder_requested_n():
    # constant killing and a single transient state: every level is the point mass
    kg = build_killed(Generator.from_triples(["0", "1"], ["0"], [("1", "0", 2.0)]))
    lad = mu_ladder(kg, [1.0], 3)
    assert lad.terminated_reason == "converged" and lad.valid_up_to == 1


def test_decay_rate_single_state():
    kg = build_killed(Generator.from_triples(["0", "1"], ["0"], [("1", "0", 0.37)]))
    assert abs(decay_rate(kg) - 0.37) < 1e-15


def test_decay_rate_chain_a(kg_a):
    ev = np.linalg.eigvals(np.array(Q_E_A))
    np.testing.assert_allclose(sorted(ev), [-3.5, -0.5], atol=1e-14)
    assert abs(decay_rate(kg_a) - 0.5) < 1e-12


def test_decay_rate_emergence():
    lumped = Generator.from_triples(["1", "2", "3"], ["1"],
                                    [("2", "1", 1.0), ("3", "1", 2.0), ("2", "3", 0.5), ("3", "2", 0.5)])
    assert abs(decay_rate(build_killed(lumped)) - (2 - math.sqrt(2) / 2)) < 1e-12


def test_decay_rate_random_against_eig(rng):
    for _ in range(20):
        kg = build_killed(random_chain(rng))
        vec, rate = dense_qsd(kg.q_transient.toarray())
        pr = quasi_stationary(kg)
        assert abs(pr.alpha - rate) < 1e-10
        np.testing.assert_allclose(pr.vector[:-1], vec, atol=1e-9)


def test_perron_reducible():
    with pytest.raises(ValidationError, match="reducible"):
        perron_left(np.array([[-1.0, 1.0], [0.0, -1.0]]))


def test_perron_iteration_cap():
    with pytest.raises(ConvergenceError, match="did not converge"):
        perron_left(np.array([[-1.0, 0.5, 0.1], [0.2, -1.0, 0.3], [0.9, 0.05, -2.0]]), max_iter=2)


def test_yaglom_of_qsd_is_identity(kg_a):
    np.testing.assert_array_equal(yaglom_correction(kg_a, QSD_A), QSD_A)


@pytest.mark.parametrize("mu", [[0.5, 0.5], [0.7, 0.3], [1.0, 0.0]])
def test_yaglom_chain_a(kg_a, mu):
    pi = yaglom_correction(kg_a, mu)
    np.testing.assert_allclose(pi, QSD_A, atol=1e-6)


def test_yaglom_requires_exponential(kg_c):
    with pytest.raises(ValidationError, match="not exponential"):
        yaglom_correction(kg_c, [0.5, 0.5])


def test_yaglom_no_quasi_limit(kg_c):
    # alpha = 1 exceeds the decay rate (3 - sqrt 5) / 2, so the weighted integrand grows
    with pytest.raises(ConvergenceError, match="no quasi-limit"):
        yaglom_correction(kg_c, [1.0, 0.0], horizon=1.0, verify=False)


def _regression_rate(kg, mu, grid):
    s = survival_curve(kg, mu, grid)
    slope = np.polyfit(grid, np.log(s), 1)[0]
    return -slope


def test_rate_consistency(rng):
    for _ in range(20):
        kg = build_killed(random_chain(rng, eta_const=rng.uniform(0.2, 2.0)))
        mu = random_law(rng, kg.m)
        rep = check_exponentiality(kg, mu, tol=1e-9)
        assert rep.exponential
        assert abs(rep.alpha - _regression_rate(kg, mu, np.array(rep.grid))) < 1e-6


def test_qsd_implies_exponential(rng):
    for _ in range(20):
        kg = build_killed(random_chain(rng))
        mu = quasi_stationary(kg).vector
        assert is_qsd(kg, mu, 1e-10).is_qsd
        for grid in ([0.1, 1.0, 7.0], np.linspace(0.01, 3, 11)):
            assert check_exponentiality(kg, mu, grid=grid, tol=1e-8).exponential


def test_alpha_of_qsd_is_decay_rate(rng):
    for _ in range(20):
        kg = build_killed(random_chain(rng))
        pr = quasi_stationary(kg)
        assert abs(alpha_of(kg, pr.vector) - decay_rate(kg)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ladder_levels_stay_exponential(seed):
    rng = np.random.default_rng(seed)
    kg = build_killed(random_chain(rng, eta_const=rng.uniform(0.2, 2.0)))
    mu = random_law(rng, kg.m)
    lad = mu_ladder(kg, mu, 6)
    assert lad.valid_up_to <= 6
    for level in lad.levels:
        assert abs(level.sum() - 1) < 1e-9 and (level >= 0).all()
        rep = check_exponentiality(kg, level, tol=1e-9)
        assert rep.exponential and abs(rep.alpha - lad.alpha) < 1e-12
    if lad.terminated_reason == "converged":
        assert is_qsd(kg, lad.levels[-1], 1e-8).is_qsd


def test_ladder_converges_to_qsd():
    # a chain whose ladder contracts: constant killing, fast mixing
    kg = build_killed(make_chain_a())
    lad = mu_ladder(kg, [0.66, 0.34], 200)
    assert lad.terminated_reason in ("converged", "negativity")
    if lad.terminated_reason == "converged":
        assert is_qsd(kg, lad.levels[-1], 1e-8).is_qsd


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_yaglom_output_is_qsd(seed):
    rng = np.random.default_rng(seed)
    kg = build_killed(random_chain(rng, n_states=int(rng.integers(3, 6)), eta_const=1.0))
    mu = random_law(rng, kg.m)
    pi = yaglom_correction(kg, mu)
    assert is_qsd(kg, pi, 1e-6).is_qsd
