from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate

from dlshrink.rngdist import InvalidParameterError, RngStream, erfc_scaled
from dlshrink.verify import (
    dickey_rhs,
    dirichlet_rhs,
    erfc_lower_bound,
    erfc_upper_bound,
    incomplete_gamma_lhs,
    incomplete_gamma_xi,
    reports_to_json,
    run_verification_suite,
    verify_anderson,
    verify_dickey_equal_weights,
    verify_dickey_homogeneity,
    verify_dickey_integral,
    verify_dirichlet_formula,
    verify_erfc_bounds,
    verify_incomplete_gamma_bound,
    verify_incomplete_gamma_identity,
    verify_wg_marginal,
    verify_xi_rate,
)

# --- simplex identities -------------------------------------------------------


@pytest.mark.parametrize("n,h,exact", [
    (2, "constant", math.pi),
    (3, "reciprocal_shift", 2 * math.pi * (2 - math.pi / 2)),
    (4, "linear", math.pi ** 2 / 3),
])
def test_dirichlet_formula_closed_forms(n, h, exact):
    r = verify_dirichlet_formula(n, h, n_points=400_000, rng=RngStream(1, n))
    assert r.rhs == pytest.approx(exact, rel=1e-9)
    assert r.passed
    assert abs(r.lhs - exact) <= 4 * r.details["mc_standard_error"] + 1e-12


def test_dirichlet_formula_inverse_power_with_unit_alpha():
    r = verify_dirichlet_formula(6, "inverse_power", np.ones(6), 400_000, RngStream(2))
    assert r.passed


def test_dirichlet_formula_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        verify_dirichlet_formula(7)
    with pytest.raises(InvalidParameterError):
        verify_dirichlet_formula(3, "cosine")
    with pytest.raises(InvalidParameterError):
        dirichlet_rhs(lambda t: np.ones_like(t), [0.1], power=-1.5)


def test_dickey_integral_example():
    q = np.array([1.0, 2.0, 3.0, 4.0])
    r = verify_dickey_integral(4, 1.0, q, 400_000, RngStream(3))
    assert r.passed
    assert abs(r.lhs - r.rhs) < 4 * r.details["mc_standard_error"]


def test_dickey_against_direct_quadrature_n3():
    # n = 3: the simplex integral in two coordinates after integrating out the third analytically
    q0, q = 0.8, np.array([0.5, 1.5, 2.5])

    def inner(x1, x2):
        def f(x3):
            return (x1 * x2 * x3) ** -0.5 * (q0 + q @ [x1, x2, x3]) ** -0.5
        return integrate.quad(f, 0, 1 - x1 - x2, limit=100)[0]

    # substitute x = s^2 to remove the endpoint singularities
    val = integrate.dblquad(lambda s2, s1: 4 * s1 * s2 * inner(s1 * s1, s2 * s2), 0, 1, 0,
                            lambda s1: math.sqrt(1 - s1 * s1), epsabs=1e-9, epsrel=1e-7)[0]
    assert dickey_rhs(q0, q) == pytest.approx(val, rel=1e-5)


def test_dickey_equal_weights_and_homogeneity():
    assert verify_dickey_equal_weights(4, 1.5).passed
    assert verify_dickey_equal_weights(5, 0.3).passed
    r = verify_dickey_homogeneity(4, 1.0, np.array([1.0, 2.0, 3.0, 4.0]), 3.7)
    assert r.passed and abs(r.lhs / r.rhs - 1) < 1e-10


# --- scaled erfc ----------------------------------------------------------------


def test_erfc_values_and_upper_bound():
    assert erfc_scaled(1.0) == pytest.approx(0.7578721561413121, rel=1e-12)
    assert erfc_scaled(2.0) == pytest.approx(0.5959060788258648, rel=1e-12)
    assert erfc_scaled(1.0) <= erfc_upper_bound(1.0)
    assert erfc_upper_bound(0.0) == pytest.approx(math.sqrt(math.pi))


def test_erfc_lower_bound_fails_for_moderate_x():
    # the claimed bound sqrt(pi) e^x erfc(sqrt x) >= x^(-(1+delta)/2) on x >= 2 is false near x = 2
    assert erfc_scaled(2.0) < erfc_lower_bound(2.0, 0.1)
    reports = {r.name: r for r in verify_erfc_bounds()}
    assert reports["erfc_upper_bound"].passed
    assert reports["erfc_boundary_at_zero"].passed
    low = reports["erfc_lower_bound[delta=0.1]"]
    assert not low.passed
    assert 2.0 <= low.details["largest_violating_x"] < 5.0


def test_erfc_lower_bound_holds_eventually():
    for delta in (0.1, 0.01):
        xs = np.geomspace(1e3, 1e4, 20)
        assert all(erfc_scaled(float(x)) >= erfc_lower_bound(float(x), delta) for x in xs)


def test_erfc_grid_validation():
    with pytest.raises(InvalidParameterError):
        verify_erfc_bounds([0.0, 1.0])


# --- incomplete gamma -----------------------------------------------------------


def test_incomplete_gamma_quadrature_matches_closed_form():
    for n, a in [(10, 1.0), (50, 0.1), (200, 200 / (2 * math.e))]:
        r = verify_incomplete_gamma_bound(n, a)
        assert r.lhs == pytest.approx(r.details["closed_form_log_lhs"], abs=1e-9)
        assert r.passed


def test_incomplete_gamma_identity_and_perturbation():
    assert verify_incomplete_gamma_identity(10, 1.0).passed
    assert not verify_incomplete_gamma_identity(10, 1.0, rhs_scale=1.1).passed


def test_incomplete_gamma_direct_value():
    n, a = 10, 1.0
    direct = integrate.quad(lambda t: t ** (-n / 2) * math.exp(-a / (2 * t)), 0, 1, epsabs=0, epsrel=1e-12)[0]
    assert incomplete_gamma_lhs(n, a) == pytest.approx(math.log(direct), abs=1e-10)


def test_incomplete_gamma_boundary_and_validation():
    n = 20
    assert verify_incomplete_gamma_bound(n, n / (2 * math.e)).passed
    with pytest.raises(InvalidParameterError):
        verify_incomplete_gamma_bound(n, n / (2 * math.e) * 1.01)
    with pytest.raises(InvalidParameterError):
        verify_incomplete_gamma_bound(4, 0.5)


def test_xi_rate_constant():
    r = verify_xi_rate()
    assert r.passed and r.rhs == pytest.approx(math.e / math.sqrt(math.pi))
    # the product e * sqrt(pi) would be far too loose to be the sharp constant
    assert r.lhs < math.e / math.sqrt(math.pi) < math.e * math.sqrt(math.pi)
    assert 0 < incomplete_gamma_xi(10) < incomplete_gamma_xi(100) < 1


# --- wrapped gamma marginal -----------------------------------------------------


def test_wg_marginal_reports():
    reports = verify_wg_marginal(10, 1.0, 10_000, RngStream(4))
    assert len(reports) == 3 and all(r.passed for r in reports)


# --- shifted Gaussian ball ---------------------------------------------------------


def test_anderson_centered_is_equality():
    r = verify_anderson(4, 1.3, np.zeros(4), 2.0)
    assert r.lhs == pytest.approx(r.rhs, abs=1e-12) and r.passed


def test_anderson_stated_upper_fails_corrected_holds():
    theta0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    stated = verify_anderson(5, 1.0, theta0, 3.0, "stated", n_mc=50_000, rng=RngStream(5))
    assert stated.details["lower_holds"] and not stated.details["upper_holds"]
    assert not stated.passed
    assert abs(stated.details["mc_middle"] - math.exp(stated.lhs)) < 0.01
    assert verify_anderson(5, 1.0, theta0, 3.0, "corrected", n_mc=1000).passed


def test_anderson_shifted_probability_decreases_with_shift():
    vals = [verify_anderson(3, 1.0, np.array([s, 0.0, 0.0]), 2.0, "corrected", n_mc=10).lhs
            for s in (0.0, 0.5, 1.0, 2.0)]
    assert vals == sorted(vals, reverse=True)


def test_anderson_validation():
    with pytest.raises(InvalidParameterError):
        verify_anderson(3, 1.0, np.zeros(3), 1.0, "tight")
    with pytest.raises(InvalidParameterError):
        verify_anderson(3, -1.0, np.zeros(3), 1.0)


# --- suite ------------------------------------------------------------------------


EXPECTED_RED = {
    "erfc_lower_bound[delta=0.1]", "erfc_lower_bound[delta=0.01]", "erfc_lower_bound[delta=0.0101]",
}


@pytest.fixture(scope="module")
def suite():
    return run_verification_suite(n_points=200_000)


def test_suite_reds_are_exactly_the_false_claims(suite):
    failed = {r.name for r in suite if not r.passed}
    stated = {r.name for r in suite if r.name.startswith("anderson_stated")}
    assert failed == EXPECTED_RED | stated
    assert all(r.passed for r in suite if r.name.startswith("anderson_corrected"))


def test_suite_is_deterministic(suite):
    again = run_verification_suite(n_points=200_000)
    assert reports_to_json(suite) == reports_to_json(again)


@pytest.mark.parametrize("target", ["dirichlet_formula", "dickey_integral", "incomplete_gamma"])
def test_perturbation_is_detected(suite, target):
    perturbed = run_verification_suite(n_points=200_000, perturb=target)
    prefix = {"dirichlet_formula": "dirichlet_formula", "dickey_integral": "dickey_integral",
              "incomplete_gamma": "incomplete_gamma_identity"}[target]
    hit = [r for r in perturbed if r.name.startswith(prefix)]
    assert hit and not any(r.passed for r in hit)
    assert all(r.passed for r in suite if r.name.startswith(prefix))
    with pytest.raises(InvalidParameterError):
        run_verification_suite(n_points=10, perturb="erfc")


def test_json_schema(suite):
    body = json.loads(reports_to_json(suite, seed=20240101))
    assert body["seed"] == 20240101 and body["all_passed"] is False
    keys = {"name", "lhs", "rhs", "tolerance", "passed", "relation", "methods", "details"}
    assert all(set(c) == keys for c in body["checks"])
    assert all(c["relation"] in ("eq", "le", "ge") for c in body["checks"])


def test_log_space_stays_finite_at_large_n():
    r = verify_incomplete_gamma_bound(500, 0.1)
    assert math.isfinite(r.lhs) and math.isfinite(r.rhs) and r.passed
    big = verify_anderson(500, 1.0, np.full(500, 0.5), 10.0, "corrected", n_mc=10)
    assert math.isfinite(big.lhs) and big.lhs < -50
