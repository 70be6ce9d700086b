import math
from fractions import Fraction

import numpy as np
import pytest

from densemodel.errors import ChainViolation, DegreeCapExceeded, InvalidParameter, SandwichViolation
from densemodel.steppoly import (
    build_step_polynomial,
    compose_and_separate,
    from_coefficients,
    polynomial_from_definition,
    verify_step_polynomial,
)

ALPHA, BETA = 1 / 3, 1 / 12


@pytest.fixture(scope="module")
def mid_poly():
    return build_step_polynomial(0.5, ALPHA, BETA)


def test_endpoint_values(mid_poly):
    assert mid_poly.exact(1.0) >= 1 - Fraction(BETA)
    assert mid_poly.exact(-1.0) <= Fraction(BETA)
    assert mid_poly.exact(-1.0) == 0 and mid_poly.exact(1.0) == 1


def test_mid_band_polynomial(mid_poly):
    assert mid_poly.degree <= 300
    rep = verify_step_polynomial(mid_poly, 10**5)
    assert rep.passed and rep.guaranteed
    assert rep.monotone_violation <= 1e-12


@pytest.mark.parametrize("method", ["concentrated", "binomial"])
def test_stable_form_matches_exact_expansion(method, rng):
    p = build_step_polynomial(0.2, 0.5, 0.1, method=method)
    for z in rng.uniform(-1, 1, 200):
        assert abs(float(p(z)) - float(p.exact(float(z)))) <= 1e-6


def test_coefficient_bound(mid_poly):
    assert mid_poly.log10_coeff_bound <= mid_poly.degree * math.log10(8)
    assert mid_poly.coeff_bound == pytest.approx(max(abs(float(c)) for c in mid_poly.coeffs), rel=1e-9)


def test_degree_scaling():
    d1 = build_step_polynomial(0.0, 0.4, 0.05).degree
    d2 = build_step_polynomial(0.0, 0.2, 0.05).degree
    assert d2 <= 8 * d1


def test_rebuild_from_definition_is_exact(mid_poly):
    again = polynomial_from_definition(mid_poly.definition, mid_poly.t, ALPHA, BETA)
    assert again.numerators == mid_poly.numerators and again.denominator == mid_poly.denominator


def test_binomial_construction():
    p = build_step_polynomial(0.5, ALPHA, BETA, method="binomial")
    assert p.definition["method"] == "binomial"
    assert verify_step_polynomial(p).passed
    assert p.degree == p.definition["N"]


def test_verification_rejects_bad_polynomials():
    half = from_coefficients([Fraction(1, 2)], 0.0, 0.5, 0.1)
    rep = verify_step_polynomial(half, 1000)
    assert rep.high_violation > 0 and not rep.passed
    # the identity on y = (1 + z)/2 leaks on both sides of the band
    linear = from_coefficients([Fraction(1, 2), Fraction(1, 2)], 0.0, 0.5, 0.1)
    rep = verify_step_polynomial(linear, 1000)
    assert rep.low_violation > 0 and rep.high_violation > 0 and not rep.passed
    # the identity on z instead goes negative and misses the top side
    ident = from_coefficients([0, 1], 0.0, 0.5, 0.1)
    rep = verify_step_polynomial(ident, 1000)
    assert rep.range_violation > 0 and rep.high_violation > 0 and not rep.passed
    with pytest.raises(InvalidParameter):
        verify_step_polynomial(ident, 999)


def test_parameter_validation():
    with pytest.raises(InvalidParameter):
        build_step_polynomial(0.5, 0.0, 0.1)
    with pytest.raises(InvalidParameter):
        build_step_polynomial(-0.9, 0.2, 0.1)
    with pytest.raises(DegreeCapExceeded):
        build_step_polynomial(0.0, 0.05, 0.01, max_degree=16)


def test_extreme_thresholds():
    for t in (-1 + ALPHA, 1.0):
        p = build_step_polynomial(t, ALPHA, BETA)
        assert verify_step_polynomial(p).passed


def test_compose_and_separate(mid_poly, rng):
    eps = 1.0 - 1e-12  # alpha = eps/3, beta = eps/12 up to tolerance
    fbar = rng.uniform(-1, 1, 40)
    with pytest.raises(ChainViolation):
        compose_and_separate(mid_poly, fbar, np.ones(40), eps)
    nu = np.where(fbar >= 0.5, 2.0, 0.0)
    nu *= 1 / max(nu.mean(), 1e-12)
    nu = np.minimum(nu, 40.0)
    nu /= max(1.0, nu.mean())
    sep = compose_and_separate(mid_poly, fbar, nu, eps)
    assert sep == pytest.approx(np.dot(nu - 1, mid_poly(fbar)) / 40)
    with pytest.raises(InvalidParameter):
        compose_and_separate(mid_poly, fbar, nu, 0.5)


def test_sandwich_violation_detected(rng):
    bad = from_coefficients([0, 1], 0.5, ALPHA, BETA)
    fbar = rng.uniform(-1, 1, 40)
    with pytest.raises(SandwichViolation):
        compose_and_separate(bad, fbar, np.ones(40), 1.0 - 1e-12)
