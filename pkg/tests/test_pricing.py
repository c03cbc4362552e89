import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from igbm.couplings import CouplingSpec
from igbm.curves import loglog_slope
from igbm.errors import ParameterError
from igbm.meanfield import SolverControl, solve_fixed_point, ubar_branch
from igbm.model import FixedKappa, GammaKappa, ModelParams
from igbm.pricing import (AVERAGED, PricingContext, interacting_pricing_pdf, market_pricing_pdf,
                          noninteracting_pricing_pdf_closed, noninteracting_pricing_pdf_quadrature,
                          pricing_coefficients)

SI = math.sqrt(0.1)
UNIT = SI / 0.2  # sigma_I / kappa0


def params(**kw):
    cs = kw.pop("coupling_spec", CouplingSpec(J0=0.5, J=0.5, alpha=0.5))
    return ModelParams(coupling_spec=cs, **kw)


P = params()


def moments(x, d):
    mass = np.trapezoid(d, x)
    mean = np.trapezoid(x * d, x) / mass
    var = np.trapezoid((x - mean) ** 2 * d, x) / mass
    skew = np.trapezoid((x - mean) ** 3 * d, x) / mass / var**1.5
    return mass, mean, var, skew


def test_coefficients():
    c = pricing_coefficients(2.0, P, 0.5)
    assert c.beta == pytest.approx((0.2 * 2.0 / SI) ** 2)
    assert c.pricing_gamma == pytest.approx(1 - 0.2 * 2.0 * 0.5 / 0.1)
    zero = pricing_coefficients(0.0, P, 0.5)
    assert zero.beta == 0.0 and zero.pricing_gamma == 1.0


def test_closed_form_even_without_field():
    x = np.linspace(0.1, 50, 40) * UNIT
    d = noninteracting_pricing_pdf_closed(np.concatenate([-x[::-1], x]), P, 0.0).density
    assert np.allclose(d[:40][::-1], d[40:], rtol=1e-12)


@settings(max_examples=20)
@given(st.floats(-3.0, 3.0))
def test_closed_form_reflection(u0):
    # flipping the field flips the law
    x = np.linspace(0.05, 20, 9) * UNIT
    a = noninteracting_pricing_pdf_closed(x, P, u0).density
    b = noninteracting_pricing_pdf_closed(-x[::-1], P, -u0).density[::-1]
    assert np.allclose(a, b, rtol=1e-10)


@pytest.mark.parametrize("nu", [0.5, 1.0, 2.0])
def test_closed_form_matches_quadrature(nu):
    p = P.replace(kappa_dist=GammaKappa(0.2, nu))
    x = np.linspace(-50, 50, 41) * UNIT
    c = noninteracting_pricing_pdf_closed(x, p, 1.0).density
    q = noninteracting_pricing_pdf_quadrature(x, p, 1.0).density
    assert np.max(np.abs(c - q)) < 1e-6


def test_point_check_against_direct_integral():
    p = P.replace(sigma0=0.1)
    u = UNIT
    closed = noninteracting_pricing_pdf_closed([u], p, 1.0).density[0]
    quad = noninteracting_pricing_pdf_quadrature([u], p, 1.0).density[0]

    # a third route: plain adaptive quadrature over the exponential law
    def f(k):
        return math.exp(-k / 0.2) / 0.2 * k / math.sqrt(2 * math.pi * 0.1) * math.exp(-(k * u - 0.1) ** 2 / 0.2)

    direct, _ = integrate.quad(f, 0, math.inf, epsabs=1e-14, epsrel=1e-12)
    assert closed == pytest.approx(direct, abs=1e-9)
    assert quad == pytest.approx(direct, abs=1e-9)


@pytest.mark.parametrize("nu", [1.0, 2.0])
def test_tail_slope(nu):
    p = P.replace(kappa_dist=GammaKappa(0.2, nu))
    x = np.geomspace(20, 200, 30) * UNIT
    assert loglog_slope(x, noninteracting_pricing_pdf_closed(x, p, 1.0).density) == pytest.approx(-(1 + nu), abs=0.1)


def test_value_at_zero_is_continuous():
    for u0 in (0.0, 1.0):
        d = noninteracting_pricing_pdf_closed([-1e-6, 0.0, 1e-6], P, u0).density
        assert d[1] == pytest.approx(0.5 * (d[0] + d[2]), rel=1e-5)


def test_fixed_rate_is_normal():
    p = P.replace(kappa_dist=FixedKappa(0.2))
    x = np.linspace(-20, 20, 801)
    d = noninteracting_pricing_pdf_quadrature(x, p, 1.0).density
    assert x[np.argmax(d)] == pytest.approx(1.0 / 0.2, abs=0.05)
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-6)


def test_rate_averaged_law_normalised():
    p = P.replace(kappa_dist=GammaKappa(0.2, 2.0))
    half = np.geomspace(1e-6, 1e5, 3000) * UNIT
    x = np.concatenate([-half[::-1], [0.0], half])
    d = noninteracting_pricing_pdf_closed(x, p, 1.0).density
    assert np.trapezoid(d, x) == pytest.approx(1.0, abs=1e-4)


def test_closed_form_rejects_bad_inputs():
    with pytest.raises(ParameterError):
        noninteracting_pricing_pdf_closed([0.0], P.replace(kappa_dist=FixedKappa(0.2)), 0.0)
    with pytest.raises(ParameterError):
        noninteracting_pricing_pdf_closed([0.0], P.replace(sigma_I2=0.0), 0.0)


@pytest.fixture(scope="module")
def fixed_rate_op():
    op = solve_fixed_point(P, 1.0)
    return op


def test_context_validation(fixed_rate_op):
    with pytest.raises(ParameterError):
        PricingContext(P, 0.5, fixed_rate_op)
    with pytest.raises(ParameterError):
        PricingContext(P, 1.0, fixed_rate_op, kappa=-1.0)
    with pytest.raises(ParameterError):
        interacting_pricing_pdf([0.0], PricingContext(P, 1.0, fixed_rate_op, AVERAGED))
    with pytest.raises(ParameterError):
        interacting_pricing_pdf([0.0], PricingContext(P, 1.0, None, 0.2))


def test_no_reaction_term_gives_exact_normal():
    p = P.with_couplings(alpha=0.0)
    op = solve_fixed_point(p, 1.0)
    x = np.linspace(-40, 50, 901)
    d = interacting_pricing_pdf(x, PricingContext(p, 1.0, op, 0.2)).density
    mean = (0.5 * op.m + 1.0) / 0.2
    sd = math.sqrt(0.1 + 0.25 * op.q) / 0.2
    ref = np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    assert np.allclose(d, ref, rtol=1e-9, atol=1e-15)


def test_interactions_broaden_and_skew(fixed_rate_op):
    x = np.linspace(-250, 250, 20001) * SI
    inter = interacting_pricing_pdf(x, PricingContext(P, 1.0, fixed_rate_op, 0.2))
    free = noninteracting_pricing_pdf_quadrature(x, P.replace(kappa_dist=FixedKappa(0.2)), 1.0)
    mi, _, vi, si = moments(x, inter.density)
    mf, _, vf, sf = moments(x, free.density)
    assert mi == pytest.approx(1.0, abs=1e-3) and mf == pytest.approx(1.0, abs=1e-6)
    assert vi > vf
    assert abs(si) > abs(sf)
    assert inter.meta["norm_factor"] == pytest.approx(1.0, abs=1e-6)


def test_typical_prices_suppressed(fixed_rate_op):
    mode = 1.0 / 0.2  # non-interacting mode (I0 + sigma0 u0)/kappa
    x = np.linspace(-80, 80, 1601)
    inter = interacting_pricing_pdf(x, PricingContext(P, 1.0, fixed_rate_op, 0.2)).density
    free = noninteracting_pricing_pdf_quadrature(x, P.replace(kappa_dist=FixedKappa(0.2)), 1.0).density
    i = int(np.argmin(np.abs(x - mode)))
    assert x[i] == mode and inter[i] < free[i]


@pytest.fixture(scope="module")
def strong():
    p = P.with_couplings(J=1.0, alpha=1.0)
    return p, solve_fixed_point(p, 1.0)


def test_gap_is_empty_and_reported(strong):
    p, op = strong
    x = np.linspace(-80, 80, 16001)
    c = interacting_pricing_pdf(x, PricingContext(p, 1.0, op, 0.2))
    lo, hi = c.meta["gap"]
    inside = (x > lo) & (x < hi)
    assert inside.any() and np.all(c.density[inside] == 0.0)
    assert np.all(c.density[~inside] >= 0.0)
    assert c.meta["norm_factor"] == pytest.approx(1.0, abs=1e-6)
    assert np.trapezoid(c.density, x) == pytest.approx(1.0, abs=1e-3)


def test_gap_law_matches_sampled_branch_rule(strong):
    # second route: draw the frozen noise and solve for the selected branch
    p, op = strong
    z = np.random.default_rng(3).standard_normal(200_000)
    ub = ubar_branch(0.2, z, op, p, 1.0)
    x = np.linspace(-80, 80, 32001)
    d = interacting_pricing_pdf(x, PricingContext(p, 1.0, op, 0.2)).density
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
    for c in (-10.0, -2.0, 0.0, 5.0, 15.0):
        assert np.interp(c, x, cdf) == pytest.approx(np.mean(ub <= c), abs=5e-3)


def test_symmetric_at_zero_field():
    op = solve_fixed_point(P, 0.0, ctrl=SolverControl(init=None))
    assert abs(op.m) < 1e-8
    x = np.linspace(0.1, 60, 50)
    d = interacting_pricing_pdf(np.concatenate([-x[::-1], x]), PricingContext(P, 0.0, op, 0.2)).density
    assert np.allclose(d[:50][::-1], d[50:], rtol=1e-8, atol=1e-14)


def test_market_without_interactions_matches_closed_form():
    x = np.linspace(-50, 50, 21) * UNIT
    p = P.replace(sigma0=0.0)
    m = market_pricing_pdf(x, PricingContext(p, 0.0)).density
    assert np.allclose(m, noninteracting_pricing_pdf_closed(x, p, 0.0).density, rtol=1e-14)


def test_market_rate_rule_against_closed_form():
    # with all couplings off the interacting average must reproduce the closed form
    p = P.with_couplings(J0=0.0, J=0.0, alpha=0.0)
    op = solve_fixed_point(p, 1.0)
    x = np.linspace(-20, 20, 41) * UNIT
    m = market_pricing_pdf(x, PricingContext(p, 1.0, op)).density
    c = noninteracting_pricing_pdf_closed(x, p, 1.0).density
    assert np.max(np.abs(m - c)) < 1e-5


def test_market_curve_unimodal_and_broader(fixed_rate_op):
    x = np.linspace(-50, 50, 801) * UNIT
    inter = market_pricing_pdf(x, PricingContext(P, 1.0, fixed_rate_op)).density
    free = noninteracting_pricing_pdf_closed(x, P, 1.0).density
    interior = (inter[1:-1] < inter[:-2]) & (inter[1:-1] < inter[2:])
    assert not interior.any()
    assert moments(x, inter)[2] > moments(x, free)[2]
