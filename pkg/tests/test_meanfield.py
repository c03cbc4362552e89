import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, special

from igbm.couplings import CouplingSpec
from igbm.errors import ConvergenceError, ParameterError
from igbm.meanfield import (DEFAULT_GRID, OrderParameters, SolverControl, ThetaGrid, ferro_stability, gap_condition,
                            noninteracting_solution, pair_correlation, pair_correlation_gh, phase_scan,
                            rhs_order_parameters, rho_u, sigma_u2, solve_fixed_point, solve_ubar, u0_curve,
                            ubar_branch)
from igbm.model import FixedKappa, GammaKappa, ModelParams
from igbm.numerics import gaussian_rule

FIG = ModelParams(coupling_spec=CouplingSpec(J0=0.5, J=0.5, alpha=0.5))


@pytest.fixture(scope="module")
def ferro_solution():
    p = FIG.with_couplings(J0=0.8)
    start = replace(noninteracting_solution(p, 0.0), m=0.1)
    return p, solve_fixed_point(p, 0.0, ctrl=SolverControl(init=start))


def test_sigma_u2_examples():
    assert sigma_u2(0.2, 0.0, 0.1, 0.5) == pytest.approx(0.025)
    assert sigma_u2(0.3, 0.4, 0.0, 0.0) == 0.0
    assert sigma_u2(0.5, 0.2, 0.1, 0.5) == pytest.approx(0.06)


def test_rho_u_examples():
    assert rho_u(0.0, 0.3, 0.1, 0.1, 0.5) == pytest.approx(1.0)
    assert rho_u(2.0, 0.3, 0.1, 0.1, 0.0) == pytest.approx(math.exp(-0.6))
    assert rho_u(1e6, 0.3, 0.04, 0.1, 0.5) == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        rho_u(1.0, 0.3, 0.0, 0.0, 0.5)


def _oracle_params(alpha=0.5, sigma_I2=0.1225):
    return ModelParams(coupling_spec=CouplingSpec(J0=0.5, J=0.5, alpha=alpha), sigma=0.1, sigma_I2=sigma_I2)


def test_solve_ubar_linear_without_reaction():
    p = _oracle_params(alpha=0.0)
    op = OrderParameters(m=0.3, q=0.2, chi=0.7, Chat0=0.01, u0=0.4)
    roots = solve_ubar(0.8, 0.25, op, p)
    expect = (0.5 * 0.3 + math.sqrt(0.1225 + 0.25 * 0.2) * 0.8 + 1.0 * 0.4) / 0.25
    assert len(roots) == 1 and roots[0][1] == "stable"
    assert roots[0][0] == pytest.approx(expect, rel=1e-12)


def test_solve_ubar_symmetric_three_roots():
    p = _oracle_params()
    op = OrderParameters(m=0.0, q=0.0, chi=2.0, Chat0=0.0, u0=0.0)
    assert gap_condition(0.2, op, p) > 1
    roots = solve_ubar(0.0, 0.2, op, p)
    assert [r[1] for r in roots] == ["stable", "unstable", "stable"]
    lo, mid, hi = (r[0] for r in roots)
    assert mid == pytest.approx(0.0, abs=1e-12) and lo == pytest.approx(-hi, rel=1e-12)
    s = math.sqrt(1 + 2 * 0.025)
    assert hi == pytest.approx(0.25 / 0.2 * math.erf(hi / s), rel=1e-12)


def test_solve_ubar_bisection_oracle():
    p = _oracle_params()
    op = OrderParameters(m=0.0, q=0.0, chi=0.4, Chat0=0.0, u0=0.0)
    s = math.sqrt(1.05)
    f = lambda u: 0.2 * u - 0.05 * math.erf(u / s) - 0.35 * 0.5
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    roots = solve_ubar(0.5, 0.2, op, p)
    assert len(roots) == 1
    assert roots[0][0] == pytest.approx(0.5 * (lo + hi), abs=1e-12)


@given(st.floats(-4, 4), st.floats(0.05, 2.0), st.floats(0.0, 3.0))
def test_branch_rule_picks_a_stable_root(z, kappa, chi):
    p = _oracle_params()
    op = OrderParameters(m=0.1, q=0.3, chi=chi, Chat0=0.005, u0=0.2)
    roots = solve_ubar(z, kappa, op, p)
    u = float(ubar_branch(kappa, z, op, p, 0.2))
    stable = [r for r, tag in roots if tag == "stable"]
    assert min(abs(u - r) for r in stable) < 1e-9 * (1 + abs(u))
    A = 0.5 * 0.1 + 1.0 * 0.2
    if len(stable) == 2:
        assert (u < 0) == (A + math.sqrt(0.1225 + 0.25 * 0.3) * z < 0)


@given(st.floats(-3, 3), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_pair_correlation_closed_form_matches_reference(ubar, s2, r):
    assert pair_correlation(ubar, s2, r) == pytest.approx(float(pair_correlation_gh(ubar, s2, r, 128)), abs=1e-9)


def test_pair_correlation_equal_times():
    x, w = gaussian_rule(200)
    for ubar, s2 in ((0.0, 0.3), (0.7, 0.025), (-1.2, 1.5)):
        direct = w @ special.erf(ubar + math.sqrt(s2) * x) ** 2
        assert pair_correlation(ubar, s2, 1.0) == pytest.approx(direct, abs=1e-12)


def test_rhs_at_symmetric_zero_point():
    p = ModelParams(coupling_spec=CouplingSpec(J0=0.5, J=0.5, alpha=0.7), sigma_I2=0.0, kappa_dist=FixedKappa(0.2))
    out = rhs_order_parameters(OrderParameters(0.0, 0.0, 0.0, 0.0), DEFAULT_GRID, p, 0.0)
    assert abs(out.m) < 1e-12 and abs(out.q) < 1e-12
    # without frozen noise the response is the linear gain of the single member
    assert out.chi == pytest.approx(2 / (math.sqrt(math.pi * 1.05) * 0.2), rel=1e-12)


def test_solve_noninteracting_symmetric_point():
    p = ModelParams(coupling_spec=CouplingSpec(J0=0.0, J=0.0), sigma_I2=0.0)
    op = solve_fixed_point(p, 0.0)
    assert abs(op.m) < 1e-12 and abs(op.q) < 1e-12
    kappa, w = DEFAULT_GRID.kappa_rule(p)
    s = np.sqrt(1 + 0.01 / kappa)
    assert op.chi == pytest.approx(np.sum(w * 2 / (math.sqrt(math.pi) * s * kappa)), rel=1e-10)


def test_magnetisation_is_odd_in_u0():
    for u0 in (0.3, 1.0):
        a = solve_fixed_point(FIG, u0)
        b = solve_fixed_point(FIG, -u0)
        assert a.m == pytest.approx(-b.m, abs=1e-9)
        assert a.q == pytest.approx(b.q, abs=1e-9)


def test_scan_point_is_ferromagnetic(ferro_solution):
    _, op = ferro_solution
    assert op.m > 0.3


def test_fixed_point_invariants(ferro_solution):
    p, op = ferro_solution
    again = rhs_order_parameters(op, DEFAULT_GRID, p, 0.0, with_qtau=False)
    assert np.max(np.abs(again.vector() - op.vector())) < 10 * SolverControl().tol
    assert -1 <= op.m <= 1 and 0 <= op.q <= 1 and op.chi >= 0 and op.Chat0 >= 0
    assert np.all(np.diff(op.q_tau) <= 1e-9)
    assert op.q_tau[0] >= op.q_tau[-1] >= op.q - 1e-9
    # plateau reached well before tau_max
    half = np.searchsorted(op.tau, op.tau[-1] / 2)
    assert abs(op.q_tau[half] - op.q_tau[-1]) < 1e-6
    chat = 2 * np.trapezoid(op.q_tau - op.q, op.tau)
    assert chat == pytest.approx(op.Chat0, rel=1e-3)


def test_zero_field_sign_symmetry(ferro_solution):
    p, op = ferro_solution
    flipped = rhs_order_parameters(op.flipped(), DEFAULT_GRID, p, 0.0, with_qtau=False)
    np.testing.assert_allclose(flipped.vector(), op.flipped().vector(), atol=1e-9)


def test_ferro_gain_equals_J0_times_symmetric_chi():
    p = FIG.with_couplings(J0=0.6)
    gain, sym = ferro_stability(p)
    assert gain == pytest.approx(0.6 * sym.chi, rel=1e-5)


def test_symmetric_solution_does_not_depend_on_J0():
    a = ferro_stability(FIG.with_couplings(J0=0.2))[1]
    b = ferro_stability(FIG.with_couplings(J0=0.9))[1]
    np.testing.assert_allclose(a.vector(), b.vector(), atol=1e-9)


def test_pure_ferromagnet_boundary():
    p = ModelParams(coupling_spec=CouplingSpec(J0=0.1, J=0.0, alpha=0.5), sigma_I2=0.0, kappa_dist=FixedKappa(0.2))
    s2 = 1 + 2 * 0.01 / (2 * 0.2)
    exact = optimize.brentq(lambda j: j * 2 / math.sqrt(math.pi * s2) / 0.2 - 1, 0.01, 1.0, xtol=1e-14)
    scan = phase_scan(p, "J0", [0.1, 0.15, 0.2, 0.25, 0.3])
    assert scan.boundary == pytest.approx(exact, abs=2e-4)
    assert all(pt.converged for pt in scan.points)
    assert all(abs(pt.m) < 1e-3 for pt in scan.points if pt.axis_value < exact)
    assert all(pt.m > 1e-3 for pt in scan.points if pt.axis_value > exact)


def test_phase_scan_requires_zero_field():
    with pytest.raises(ParameterError):
        phase_scan(FIG.replace(I0=0.1), "J0", [0.5])


def test_chi_nonnegative_on_scan():
    scan = phase_scan(FIG, "J0", [0.5, 0.9, 1.0])
    assert all(pt.chi >= 0 for pt in scan.points if pt.converged)


def test_non_convergence_is_reported():
    with pytest.raises(ConvergenceError) as info:
        solve_fixed_point(FIG, 1.0, ctrl=SolverControl(max_iter=2))
    assert "residual" in info.value.diagnostics


def test_u0_curve_is_worker_independent():
    grid = ThetaGrid(n_kappa=16, n_branch=24, n_tau=50)
    a = u0_curve(FIG, [0.0, 0.5, 1.0], grid, workers=1)
    b = u0_curve(FIG, [0.0, 0.5, 1.0], grid, workers=2)
    assert [o.vector().tolist() for o in a] == [o.vector().tolist() for o in b]
    assert a[0].m == pytest.approx(0.0, abs=1e-12) and 0 < a[1].m < a[2].m


def test_kappa_rule_respects_floor():
    nodes, w = DEFAULT_GRID.kappa_rule(FIG)
    assert np.all(nodes >= FIG.kappa_dist.kappa_min) and w.sum() == pytest.approx(1.0, abs=1e-10)
