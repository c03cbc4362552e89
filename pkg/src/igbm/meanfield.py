"""Quasi-stationary mean-field theory: self-consistent order parameters at a
fixed value of the slow factor, and phase scans built on them.

Averages over the frozen noise ``z`` are done in the long-term-mean variable
``ubar`` (the transformation is monotone on each stable branch), which also
takes care of the forbidden ``ubar`` interval when the self-consistency
equation for ``ubar`` has three roots.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import ConsistencyError, ConvergenceError, NumericalError, ParameterError
from .model import ModelParams
from .numerics import find_root_bracketed, gaussian_rule

log = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
TWO_OVER_SQRT_PI = 2.0 / SQRT_PI


@dataclass(frozen=True)
class OrderParameters:
    m: float
    q: float
    chi: float
    Chat0: float
    u0: float = 0.0
    tau: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    q_tau: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    iterations: int = 0
    residual: float = math.nan

    def vector(self) -> np.ndarray:
        return np.array([self.m, self.q, self.chi, self.Chat0])

    def flipped(self) -> "OrderParameters":
        """Image under the global sign flip ``u -> -u``."""
        return replace(self, m=-self.m, u0=-self.u0)


@dataclass(frozen=True)
class ThetaGrid:
    """Discretisation of the single-site parameter ensemble.

    ``n_branch`` Gauss-Legendre nodes in ``ubar`` per stable branch replace
    the frozen-noise average; ``z_cut`` truncates the frozen noise at
    ``|z| <= z_cut``. ``n_y`` nodes integrate the non-persistent correlation
    over ``y = exp(-kappa tau)``; ``n_x`` is the fast-noise rule of the
    reference pair average.
    """

    n_kappa: int = 48
    n_branch: int = 64
    n_y: int = 24
    n_x: int = 64
    n_tau: int = 400
    z_cut: float = 10.0

    def kappa_rule(self, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        nodes, weights = params.kappa_dist.rule(self.n_kappa)
        if abs(weights.sum() - 1.0) > 1e-10 or np.any(nodes < params.kappa_dist.kappa_min):
            raise ConsistencyError("kappa rule violates its floor or normalisation")
        return nodes, weights

    def tau_grid(self, kappa_nodes: np.ndarray) -> np.ndarray:
        # geometric spacing: the fastest and slowest relaxations differ by orders of magnitude
        tau_max = 20.0 / kappa_nodes.min()
        tau_s = 0.01 / kappa_nodes.max()
        k = np.arange(self.n_tau)
        return tau_s * np.expm1(k * math.log1p(tau_max / tau_s) / (self.n_tau - 1))


DEFAULT_GRID = ThetaGrid()


def sigma_u2(kappa, Chat0, sigma, J):
    """Equal-time variance of a single-site log-price around its mean."""
    return (sigma * sigma + J * J * Chat0) / (2.0 * np.asarray(kappa, dtype=float))


def rho_u(tau, kappa, Chat0, sigma, J):
    """Normalised autocorrelation of a single-site log-price at lag ``tau``."""
    den = sigma * sigma + J * J * Chat0
    if not den > 0:
        raise ParameterError("rho_u undefined when sigma**2 + J**2 * Chat0 == 0")
    return (sigma * sigma * np.exp(-np.asarray(kappa) * np.abs(tau)) + J * J * Chat0) / den


def _fields(op: OrderParameters, params: ModelParams, u0: float):
    """Constant, frozen-noise and reaction coefficients of the ubar equation."""
    A = params.J0 * op.m + params.I0 + params.sigma0 * u0
    B2 = params.sigma_I2 + params.J**2 * op.q
    C = params.alpha * params.J**2 * op.chi
    return A, math.sqrt(max(B2, 0.0)), C


def _bracketed_newton(f, df, target, lo, hi, tol=1e-13, max_iter=200):
    """Vectorised root of monotone increasing ``f = target`` inside ``[lo, hi]``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x) - target
        below = fx < 0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - fx / d
        ok = (d > 0) & (newton > lo) & (newton < hi)
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        done = np.abs(x_new - x) <= tol * (1.0 + np.abs(x))
        x = x_new
        if np.all(done | (hi - lo <= tol * (1.0 + np.abs(x)))):
            return x
    raise NumericalError("vectorised root solve did not converge", worst=float(np.max(hi - lo)))


def _positive_branch_root(kappa, C, s):
    """Positive root of ``kappa u = C erf(u/s)`` (zero where no gap exists)."""
    kappa, C, s = np.broadcast_arrays(np.asarray(kappa, float), float(C), np.asarray(s, float))
    ratio = C * TWO_OVER_SQRT_PI / (kappa * s)
    gap = ratio > 1.0
    out = np.zeros(kappa.shape)
    if not gap.any():
        return out, gap
    k, c, ss = kappa[gap], C[gap], s[gap]
    u_c = ss * np.sqrt(np.log(ratio[gap]))
    f = lambda u: k * u - c * special.erf(u / ss)
    df = lambda u: k - c * TWO_OVER_SQRT_PI / ss * np.exp(-(u / ss) ** 2)
    # f is increasing above u_c, negative at u_c and non-negative at C/kappa
    out[gap] = _bracketed_newton(f, df, 0.0, u_c, np.maximum(c / k, u_c))
    return out, gap


def gap_condition(kappa, op: OrderParameters, params: ModelParams):
    """Left side of the jump criterion; the ubar law has a gap where it exceeds 1."""
    s = np.sqrt(1.0 + 2.0 * sigma_u2(kappa, op.Chat0, params.sigma, params.J))
    return 2.0 * params.alpha * params.J**2 * op.chi / (np.asarray(kappa) * s * SQRT_PI)


def solve_ubar(z: float, kappa: float, op: OrderParameters, params: ModelParams, u0: float = None):
    """All real roots of the single-site mean equation, tagged by stability.

    Returns a list of ``(ubar, "stable" | "unstable")`` sorted by ``ubar``;
    a root is stable where ``dz/dubar > 0``.
    """
    if not kappa > 0:
        raise ParameterError("kappa must be positive")
    u0 = op.u0 if u0 is None else u0
    A, B, C = _fields(op, params, u0)
    s = math.sqrt(1.0 + 2.0 * float(sigma_u2(kappa, op.Chat0, params.sigma, params.J)))
    rhs = A + B * z

    def g(u):
        return kappa * u - C * math.erf(u / s) - rhs

    def dz(u):
        return kappa - C * TWO_OVER_SQRT_PI / s * math.exp(-((u / s) ** 2))

    span = (abs(rhs) + abs(C)) / kappa + 1.0
    lo, hi = -span, span
    # split the search interval at the turning points of g
    cuts = [lo, hi]
    ratio = C * TWO_OVER_SQRT_PI / (kappa * s)
    if ratio > 1.0:
        u_c = s * math.sqrt(math.log(ratio))
        cuts = [lo, -u_c, u_c, hi]
    roots = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ga, gb = g(a), g(b)
        if ga == 0.0:
            roots.append(a)
            continue
        if ga * gb > 0:
            continue
        try:
            roots.append(find_root_bracketed(g, a, b, 1e-14 * (1.0 + span)))
        except NumericalError as exc:
            raise NumericalError("ubar root bracketing failed", z=z, kappa=kappa) from exc
    if g(hi) == 0.0:
        roots.append(hi)
    roots = sorted(set(roots))
    if not roots:
        raise NumericalError("no ubar root found", z=z, kappa=kappa)
    return [(u, "stable" if dz(u) > 0 else "unstable") for u in roots]


def ubar_branch(kappa, z, op: OrderParameters, params: ModelParams, u0: float):
    """Long-term mean selected by the branch rule, broadcast over ``kappa`` and ``z``.

    Where three roots exist the lower branch is taken for
    ``A + B z < 0`` and the upper one otherwise, so the jump sits at
    ``z* = -A/B``.
    """
    kappa, z = np.broadcast_arrays(np.asarray(kappa, float), np.asarray(z, float))
    A, B, C = _fields(op, params, u0)
    s = np.sqrt(1.0 + 2.0 * sigma_u2(kappa, op.Chat0, params.sigma, params.J))
    t = A + B * z
    u_plus, _ = _positive_branch_root(kappa, C, s)
    neg = t < 0
    lo = np.where(neg, (t - abs(C)) / kappa - 1.0, u_plus)
    hi = np.where(neg, -u_plus, (t + abs(C)) / kappa + 1.0)
    f = lambda u: kappa * u - C * special.erf(u / s)
    df = lambda u: kappa - C * TWO_OVER_SQRT_PI / s * np.exp(-(u / s) ** 2)
    return _bracketed_newton(f, df, t, lo, hi)


@dataclass
class _Ensemble:
    """Nodes of the theta-average: one row per kappa node."""

    kappa: np.ndarray  # (K,)
    s2: np.ndarray  # (K,) 1 + 2 sigma_u^2
    ubar: np.ndarray  # (K, M)
    z: np.ndarray  # (K, M)
    weight: np.ndarray  # (K, M), includes kappa weights
    gap: np.ndarray  # (K,) bool
    u_plus: np.ndarray  # (K,)
    sig_u2: np.ndarray  # (K,)


def _branch_nodes(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)[:, None]
    return 0.5 * (hi + lo)[:, None] + half * x, half * w


def build_ensemble(op: OrderParameters, params: ModelParams, u0: float, grid: ThetaGrid = DEFAULT_GRID,
                   kappa_rule: Optional[tuple] = None) -> _Ensemble:
    """Place the theta-average nodes on the two stable ubar branches."""
    kappa, wk = grid.kappa_rule(params) if kappa_rule is None else kappa_rule
    A, B, C = _fields(op, params, u0)
    sig2 = sigma_u2(kappa, op.Chat0, params.sigma, params.J)
    s2 = 1.0 + 2.0 * sig2
    s = np.sqrt(s2)
    L = grid.z_cut
    n = grid.n_branch

    def h(u, k=kappa, ss=s):
        return k * u - C * special.erf(u / ss)

    if B == 0.0:
        # no frozen noise: one deterministic member per kappa; the sign of A selects the branch
        u_plus, gap = _positive_branch_root(kappa, C, s)
        target = np.full(kappa.shape, A)
        lo = np.where(A >= 0, u_plus, (A - abs(C)) / kappa - 1.0)
        hi = np.where(A >= 0, (A + abs(C)) / kappa + 1.0, -u_plus)
        ub = _bracketed_newton(lambda u: h(u), lambda u: kappa - C * TWO_OVER_SQRT_PI / s * np.exp(-(u / s) ** 2),
                               target, lo, hi)
        return _Ensemble(kappa, s2, ub[:, None], np.zeros((kappa.size, 1)), wk[:, None], gap, u_plus, sig2)

    u_plus, gap = _positive_branch_root(kappa, C, s)
    dh = lambda u: kappa - C * TWO_OVER_SQRT_PI / s * np.exp(-(u / s) ** 2)
    z_star = -A / B
    # outer ends of the branches, where z = -L and z = +L
    t_lo, t_hi = A - B * L, A + B * L
    u_lo = np.where(
        z_star > -L,
        _bracketed_newton(h, dh, t_lo, (t_lo - abs(C)) / kappa - 1.0, -u_plus),
        -u_plus,
    )
    u_hi = np.where(
        z_star < L,
        _bracketed_newton(h, dh, t_hi, u_plus, (t_hi + abs(C)) / kappa + 1.0),
        u_plus,
    )
    # inner ends: the jump at z*, or z = -+L when z* lies beyond the cut so
    # that no nodes are spent where the noise has no mass
    lo_end = np.where(
        z_star > L,
        _bracketed_newton(h, dh, t_hi, (t_hi - abs(C)) / kappa - 1.0, -u_plus),
        -u_plus,
    )
    hi_start = np.where(
        z_star < -L,
        _bracketed_newton(h, dh, t_lo, u_plus, (t_lo + abs(C)) / kappa + 1.0),
        u_plus,
    )
    lo_nodes, lo_w = _branch_nodes(u_lo, lo_end, n)
    hi_nodes, hi_w = _branch_nodes(hi_start, u_hi, n)
    ub = np.concatenate([lo_nodes, hi_nodes], axis=1)
    w = np.concatenate([lo_w, hi_w], axis=1)
    z = (h(ub, kappa[:, None], s[:, None]) - A) / B
    jac = (kappa[:, None] - C * TWO_OVER_SQRT_PI / s[:, None] * np.exp(-ub**2 / s2[:, None])) / B
    if np.any(jac < -1e-12 * (kappa.max() / B)):
        bad = np.unravel_index(np.argmin(jac), jac.shape)
        raise ConsistencyError("negative Jacobian on a stable branch", kappa=float(kappa[bad[0]]),
                               ubar=float(ub[bad]), jacobian=float(jac[bad]))
    dens = w * np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi) * np.maximum(jac, 0.0)
    # each rate row carries exactly the noise mass on |z| <= L
    mass = dens.sum(axis=1, keepdims=True)
    weight = wk[:, None] * dens * (math.erf(L / math.sqrt(2.0)) / np.where(mass > 0, mass, 1.0))
    return _Ensemble(kappa, s2, ub, z, weight, gap, u_plus, sig2)


def pair_correlation(ubar, sig_u2, r_rho):
    """``<erf(u(t)) erf(u(t'))>`` for a Gaussian ``u`` with mean ``ubar``,
    variance ``sig_u2`` and correlation ``r_rho`` between the two times.

    Closed form via Owen's T function; see :func:`pair_correlation_gh` for
    the one-dimensional Gauss-Hermite reference.
    """
    s2 = 1.0 + 2.0 * sig_u2
    h = math.sqrt(2.0) * ubar / np.sqrt(s2)
    r = 2.0 * sig_u2 * r_rho / s2
    a = np.sqrt(np.clip((1.0 - r) / (1.0 + r), 0.0, None))
    return 1.0 - 8.0 * special.owens_t(h, a)


def pair_correlation_gh(ubar, sig_u2, r_rho, n_x: int = 64):
    """Reference form with one remaining average over the fast noise ``x``."""
    x, wx = gaussian_rule(n_x)
    ubar, sig_u2, r_rho = np.broadcast_arrays(*(np.asarray(v, float) for v in (ubar, sig_u2, r_rho)))
    sig = np.sqrt(sig_u2)[..., None]
    ub = ubar[..., None]
    rho = r_rho[..., None]
    first = special.erf(ub + sig * x)
    second = special.erf((ub + rho * sig * x) / np.sqrt(1.0 + 2.0 * (1.0 - rho**2) * sig**2))
    return np.sum(wx * first * second, axis=-1)


def _rho_inf(Chat0, params):
    den = params.sigma**2 + params.J**2 * Chat0
    return (params.J**2 * Chat0 / den if den > 0 else 0.0), den


def _corr_at(ens: _Ensemble, rho):
    """Per-node pair correlation for per-kappa correlation ``rho`` (K, ...)."""
    rho = np.asarray(rho, float)
    extra = rho.ndim - 1
    ub = ens.ubar.reshape(ens.ubar.shape + (1,) * extra)
    sig = ens.sig_u2.reshape((-1, 1) + (1,) * extra)
    return pair_correlation(ub, sig, rho[:, None, ...] if rho.ndim else rho)


def rhs_order_parameters(op: OrderParameters, grid: ThetaGrid, params: ModelParams, u0: float,
                         with_qtau: bool = True, kappa_rule: Optional[tuple] = None) -> OrderParameters:
    """One application of the self-consistency map."""
    ens = build_ensemble(op, params, u0, grid, kappa_rule)
    A, B, C = _fields(op, params, u0)
    W = ens.weight
    m_theta = special.erf(ens.ubar / np.sqrt(ens.s2)[:, None])
    m_new = float(np.sum(W * m_theta))
    if B > 0.0:
        chi_new = float(np.sum(W * ens.z * m_theta)) / B
    else:
        # B -> 0 limit of the frozen-noise form (Gaussian integration by parts)
        gprime = TWO_OVER_SQRT_PI / np.sqrt(ens.s2)[:, None] * np.exp(-ens.ubar**2 / ens.s2[:, None])
        chi_new = float(np.sum(W * gprime / (ens.kappa[:, None] - C * gprime)))

    rho_inf, den = _rho_inf(op.Chat0, params)
    K = ens.kappa.size
    corr_inf = _corr_at(ens, np.full(K, rho_inf))
    q_new = float(np.sum(W * corr_inf))

    if den > 0:
        y, wy = np.polynomial.legendre.leggauss(grid.n_y)
        y = 0.5 * (y + 1.0)
        wy = 0.5 * wy
        rho_y = rho_inf + (1.0 - rho_inf) * y[None, :] * np.ones((K, 1))
        corr_y = _corr_at(ens, rho_y)  # (K, M, n_y)
        excess = np.sum(W[..., None] * (corr_y - corr_inf[..., None]), axis=1)  # (K, n_y)
        chat_new = float(2.0 * np.sum(np.sum(excess * wy / y, axis=1) / ens.kappa))
    else:
        chat_new = 0.0

    tau = q_tau = None
    if with_qtau:
        tau = grid.tau_grid(ens.kappa)
        if den > 0:
            rho_t = rho_inf + (1.0 - rho_inf) * np.exp(-np.outer(ens.kappa, tau))
        else:
            rho_t = np.zeros((K, tau.size))
        q_tau = np.zeros(tau.size)
        for k in range(K):  # keeps memory bounded at n_tau * M per kappa
            q_tau += np.sum(W[k][:, None] * pair_correlation(
                ens.ubar[k][:, None], ens.sig_u2[k], rho_t[k][None, :]), axis=0)
    return OrderParameters(m_new, q_new, chi_new, chat_new, u0=u0, tau=tau, q_tau=q_tau)


def noninteracting_solution(params: ModelParams, u0: float, grid: ThetaGrid = DEFAULT_GRID) -> OrderParameters:
    """Order parameters of the same ensemble with all couplings switched off."""
    free = params.with_couplings(J0=0.0, J=0.0)
    return rhs_order_parameters(OrderParameters(0.0, 0.0, 0.0, 0.0, u0=u0), grid, free, u0, with_qtau=False)


@dataclass(frozen=True)
class SolverControl:
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 5000
    init: Optional[OrderParameters] = None
    symmetric: bool = False  # pin m = 0 (zero-field symmetric subspace)

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must lie in (0, 1]")
        if not self.tol > 0 or self.max_iter < 1:
            raise ParameterError("tol must be positive and max_iter >= 1")


def _oscillating(history: Sequence[np.ndarray]) -> bool:
    if len(history) < 20:
        return False
    steps = np.array(history[-20:])
    # follow the component that moves most; round-off jitter elsewhere is not oscillation
    lead = steps[:, int(np.argmax(np.mean(np.abs(steps), axis=0)))]
    flips = np.sign(lead[1:]) * np.sign(lead[:-1]) < 0
    size = np.abs(lead)
    # alternating updates that are not shrinking
    return bool(np.mean(flips) > 0.8 and size[-1] > 0.5 * size[0])


def solve_fixed_point(params: ModelParams, u0: float = 0.0, grid: ThetaGrid = DEFAULT_GRID,
                      ctrl: SolverControl = SolverControl()) -> OrderParameters:
    """Damped fixed-point iteration of the self-consistency map."""
    kr = grid.kappa_rule(params)
    if ctrl.init is None:
        op = noninteracting_solution(params, u0, grid)
    else:
        op = ctrl.init
    x = op.vector()
    if ctrl.symmetric:
        x[0] = 0.0
    lam = ctrl.damping
    steps, res = [], math.inf
    for it in range(1, ctrl.max_iter + 1):
        cur = OrderParameters(*x, u0=u0)
        new = rhs_order_parameters(cur, grid, params, u0, with_qtau=False, kappa_rule=kr).vector()
        if ctrl.symmetric:
            new[0] = 0.0
        if not np.all(np.isfinite(new)):
            raise ConvergenceError("order parameters became non-finite", iteration=it, last=x.tolist())
        step = new - x
        res = float(np.max(np.abs(step)))
        if res < ctrl.tol:
            x = new
            break
        steps.append(step)
        if _oscillating(steps):
            raise ConvergenceError("fixed-point iteration oscillates", iteration=it, residual=res,
                                   suggested_damping=lam / 2, last=x.tolist())
        x = x + lam * step
        x[1] = min(max(x[1], 0.0), 1.0)
    else:
        raise ConvergenceError("fixed-point iteration exceeded max_iter", iteration=ctrl.max_iter,
                               residual=res, last=x.tolist())
    final = rhs_order_parameters(OrderParameters(*x, u0=u0), grid, params, u0, with_qtau=True, kappa_rule=kr)
    return replace(OrderParameters(*x, u0=u0), tau=final.tau, q_tau=final.q_tau, iterations=it, residual=res)


def ferro_stability(params: ModelParams, grid: ThetaGrid = DEFAULT_GRID, ctrl: SolverControl = SolverControl(),
                    delta: float = 1e-6) -> tuple[float, OrderParameters]:
    """Linear gain ``d m_new / d m`` of the symmetric (``m = 0``) zero-field solution.

    The ferromagnetic onset is where the gain crosses 1.
    """
    sym = solve_fixed_point(params, 0.0, grid, replace(ctrl, symmetric=True, init=ctrl.init))
    kr = grid.kappa_rule(params)
    up = rhs_order_parameters(replace(sym, m=delta), grid, params, 0.0, with_qtau=False, kappa_rule=kr).m
    dn = rhs_order_parameters(replace(sym, m=-delta), grid, params, 0.0, with_qtau=False, kappa_rule=kr).m
    return (up - dn) / (2 * delta), sym


@dataclass(frozen=True)
class ScanPoint:
    axis_value: float
    m: float
    q: float
    chi: float
    Chat0: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PhaseScan:
    axis: str
    points: list
    boundary: float  # NaN when no crossing was bracketed
    threshold: float


def _with_axis(params: ModelParams, axis: str, value: float) -> ModelParams:
    if axis == "J0":
        return params.with_couplings(J0=value)
    if axis == "kappa0":
        return params.with_kappa0(value)
    raise ParameterError(f"unknown scan axis {axis!r}")


def _scan_point(args):
    params, axis, value, grid, ctrl, init_m = args
    p = _with_axis(params, axis, value)
    start = replace(noninteracting_solution(p, 0.0, grid), m=init_m)
    try:
        op = solve_fixed_point(p, 0.0, grid, replace(ctrl, init=start))
        return ScanPoint(value, op.m, op.q, op.chi, op.Chat0, op.iterations, True)
    except (ConvergenceError, NumericalError) as exc:
        log.warning("scan point %s=%g did not converge: %s", axis, value, exc)
        nan = math.nan
        return ScanPoint(value, nan, nan, nan, nan, ctrl.max_iter, False)


def _check_zero_field(params: ModelParams):
    if params.I0 != 0.0:
        raise ParameterError("phase scans are defined at zero field (I0 = 0, u0 = 0)")


def critical_J0(params: ModelParams, lo: float, hi: float, grid: ThetaGrid = DEFAULT_GRID,
                ctrl: SolverControl = SolverControl(), tol: float = 1e-4) -> float:
    """Ferromagnetic onset ``J0^c`` by bisection on the stability gain of ``m = 0``."""
    _check_zero_field(params)

    def gain_minus_one(j0):
        g, _ = ferro_stability(params.with_couplings(J0=j0), grid, ctrl)
        return g - 1.0

    return find_root_bracketed(gain_minus_one, lo, hi, tol)


def phase_scan(params: ModelParams, axis: str, values: Sequence[float], grid: ThetaGrid = DEFAULT_GRID,
               ctrl: SolverControl = SolverControl(), threshold: float = 1e-3, init_m: float = 0.1,
               boundary_tol: float = 1e-4, workers: int = 1) -> PhaseScan:
    """Solve the zero-field fixed point along ``axis`` and locate the onset.

    Each point starts from the non-interacting solution with ``m = init_m``.
    The boundary is bracketed between the last point with ``|m| < threshold``
    and the first with ``|m| >= threshold`` and then refined by bisection on
    the stability gain of the symmetric solution.
    """
    _check_zero_field(params)
    tasks = [(params, axis, float(v), grid, ctrl, init_m) for v in values]
    points = _map(_scan_point, tasks, workers)
    boundary = math.nan
    if axis == "J0":
        for a, b in zip(points[:-1], points[1:]):
            if not (a.converged and b.converged):
                continue
            if abs(a.m) < threshold <= abs(b.m):
                try:
                    boundary = critical_J0(params, a.axis_value, b.axis_value, grid, ctrl, boundary_tol)
                except NumericalError as exc:
                    log.warning("boundary refinement failed: %s", exc)
                    boundary = 0.5 * (a.axis_value + b.axis_value)
                break
    return PhaseScan(axis, points, boundary, threshold)


def boundary_curve(params: ModelParams, kappa0_values: Sequence[float], J0_lo: float, J0_hi: float,
                   grid: ThetaGrid = DEFAULT_GRID, ctrl: SolverControl = SolverControl(),
                   tol: float = 1e-4, workers: int = 1) -> list[tuple[float, float]]:
    """``(kappa0, J0^c)`` pairs; unbracketed or failed points give NaN."""
    _check_zero_field(params)
    tasks = [(params.with_kappa0(float(k)), J0_lo, J0_hi, grid, ctrl, tol) for k in kappa0_values]
    crit = _map(_critical_task, tasks, workers)
    return [(float(k), c) for k, c in zip(kappa0_values, crit)]


def _critical_task(args):
    params, lo, hi, grid, ctrl, tol = args
    try:
        return critical_J0(params, lo, hi, grid, ctrl, tol)
    except NumericalError as exc:
        log.warning("critical J0 not found for kappa0=%g: %s", params.kappa_dist.kappa0, exc)
        return math.nan


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))  # map preserves task order


def u0_curve(params: ModelParams, u0_values: Sequence[float], grid: ThetaGrid = DEFAULT_GRID,
             ctrl: SolverControl = SolverControl(), workers: int = 1) -> list[OrderParameters]:
    """Independent cold-start solves at each ``u0``."""
    return _map(_u0_task, [(params, float(u), grid, ctrl) for u in u0_values], workers)


def _u0_task(args):
    params, u0, grid, ctrl = args
    return solve_fixed_point(params, u0, grid, ctrl)
