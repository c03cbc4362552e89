"""Distributions of log-returns across the single-site ensemble.

Three regimes are covered. Within one macro-economic epoch (``gamma tau``
small) each member is an Ornstein-Uhlenbeck process at fixed long-term
mean, and returns are centred normals with variance
``(sigma^2/kappa)(1 - exp(-kappa tau))`` averaged over the rates. On slow
time scales the long-term means themselves move with the slow factor, and
returns mix the two values of ``u0`` taken from their bivariate normal law.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, special, stats

from . import _backend
from .curves import DensityCurve
from .errors import ConvergenceError, NumericalError, ParameterError
from .meanfield import (DEFAULT_GRID, OrderParameters, SolverControl, ThetaGrid, sigma_u2,
                        solve_fixed_point, ubar_branch)
from .model import FixedKappa, GammaKappa, ModelParams
from .numerics import gaussian_rule

log = logging.getLogger(__name__)

QUASI_STATIONARY = "quasi_stationary"
INTERMEDIATE = "intermediate"
LONG = "long"


@dataclass(frozen=True)
class TimeScale:
    kind: str
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (QUASI_STATIONARY, INTERMEDIATE, LONG):
            raise ParameterError(f"unknown time scale {self.kind!r}")
        if self.kind != LONG and not (self.tau is not None and self.tau > 0):
            raise ParameterError(f"{self.kind} time scale needs tau > 0")

    def slow_correlation(self, gamma: float) -> float:
        """Correlation of the slow factor across the return horizon."""
        if self.kind == LONG:
            return 0.0
        return math.exp(-gamma * self.tau)


def kappa_cdf_rule(params: ModelParams, n: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Rate nodes at Gauss-Legendre points of the cumulative probability.

    Unlike the Laguerre rule this resolves the small-rate region that
    produces power-law tails; no floor is applied.
    """
    kd = params.kappa_dist
    if isinstance(kd, FixedKappa):
        return np.array([kd.kappa]), np.array([1.0])
    x, w = np.polynomial.legendre.leggauss(n)
    p = 0.5 * (x + 1.0)
    return kd.ppf(p), 0.5 * w


def _qs_variance_member(kappa, tau, sigma):
    return sigma * sigma * -np.expm1(-kappa * tau) / kappa


def qs_return_pdf(grid, tau: float, params: ModelParams, epsrel: float = 1e-10) -> DensityCurve:
    """Quasi-stationary return density, averaged over the rate distribution."""
    if not tau > 0:
        raise ParameterError("tau must be positive")
    x = np.asarray(grid, dtype=float)
    sigma = params.sigma
    kd = params.kappa_dist
    if isinstance(kd, FixedKappa):
        v = _qs_variance_member(kd.kappa, tau, sigma)
        return DensityCurve(x, stats.norm.pdf(x, scale=math.sqrt(v)), meta={"tau": tau})
    if not isinstance(kd, GammaKappa):
        raise ParameterError("unsupported rate distribution")

    def integrand(t):
        # t = kappa/kappa0; the gamma density in t is t^(nu-1) e^-t / Gamma(nu)
        k = kd.kappa0 * t
        v = _qs_variance_member(k, tau, sigma)
        w = math.exp((kd.nu - 1.0) * math.log(t) - t - special.gammaln(kd.nu)) if t > 0 else 0.0
        return w * np.exp(-0.5 * x * x / v) / math.sqrt(2.0 * math.pi * v)

    # split where the member variance crosses over from diffusive to saturated
    t_c = 1.0 / (kd.kappa0 * tau)
    pts = sorted({min(t_c, 50.0), 1.0, 10.0})
    total = np.zeros_like(x)
    edges = [0.0, *pts, math.inf]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, err = integrate.quad_vec(integrand, a, b, epsabs=1e-300, epsrel=epsrel, limit=400)
        if not np.all(np.isfinite(val)):
            raise NumericalError("rate average of the return density failed", interval=(a, b))
        total += val
    return DensityCurve(x, total, meta={"tau": tau})


def qs_return_pdf_asymptotic(grid, params: ModelParams) -> DensityCurve:
    """Large-horizon quasi-stationary law with power-law tail ``|du|^-(1+2 nu)``."""
    kd = params.kappa_dist
    if not isinstance(kd, GammaKappa):
        raise ParameterError("asymptotic return law needs gamma-distributed rates")
    x = np.asarray(grid, dtype=float)
    s2 = params.sigma**2
    if not s2 > 0:
        raise ParameterError("sigma must be positive")
    log_ratio = special.gammaln(kd.nu + 0.5) - special.gammaln(kd.nu)
    pref = math.sqrt(kd.kappa0 / (2.0 * math.pi * s2)) * math.exp(log_ratio)
    return DensityCurve(x, pref * (1.0 + kd.kappa0 * x * x / (2.0 * s2)) ** (-(kd.nu + 0.5)))


def qs_return_variance(tau: float, params: ModelParams) -> float:
    """Closed-form variance of quasi-stationary returns at horizon ``tau``."""
    kd = params.kappa_dist
    if not isinstance(kd, GammaKappa):
        raise ParameterError("closed-form variance needs gamma-distributed rates")
    if not tau > 0:
        raise ParameterError("tau must be positive")
    s2, k0, nu = params.sigma**2, kd.kappa0, kd.nu
    x = k0 * tau
    if abs(nu - 1.0) <= 1e-6:
        return s2 / k0 * math.log1p(x)
    # 1 - (1+x)^-(nu-1) written to keep precision for small x
    return s2 / (k0 * (nu - 1.0)) * -math.expm1(-(nu - 1.0) * math.log1p(x))


@dataclass(frozen=True)
class OPTable:
    """Order parameters solved on a grid of slow-factor values."""

    u0: np.ndarray
    ops: tuple

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self.ops])

    def interp(self, name: str, u0):
        """Shape-preserving cubic interpolation in ``u0``; constant beyond the table ends."""
        u = np.clip(u0, self.u0[0], self.u0[-1])
        return interpolate.PchipInterpolator(self.u0, self.column(name))(u)

    def at(self, u0: float) -> OrderParameters:
        return OrderParameters(*(float(self.interp(k, u0)) for k in ("m", "q", "chi", "Chat0")), u0=u0)

    @property
    def span(self) -> float:
        return float(min(-self.u0[0], self.u0[-1]))


def table_nodes(span: float, n: int) -> np.ndarray:
    """``n`` slow-factor values on ``[-span, span]``, quadratically denser at 0.

    The order parameters vary fastest near ``u0 = 0``.
    """
    if n < 3 or n % 2 == 0:
        raise ParameterError("table needs an odd number (>= 3) of nodes")
    t = np.linspace(-1.0, 1.0, n)
    return span * t * np.abs(t)


def op_table(params: ModelParams, u0_grid: Sequence[float], grid: ThetaGrid = DEFAULT_GRID,
             ctrl: SolverControl = SolverControl(), min_span: float = 4.0) -> OPTable:
    """Solve the fixed point at every ``u0``, warm-starting outward from ``u0 = 0``."""
    u = np.unique(np.asarray(u0_grid, dtype=float))
    if u.size < 2 or min(-u[0], u[-1]) < min_span:
        raise ParameterError(f"u0 grid must cover [-{min_span}, {min_span}]")
    start = int(np.argmin(np.abs(u)))
    ops: dict[int, OrderParameters] = {}
    failed = []
    centre = solve_fixed_point(params, float(u[start]), grid, ctrl)
    ops[start] = centre
    for direction in (1, -1):
        prev = centre
        i = start + direction
        while 0 <= i < u.size:
            try:
                prev = solve_fixed_point(params, float(u[i]), grid, replace(ctrl, init=prev))
                ops[i] = prev
            except (ConvergenceError, NumericalError) as exc:
                failed.append((float(u[i]), str(exc)))
            i += direction
    if failed:
        raise ConvergenceError("order-parameter table has non-convergent nodes", nodes=failed)
    return OPTable(u, tuple(ops[i] for i in range(u.size)))


def slow_return_pdf(grid, scale: TimeScale, params: ModelParams, table: OPTable,
                    n_kappa: int = 48, n_z: int = 16, n_u0: int = 32, n_d: int = 120,
                    d_max: float = 6.0) -> DensityCurve:
    """Return density when the slow factor moves between the two times.

    Each member contributes ``Normal(dubar, sigma_u^2(t) + sigma_u^2(t'))``;
    the shift ``dubar`` keeps the frozen noise of a member fixed and ignores
    the change of its amplitude with ``q``.

    The pair ``(u0, u0')`` is written through independent standard normals
    ``S`` (sum) and ``D`` (difference). ``S`` uses a Gauss-Hermite rule with
    ``n_u0`` nodes. ``D`` is cut into ``n_d`` segments on ``[-d_max, d_max]``
    over which the shift is taken linear, so each segment adds a normal
    smeared over an interval. A discrete rule in ``D`` would instead put a
    comb of point shifts, magnified by ``1/kappa`` at small rates.
    """
    if scale.kind == QUASI_STATIONARY:
        raise ParameterError("use qs_return_pdf for the quasi-stationary regime")
    if table.span < 4.0:
        raise ParameterError("order-parameter table must cover u0 in [-4, 4]")
    if n_d < 1 or not d_max > 0:
        raise ParameterError("need n_d >= 1 and d_max > 0")
    x = np.asarray(grid, dtype=float)
    r = scale.slow_correlation(params.gamma)
    kappa, wk = kappa_cdf_rule(params, n_kappa)
    z, wz = gaussian_rule(n_z)
    S, wS = gaussian_rule(n_u0)
    edges = np.linspace(-d_max, d_max, n_d + 1)
    seg_w = np.diff(special.ndtr(edges))
    seg_w /= seg_w.sum()
    c_plus, c_minus = math.sqrt(0.5 * (1.0 + r)), math.sqrt(max(0.5 * (1.0 - r), 0.0))
    # u0(S, D) = c+ S + c- D and u0'(S, D) = u0(S, -D); edges are symmetric
    # so both times draw on the same set of values
    u0 = c_plus * S[:, None] + c_minus * edges[None, :]  # (n_u0, n_d + 1)
    values, inverse = np.unique(u0.ravel(), return_inverse=True)
    inverse = inverse.reshape(u0.shape)
    K, Z = kappa.size, z.size
    mth = np.empty((values.size, K, Z))
    var = np.empty((values.size, K))
    for n, v in enumerate(values):
        op = table.at(float(v))
        ub = ubar_branch(kappa[:, None], z[None, :], op, params, float(v))
        s2 = sigma_u2(kappa, op.Chat0, params.sigma, params.J)
        mth[n] = special.erf(ub / np.sqrt(1.0 + 2.0 * s2)[:, None])
        var[n] = s2
    m_col, chi_col, q_col = (table.interp(c, values) for c in ("m", "chi", "q"))
    i_t, i_tp = inverse, inverse[:, ::-1]
    rel = np.abs(q_col[i_t] - q_col[i_tp]) / np.maximum(np.maximum(q_col[i_t], q_col[i_tp]), 1e-300)
    if np.any(rel > 1e-2):
        log.info("frozen-noise amplitude differs between the two times by up to %.3g (relative)", rel.max())
    J0, J2a = params.J0, params.alpha * params.J**2
    # shift at every (S, D edge, kappa, z)
    shift = (J0 * (m_col[i_t] - m_col[i_tp]) + params.sigma0 * (u0 - u0[:, ::-1]))[:, :, None, None] \
        + J2a * (chi_col[i_t][:, :, None, None] * mth[i_t] - chi_col[i_tp][:, :, None, None] * mth[i_tp])
    shift = shift / kappa[None, None, :, None]
    variance = var[i_t] + var[i_tp]  # (n_u0, n_d + 1, K)
    a, b = shift[:, :-1], shift[:, 1:]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    seg_var = np.broadcast_to((0.5 * (variance[:, :-1] + variance[:, 1:]))[:, :, :, None], lo.shape)
    weight = wS[:, None, None, None] * seg_w[None, :, None, None] * wk[None, None, :, None] * wz[None, None, None, :]
    keep = weight.ravel() > 1e-300
    flat = lambda arr: np.ascontiguousarray(arr.ravel()[keep])
    dens = _backend.kernels.smeared_mixture_pdf(np.ascontiguousarray(x), flat(lo), flat(hi), flat(seg_var),
                                                flat(weight))
    meta = {"regime": scale.kind, "tau": scale.tau, "r": r, "n_kappa": n_kappa, "n_z": n_z,
            "n_u0": n_u0, "n_d": n_d, "d_max": d_max}
    return DensityCurve(x, dens, meta=meta)


def qs_limit_pdf(grid, params: ModelParams, n_kappa: int = 96) -> DensityCurve:
    """``tau -> infinity`` limit of the quasi-stationary law (variance ``sigma^2/kappa``)."""
    kappa, wk = kappa_cdf_rule(params, n_kappa)
    x = np.asarray(grid, dtype=float)
    v = params.sigma**2 / kappa
    return DensityCurve(x, _backend.kernels.gaussian_mixture_pdf(
        np.ascontiguousarray(x), np.zeros(kappa.size), np.ascontiguousarray(v), np.ascontiguousarray(wk)))
