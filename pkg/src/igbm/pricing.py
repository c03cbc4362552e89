"""Distributions of equilibrium log-prices (long-term means ``ubar``).

Without interactions ``ubar = (I0 + sigma0 u0 + sigma_I z)/kappa`` is
normal at fixed rate, and its average over gamma-distributed rates has a
closed form in parabolic cylinder functions. With interactions the map
``z -> ubar`` comes from the single-site self-consistency equation and the
density follows by change of variables along its stable branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, special, stats

from .curves import DensityCurve
from .errors import ConsistencyError, NumericalError, ParameterError
from .meanfield import TWO_OVER_SQRT_PI, OrderParameters, _fields, _positive_branch_root, sigma_u2
from .model import FixedKappa, GammaKappa, ModelParams
from .numerics import pcf_integral

AVERAGED = "averaged"


@dataclass(frozen=True)
class PricingCoefficients:
    """``beta = (kappa0 ubar / sigma_I)^2`` and ``pricing_gamma = 1 - kappa0 ubar a / sigma_I^2``."""

    beta: float
    pricing_gamma: float


def pricing_coefficients(ubar: float, params: ModelParams, u0: float) -> PricingCoefficients:
    k0 = params.kappa_dist.kappa0
    a = params.I0 + params.sigma0 * u0
    return PricingCoefficients((k0 * ubar / params.sigma_I) ** 2, 1.0 - k0 * ubar * a / params.sigma_I2)


@dataclass(frozen=True)
class PricingContext:
    params: ModelParams
    u0: float
    op: Optional[OrderParameters] = None
    kappa: Union[float, str] = AVERAGED

    def __post_init__(self):
        if self.kappa != AVERAGED and not (isinstance(self.kappa, (int, float)) and self.kappa > 0):
            raise ParameterError("kappa must be positive or 'averaged'")
        if self.op is not None and abs(self.op.u0 - self.u0) > 1e-12:
            raise ParameterError("order parameters were solved at a different u0")


def _gamma_law(params: ModelParams) -> GammaKappa:
    kd = params.kappa_dist
    if not isinstance(kd, GammaKappa):
        raise ParameterError("closed-form pricing law needs gamma-distributed rates")
    if not params.sigma_I2 > 0:
        raise ParameterError("sigma_I must be positive; the law degenerates at sigma_I = 0")
    return kd


def noninteracting_pricing_pdf_closed(grid, params: ModelParams, u0: float) -> DensityCurve:
    """Rate-averaged law of ``ubar`` without interactions, via parabolic cylinder functions."""
    kd = _gamma_law(params)
    x = np.asarray(grid, dtype=float)
    k0, nu, sI2 = kd.kappa0, kd.nu, params.sigma_I2
    a = params.I0 + params.sigma0 * u0
    log_pref = math.log(k0) - 0.5 * math.log(2.0 * math.pi * sI2) - a * a / (2.0 * sI2)
    out = np.empty(x.size)
    for n, u in enumerate(x):
        if u == 0.0:
            # exact limit: mean rate times the normal density at zero
            out[n] = nu * math.exp(log_pref)
            continue
        c = pricing_coefficients(u, params, u0)
        sb = math.sqrt(c.beta)
        # beta^{-(1+nu)/2} exp(g^2/4b) D_{-(1+nu)}(g/sqrt(b)) = beta^{-(1+nu)/2} int/Gamma(1+nu)
        val = pcf_integral(1.0 + nu, c.pricing_gamma / sb)
        out[n] = math.exp(log_pref - special.gammaln(nu) - (1.0 + nu) * math.log(sb)) * val
    return DensityCurve(x, out, meta={"u0": u0, "kappa": AVERAGED, "interacting": False})


def _noninteracting_point(u: float, params: ModelParams, kd: GammaKappa, a: float) -> float:
    k0, nu, sI = kd.kappa0, kd.nu, params.sigma_I
    norm = 1.0 / math.sqrt(2.0 * math.pi * sI * sI)

    # w = t^nu with t = kappa/kappa0 removes the t^(nu-1) endpoint behaviour
    def f(w):
        t = w ** (1.0 / nu)
        k = k0 * t
        return math.exp(-t) * k * norm * math.exp(-((k * u - a) ** 2) / (2.0 * sI * sI))

    pts = []
    if u != 0.0:
        # the normal factor confines t to t* +- a few widths
        t_star = max(a / (k0 * u), 0.0)
        width = sI / (k0 * abs(u))
        pts = [max(t_star + d * width, 0.0) ** nu for d in (-5.0, -1.0, 0.0, 1.0, 5.0, 20.0)]
    upper = 60.0 ** nu
    edges = sorted({0.0, *[p for p in pts if 0.0 < p < upper], upper})
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    tail, _ = integrate.quad(f, upper, math.inf, epsabs=1e-16)
    return (total + tail) / math.gamma(nu + 1.0)


def noninteracting_pricing_pdf_quadrature(grid, params: ModelParams, u0: float) -> DensityCurve:
    """Direct rate quadrature of ``Normal(ubar; a/kappa, sigma_I^2/kappa^2)``."""
    x = np.asarray(grid, dtype=float)
    a = params.I0 + params.sigma0 * u0
    kd = params.kappa_dist
    if isinstance(kd, FixedKappa):
        if not params.sigma_I2 > 0:
            raise ParameterError("sigma_I must be positive")
        d = stats.norm.pdf(x, loc=a / kd.kappa, scale=params.sigma_I / kd.kappa)
        return DensityCurve(x, d, meta={"u0": u0, "kappa": kd.kappa, "interacting": False})
    kd = _gamma_law(params)
    d = np.array([_noninteracting_point(float(u), params, kd, a) for u in x])
    return DensityCurve(x, d, meta={"u0": u0, "kappa": AVERAGED, "interacting": False})


@dataclass(frozen=True)
class _Branches:
    A: float
    B: float
    C: float
    s: float
    u_plus: float
    gap: bool


def _branches(kappa: float, op: OrderParameters, params: ModelParams, u0: float) -> _Branches:
    A, B, C = _fields(op, params, u0)
    if not B > 0:
        raise ParameterError("interacting pricing law needs sigma_I^2 + J^2 q > 0")
    s = math.sqrt(1.0 + 2.0 * float(sigma_u2(kappa, op.Chat0, params.sigma, params.J)))
    u_plus, gap = _positive_branch_root(np.array([kappa]), C, np.array([s]))
    return _Branches(A, B, C, s, float(u_plus[0]), bool(gap[0]))


def _interacting_density(x: np.ndarray, kappa, br_A, br_B, br_C, s, u_plus, gap):
    """Density of ``ubar`` on the grid ``x`` for each rate in ``kappa`` (shape ``(K, len(x))``)."""
    k = np.asarray(kappa, float)[:, None]
    s = np.asarray(s, float)[:, None]
    up = np.asarray(u_plus, float)[:, None]
    z = (k * x - br_C * special.erf(x / s) - br_A) / br_B
    jac = (k - br_C * TWO_OVER_SQRT_PI / s * np.exp(-(x / s) ** 2)) / br_B
    allowed = np.abs(x) >= np.where(np.asarray(gap)[:, None], up, 0.0)
    if np.any(jac[allowed] < -1e-12 * np.broadcast_to(k, jac.shape)[allowed] / br_B):
        raise ConsistencyError("negative Jacobian on a stable branch")
    return np.where(allowed, np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) * np.maximum(jac, 0.0), 0.0)


def _grid_mass(lo: float, hi: float, kappa: float, br: _Branches) -> float:
    """Exact frozen-noise probability of the part of ``[lo, hi]`` outside the gap."""
    z_of = lambda u: (kappa * u - br.C * math.erf(u / br.s) - br.A) / br.B
    pieces = [(-math.inf, -br.u_plus), (br.u_plus, math.inf)] if br.gap else [(-math.inf, math.inf)]
    mass = 0.0
    for a, b in pieces:
        a, b = max(a, lo), min(b, hi)
        if b > a:
            # each branch is monotone, so its z-preimage is an interval
            mass += stats.norm.cdf(z_of(b)) - stats.norm.cdf(z_of(a))
    return float(mass)


def interacting_pricing_pdf(grid, ctx: PricingContext) -> DensityCurve:
    """Law of ``ubar`` at one fixed rate, by change of variables from the frozen noise."""
    if ctx.op is None:
        raise ParameterError("interacting pricing needs converged order parameters")
    if not np.isfinite(ctx.op.residual) and ctx.op.iterations == 0:
        raise ParameterError("order parameters are not a converged solution")
    if ctx.kappa == AVERAGED:
        raise ParameterError("use market_pricing_pdf for rate-averaged curves")
    x = np.asarray(grid, dtype=float)
    kappa = float(ctx.kappa)
    br = _branches(kappa, ctx.op, ctx.params, ctx.u0)
    dens = _interacting_density(x, [kappa], br.A, br.B, br.C, [br.s], [br.u_plus], [br.gap])[0]
    mass = _grid_mass(float(x[0]), float(x[-1]), kappa, br)
    if not mass > 0:
        raise NumericalError("grid carries no probability mass", kappa=kappa)
    meta = {"u0": ctx.u0, "kappa": kappa, "interacting": True, "norm_factor": mass,
            "gap": [-br.u_plus, br.u_plus] if br.gap else None}
    return DensityCurve(x, dens / mass, meta=meta)


def market_pricing_pdf(grid, ctx: PricingContext, n_panels: int = 400, order: int = 8) -> DensityCurve:
    """Rate-averaged law of ``ubar``; interacting when ``ctx.op`` is given.

    The interacting average uses a composite Gauss-Legendre rule in the
    cumulative probability of the rate law.
    """
    params = ctx.params
    x = np.asarray(grid, dtype=float)
    if ctx.op is None:
        c = noninteracting_pricing_pdf_closed(x, params, ctx.u0)
        return DensityCurve(x, c.density, meta=c.meta)
    kd = _gamma_law(params)
    g, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    p = ((edges[:-1] + half)[:, None] + half[:, None] * g).ravel()
    w = (half[:, None] * gw).ravel()
    kappa = kd.ppf(p)
    A, B, C = _fields(ctx.op, params, ctx.u0)
    if not B > 0:
        raise ParameterError("interacting pricing law needs sigma_I^2 + J^2 q > 0")
    s = np.sqrt(1.0 + 2.0 * sigma_u2(kappa, ctx.op.Chat0, params.sigma, params.J))
    u_plus, gap = _positive_branch_root(kappa, C, s)
    dens = np.zeros(x.size)
    for lo in range(0, kappa.size, 256):
        sl = slice(lo, lo + 256)
        dens += w[sl] @ _interacting_density(x, kappa[sl], A, B, C, s[sl], u_plus[sl], gap[sl])
    meta = {"u0": ctx.u0, "kappa": AVERAGED, "interacting": True, "n_panels": n_panels, "order": order}
    return DensityCurve(x, dens, meta=meta)
