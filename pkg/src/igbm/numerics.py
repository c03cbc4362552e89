"""Shared numerical kernels: quadrature rules, special functions, root
finding and reproducible random streams."""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import BracketError, NumericalError, ParameterError

__all__ = [
    "QuadratureRule",
    "RngStream",
    "gauss_hermite",
    "gauss_legendre",
    "gaussian_rule",
    "trapezoid_rule",
    "erf",
    "parabolic_cylinder_D",
    "pcf_integral",
    "find_root_bracketed",
]

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of a one-dimensional quadrature rule."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ParameterError("nodes and weights must be 1-d arrays of equal length")
        if nodes.size > 1 and not np.all(np.diff(nodes) > 0):
            raise ParameterError("quadrature nodes must be strictly increasing")
        if not np.all(weights > 0):
            raise ParameterError("quadrature weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_hermite(n: int) -> QuadratureRule:
    """Gauss-Hermite rule for the weight ``exp(-x**2)`` on the real line.

    Nodes whose weight underflows to zero in double precision (``n`` above
    roughly 360) are dropped; they cannot contribute to any sum.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 512:
        raise ParameterError(f"gauss_hermite needs 1 <= n <= 512, got {n!r}")
    if n == 1:
        return QuadratureRule(np.array([0.0]), np.array([SQRT_PI]), "gauss_hermite")
    x, w = special.roots_hermite(int(n))
    keep = w > 0
    return QuadratureRule(x[keep], w[keep], "gauss_hermite")


def gaussian_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights averaging over a standard normal variable."""
    rule = gauss_hermite(n)
    return rule.nodes * math.sqrt(2.0), rule.weights / SQRT_PI


def gauss_legendre(a: float, b: float, n: int) -> QuadratureRule:
    if not b > a:
        raise ParameterError("gauss_legendre needs b > a")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return QuadratureRule(half * x + 0.5 * (a + b), half * w, "gauss_legendre")


def trapezoid_rule(grid: np.ndarray) -> QuadratureRule:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ParameterError("trapezoid rule needs at least two points")
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return QuadratureRule(grid, w, "trapezoid")


def erf(x):
    """Error function, the sigmoid feedback of the model."""
    return special.erf(x)


def pcf_integral(a: float, z: float, epsrel: float = 1e-12) -> float:
    """``int_0^inf t**(a-1) exp(-z t - t**2/2) dt`` for ``a > 0``.

    This is the parabolic cylinder function ``D_{-a}(z)`` with its
    ``exp(-z**2/4)/Gamma(a)`` prefactor removed, which stays finite where
    the prefactor would overflow or underflow.
    """
    if not a > 0:
        raise ParameterError(f"pcf_integral needs a > 0, got {a}")
    # the integrand peaks near t* = (-z + sqrt(z^2 + 4(a-1)))/2
    disc = z * z + 4.0 * max(a - 1.0, 0.0)
    t_peak = max(0.5 * (-z + math.sqrt(disc)), 0.0)
    width = 1.0 / math.sqrt(1.0 + max(z, 0.0) ** 2)
    log_peak = 0.0 if t_peak == 0.0 else (a - 1) * math.log(t_peak) - z * t_peak - 0.5 * t_peak**2

    def f(t):
        if t <= 0.0:
            return 0.0 if a > 1 else (math.inf if a < 1 else 1.0)
        return math.exp((a - 1) * math.log(t) - z * t - 0.5 * t * t - log_peak)

    upper = t_peak + 12.0 + 40.0 * width
    cand = (t_peak, 4.0 * width, *(t_peak + k * width for k in (1.0, 5.0, 20.0, 50.0)))
    breaks = sorted({b for b in cand if 0 < b < upper})
    total = err_sum = 0.0
    lo = 0.0
    with warnings.catch_warnings():
        # far pieces carry negligible mass; judge accuracy on the total
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for hi in [*breaks, upper]:
            val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=epsrel, limit=200)
            total += val
            err_sum += err
            lo = hi
    if not math.isfinite(total) or err_sum > 1e-8 * abs(total) + 1e-300:
        raise NumericalError("parabolic cylinder quadrature did not converge",
                             order=-a, z=z, value=total, error=err_sum)
    tail, _ = integrate.quad(f, upper, math.inf, epsabs=0.0, epsrel=epsrel)
    return (total + tail) * math.exp(log_peak)


def parabolic_cylinder_D(order: float, z: float) -> float:
    """Parabolic cylinder function ``D_p(z)`` for negative order ``p``.

    Uses ``D_{-a}(z) = exp(-z^2/4)/Gamma(a) * int_0^inf t^(a-1) exp(-z t - t^2/2) dt``.
    """
    if not order < 0:
        raise ParameterError(f"parabolic_cylinder_D needs order < 0, got {order}")
    a = -order
    log_pref = -0.25 * z * z - special.gammaln(a)
    return math.exp(log_pref) * pcf_integral(a, z)


def find_root_bracketed(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_iter: int = 500,
) -> float:
    """Root of ``f`` inside ``[lo, hi]`` by bisection with secant steps.

    Stops when the bracket is narrower than ``tol`` (or ``f`` hits zero
    exactly) and returns the bracket end with the smaller ``|f|``; ties go
    to ``lo``.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise BracketError("no sign change on bracket", lo=lo, hi=hi, f_lo=flo, f_hi=fhi)
    force_bisect = False
    for _ in range(max_iter):
        width = hi - lo
        if width < tol:
            break
        x = 0.5 * (lo + hi)
        if not force_bisect:
            secant = lo - flo * width / (fhi - flo)
            if lo + 0.25 * tol < secant < hi - 0.25 * tol:
                x = secant
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        # a secant step that failed to halve the bracket is followed by bisection
        force_bisect = (hi - lo) > 0.5 * width
    else:
        raise NumericalError("root finder exceeded max_iter", lo=lo, hi=hi)
    return lo if abs(flo) <= abs(fhi) else hi


def _derive_id(parent: int, key: str | int) -> int:
    digest = hashlib.blake2b(f"{parent}/{key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    ``generator()`` always returns a fresh generator positioned at the start
    of the stream, so a stream value can be shared freely.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v < 2**64:
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id)])
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, key: str | int) -> "RngStream":
        """Independent sub-stream labelled by ``key``."""
        return RngStream(self.seed, _derive_id(self.stream_id, key))
