"""Static model parameters and the distribution of mean-reversion rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import special, stats

from .couplings import CouplingSpec
from .errors import ParameterError

# lower cutoff on mean-reversion rates, relative to their scale
KAPPA_FLOOR = 1e-3


@dataclass(frozen=True)
class GammaKappa:
    """Gamma-distributed mean-reversion rates.

    Parameterised as ``P(k) = (k/k0)**(nu-1) exp(-k/k0) / (k0 Gamma(nu))``,
    so ``nu = 1`` is the exponential law with mean ``kappa0``.
    """

    kappa0: float
    nu: float = 1.0

    def __post_init__(self):
        if not (self.kappa0 > 0 and self.nu > 0):
            raise ParameterError(f"gamma kappa law needs kappa0 > 0 and nu > 0, got {self}")

    @property
    def kappa_min(self) -> float:
        return KAPPA_FLOOR * self.kappa0

    @property
    def mean(self) -> float:
        return self.kappa0 * self.nu

    def pdf(self, k):
        return stats.gamma.pdf(k, self.nu, scale=self.kappa0)

    def ppf(self, p):
        return stats.gamma.ppf(p, self.nu, scale=self.kappa0)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` rates, redrawing any that fall below ``kappa_min``."""
        out = gen.gamma(self.nu, self.kappa0, size=n)
        low = out < self.kappa_min
        while low.any():
            out[low] = gen.gamma(self.nu, self.kappa0, size=int(low.sum()))
            low = out < self.kappa_min
        return out

    def rule(self, n: int = 48) -> tuple[np.ndarray, np.ndarray]:
        """Generalised Gauss-Laguerre nodes for the law, floored and renormalised."""
        x, w = special.roots_genlaguerre(n, self.nu - 1.0)
        nodes = self.kappa0 * x
        weights = w / math.gamma(self.nu)
        keep = (nodes >= self.kappa_min) & (weights > 0)
        nodes, weights = nodes[keep], weights[keep]
        return nodes, weights / weights.sum()


@dataclass(frozen=True)
class FixedKappa:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"fixed kappa must be positive, got {self.kappa}")

    @property
    def kappa0(self) -> float:
        return self.kappa

    @property
    def kappa_min(self) -> float:
        return self.kappa

    @property
    def mean(self) -> float:
        return self.kappa

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, self.kappa)

    def rule(self, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
        return np.array([self.kappa]), np.array([1.0])


KappaDist = Union[GammaKappa, FixedKappa]


@dataclass(frozen=True)
class ModelParams:
    """Everything that defines one instance of the interacting market model.

    Defaults are the Fig.-1 style setting: ``J0 = J = 0.5``, ``alpha = 0.5``,
    ``I0 = 0``, ``sigma_I2 = 0.1``, ``sigma = 0.1`` and exponential rates
    with mean 0.2.
    """

    coupling_spec: CouplingSpec = field(default_factory=CouplingSpec)
    I0: float = 0.0
    sigma_I2: float = 0.1
    sigma: float = 0.1
    sigma0: float = 1.0
    gamma: float = 1e-4
    kappa_dist: KappaDist = field(default_factory=lambda: GammaKappa(0.2, 1.0))

    def __post_init__(self):
        if self.sigma_I2 < 0 or self.sigma < 0 or self.sigma0 < 0:
            raise ParameterError("sigma_I2, sigma and sigma0 must be non-negative")
        if not self.gamma > 0:
            raise ParameterError("gamma must be positive")
        for name in ("I0", "sigma_I2", "sigma", "sigma0", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    # shorthands used throughout the theory code
    @property
    def J0(self) -> float:
        return self.coupling_spec.J0

    @property
    def J(self) -> float:
        return self.coupling_spec.J

    @property
    def alpha(self) -> float:
        return self.coupling_spec.alpha

    @property
    def sigma_I(self) -> float:
        return math.sqrt(self.sigma_I2)

    def with_couplings(self, **changes) -> "ModelParams":
        return replace(self, coupling_spec=replace(self.coupling_spec, **changes))

    def with_kappa0(self, kappa0: float) -> "ModelParams":
        kd = self.kappa_dist
        new = replace(kd, kappa0=kappa0) if isinstance(kd, GammaKappa) else FixedKappa(kappa0)
        return replace(self, kappa_dist=new)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def derive_drift(mu: float, sigma: float) -> float:
    """Drift of the log-price for a geometric Brownian motion (Ito shift)."""
    if sigma < 0:
        raise ParameterError("sigma must be non-negative")
    return mu - 0.5 * sigma * sigma
