"""Tabulated probability densities."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .io import write_csv, write_json


@dataclass(frozen=True)
class DensityCurve:
    """Density values on an increasing grid.

    ``widths`` is set for histograms, whose integral is the sum of bar
    areas; otherwise integrals use the trapezoid rule.
    """

    grid: np.ndarray
    density: np.ndarray
    widths: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if g.ndim != 1 or g.shape != d.shape:
            raise ParameterError("grid and density must be 1-d arrays of equal length")
        if g.size > 1 and not np.all(np.diff(g) > 0):
            raise ParameterError("grid must be strictly increasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ParameterError("density must be finite and non-negative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "density", d)
        if self.widths is not None:
            object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))

    def integral(self) -> float:
        if self.widths is not None:
            return float(np.sum(self.density * self.widths))
        return float(np.trapezoid(self.density, self.grid))

    def moment(self, k: int, center: float = 0.0) -> float:
        f = self.density * (self.grid - center) ** k
        if self.widths is not None:
            return float(np.sum(f * self.widths))
        return float(np.trapezoid(f, self.grid))

    def mean(self) -> float:
        return self.moment(1) / self.integral()

    def variance(self) -> float:
        mu = self.mean()
        return self.moment(2, mu) / self.integral()

    def skewness(self) -> float:
        mu = self.mean()
        return self.moment(3, mu) / self.integral() / self.variance() ** 1.5

    def normalized(self) -> "DensityCurve":
        z = self.integral()
        if not z > 0:
            raise ParameterError("cannot normalise a curve with zero mass")
        return DensityCurve(self.grid, self.density / z, self.widths, dict(self.meta, norm_factor=z))

    def save(self, path, x_name: str, sidecar: Optional[dict] = None):
        """``<path>`` as ``x_name,pdf`` and, if given, a JSON sidecar next to it."""
        out = write_csv(path, [x_name, "pdf"], [self.grid, self.density])
        if sidecar is not None:
            write_json(out.with_suffix(".json"), sidecar)
        return out


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ParameterError("need two positive points for a log-log slope")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
