"""INI run configuration with typed, documented defaults.

Every key has a default; unknown sections or keys are rejected. The
defaults reproduce the single-market setting ``J0 = J = 0.5``,
``alpha = 0.5``, ``I0 = 0``, ``sigma_I2 = 0.1``, ``sigma = 0.1`` with
exponential rates of mean 0.2.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .couplings import FULL, CouplingSpec
from .errors import ConfigError, ParameterError
from .meanfield import SolverControl, ThetaGrid
from .model import FixedKappa, GammaKappa, ModelParams
from .simulator import Schedule


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none") else _float(s)


def _floats(s: str) -> tuple:
    return tuple(_float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _degree(s: str):
    return FULL if s.strip().lower() == FULL else _float(s)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


def _fmt(v: Any) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> key -> (parser, default, help)
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "seed": (int, 12345, "master seed; every random stream derives from it"),
        "out": (str, "igbm-out", "output directory"),
        "workers": (int, 1, "worker processes for sweeps and ensembles"),
    },
    "model": {
        "I0": (_float, 0.0, "mean drift field"),
        "sigma_I2": (_float, 0.1, "variance of the drift field"),
        "sigma": (_float, 0.1, "fast noise amplitude"),
        "sigma0": (_float, 1.0, "coupling to the slow factor"),
        "gamma": (_float, 1e-4, "relaxation rate of the slow factor"),
        "kappa_law": (_choice("gamma", "fixed"), "gamma", "gamma: gamma law (kappa0, nu); fixed: all rates = kappa"),
        "kappa0": (_float, 0.2, "scale of the gamma rate law"),
        "nu": (_float, 1.0, "shape of the gamma rate law (1 = exponential)"),
        "kappa": (_float, 0.2, "common rate for kappa_law = fixed"),
    },
    "coupling": {
        "N": (int, 50, "number of assets"),
        "mean_degree": (_degree, FULL, "mean connectivity c, or 'full'"),
        "J0": (_float, 0.5, "ferromagnetic bias"),
        "J": (_float, 0.5, "disorder scale"),
        "alpha": (_float, 0.5, "correlation of J_ij and J_ji"),
        "hebbian_p": (int, 0, "number of embedded patterns (full connectivity only)"),
    },
    "simulate": {
        "dt": (_float, 0.01, "Euler-Maruyama step"),
        "t_warmup": (_float, 100.0, "time discarded before recording"),
        "t_max": (_float, 5e4, "end time of the run"),
        "record_stride": (int, 100, "steps between records"),
        "snapshot_stride": (int, 0, "records between full-state snapshots (0 = none)"),
        "clamp_u0": (_opt_float, None, "hold the slow factor at this value (none = dynamic)"),
        "replicas": (int, 1, "independent markets, replica ids 0..replicas-1"),
        "lag": (int, 1, "return lag in records"),
        "acf_lags": (_ints, tuple(range(1, 11)), "lags (records) of the absolute-return autocorrelation"),
        "vol_window": (int, 50, "records per window for the overlap/volatility correlation"),
    },
    "meanfield": {
        "mode": (_choice("solve", "u0_curve", "phase_scan"), "solve", "default mode of the meanfield command"),
        "u0": (_float, 0.0, "slow-factor value for mode = solve"),
        "u0_values": (_floats, (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0), "u0 grid for u0_curve"),
        "kappa0_values": (_floats, (0.2, 0.7, 1.2), "kappa0 values for u0_curve and the phase boundary"),
        "J0_values": (_floats, (0.5, 0.6, 0.7, 0.8, 0.9, 1.0), "J0 grid of the phase scan"),
        "J0_lo": (_float, 0.05, "lower bracket of the critical J0"),
        "J0_hi": (_float, 10.0, "upper bracket of the critical J0"),
        "threshold": (_float, 1e-3, "|m| above which a scan point counts as ferromagnetic"),
        "init_m": (_float, 0.1, "symmetry-breaking start of scan points"),
        "damping": (_float, 0.5, "fixed-point damping"),
        "tol": (_float, 1e-10, "fixed-point tolerance (max change)"),
        "max_iter": (int, 5000, "fixed-point iteration limit"),
        "n_kappa": (int, 48, "rate nodes"),
        "n_branch": (int, 64, "ubar nodes per stable branch (32 or more; fewer misplace noise mass)"),
        "n_y": (int, 24, "nodes of the non-persistent correlation integral"),
        "n_tau": (int, 400, "points of the tabulated q(tau)"),
    },
    "returns": {
        "regime": (_choice("quasi_stationary", "intermediate", "long"), "quasi_stationary", "time scale"),
        "tau": (_float, 100.0, "return horizon"),
        "grid_max": (_float, 1.118033988749895, "largest |du| on the output grid"),
        "grid_points": (int, 401, "points of the output grid"),
        "n_kappa": (int, 48, "rate nodes of the slow-regime average"),
        "n_z": (int, 16, "frozen-noise nodes of the slow-regime average"),
        "n_u0": (int, 32, "nodes in the sum of the two slow-factor values"),
        "n_d": (int, 120, "segments in their difference"),
        "table_u0_max": (_float, 5.0, "order-parameter table covers [-table_u0_max, table_u0_max]"),
        "table_points": (int, 41, "nodes of the order-parameter table (odd), denser near u0 = 0"),
    },
    "pricing": {
        "variant": (_choice("noninteracting", "interacting", "market"), "noninteracting", "curve family"),
        "u0": (_float, 1.0, "slow-factor value"),
        "kappa": (_float, 0.2, "rate of the fixed-rate interacting curve"),
        "grid_max": (_float, 79.05694150420949, "largest |ubar| on the output grid"),
        "grid_points": (int, 401, "points of the output grid"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keys are case sensitive
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        values = cls.defaults().values
        for section in cp.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{source}: unknown section [{section}]; known: {', '.join(SCHEMA)}")
            for key, raw in cp[section].items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{source}: unknown key '{key}' in [{section}]; "
                                      f"known: {', '.join(SCHEMA[section])}")
                parser = SCHEMA[section][key][0]
                try:
                    values[section][key] = parser(raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from exc
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for s, keys in SCHEMA.items():
            cp[s] = {k: _fmt(self.values[s][k]) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def override(self, section: str, **changes) -> "RunConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        for k, v in changes.items():
            if k not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{k}' in [{section}]")
            values[section][k] = v
        cfg = RunConfig(values)
        cfg.validate()
        return cfg

    def validate(self):
        """Build every derived object once so bad values fail early."""
        try:
            self.model_params()
            self.schedule()
            self.solver_control()
            self.theta_grid()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        if self["run"]["workers"] < 1:
            raise ConfigError("[run] workers must be >= 1")
        if not 0 <= self["run"]["seed"] < 2**64:
            raise ConfigError("[run] seed must be an unsigned 64-bit integer")

    def coupling_spec(self) -> CouplingSpec:
        c = self["coupling"]
        return CouplingSpec(N=c["N"], mean_degree=c["mean_degree"], J0=c["J0"], J=c["J"],
                            alpha=c["alpha"], hebbian_p=c["hebbian_p"])

    def model_params(self) -> ModelParams:
        m = self["model"]
        law = GammaKappa(m["kappa0"], m["nu"]) if m["kappa_law"] == "gamma" else FixedKappa(m["kappa"])
        return ModelParams(coupling_spec=self.coupling_spec(), I0=m["I0"], sigma_I2=m["sigma_I2"],
                           sigma=m["sigma"], sigma0=m["sigma0"], gamma=m["gamma"], kappa_dist=law)

    def schedule(self) -> Schedule:
        s = self["simulate"]
        return Schedule(dt=s["dt"], t_warmup=s["t_warmup"], t_max=s["t_max"], record_stride=s["record_stride"],
                        snapshot_stride=s["snapshot_stride"], clamp_u0=s["clamp_u0"])

    def solver_control(self) -> SolverControl:
        m = self["meanfield"]
        return SolverControl(damping=m["damping"], tol=m["tol"], max_iter=m["max_iter"])

    def theta_grid(self) -> ThetaGrid:
        m = self["meanfield"]
        return ThetaGrid(n_kappa=m["n_kappa"], n_branch=m["n_branch"], n_y=m["n_y"], n_tau=m["n_tau"])
