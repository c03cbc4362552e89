"""Microscopic Langevin simulation of the interacting market.

Each log-price follows

    du_i = (-kappa_i u_i + sum_j J_ij erf(u_j) + sigma0 u0 + I_i) dt + sigma dW_i

and the slow factor is an Ornstein-Uhlenbeck process with unit stationary
variance, ``du0 = -gamma u0 dt + sqrt(2 gamma) dW_0``. Integration is
explicit Euler-Maruyama; the inner loop lives in :mod:`igbm._backend`.

The market index is the equal-weight average of the log-prices,
``index(t) = (1/N) sum_i u_i(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special

from . import _backend
from .couplings import CouplingMatrix, PatternSet
from .curves import DensityCurve
from .errors import NumericalError, ParameterError, StatisticsError
from .io import write_csv
from .model import ModelParams
from .numerics import RngStream

STABILITY_LIMIT = 0.1
# noise buffer per kernel call, in doubles
_CHUNK_DOUBLES = 1 << 22


@dataclass(frozen=True)
class PerAsset:
    """Quenched per-asset mean-reversion rates and drifts."""

    kappa: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.kappa, dtype=float)
        d = np.ascontiguousarray(self.I, dtype=float)
        if k.shape != d.shape or k.ndim != 1:
            raise ParameterError("kappa and I must be 1-d arrays of equal length")
        if np.any(k < 0):
            raise ParameterError("mean-reversion rates must be non-negative")
        k.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "I", d)


def draw_per_asset(params: ModelParams, N: int, rng: RngStream) -> PerAsset:
    """Draw ``kappa_i`` and ``I_i ~ Normal(I0, sigma_I2)`` from their own sub-streams."""
    kappa = params.kappa_dist.sample(rng.child("kappa").generator(), N)
    I = params.I0 + params.sigma_I * rng.child("drift").generator().standard_normal(N)
    return PerAsset(kappa, I)


@dataclass(frozen=True)
class MarketState:
    u: np.ndarray
    u0: float
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim != 1 or not np.all(np.isfinite(u)) or not math.isfinite(self.u0):
            raise ParameterError("market state must be a finite 1-d vector and finite u0")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class Schedule:
    """Time stepping and recording plan.

    Records are taken every ``record_stride`` steps after ``t_warmup`` up to
    ``t_max``; a full-state snapshot is kept every ``snapshot_stride``
    records (0 disables). ``clamp_u0`` holds the slow factor at a fixed
    value (the ``gamma -> 0`` limit).
    """

    dt: float = 0.01
    t_warmup: float = 100.0
    t_max: float = 5e4
    record_stride: int = 100
    snapshot_stride: int = 0
    clamp_u0: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not 0 <= self.t_warmup < self.t_max:
            raise ParameterError("need 0 <= t_warmup < t_max")
        if self.record_stride < 1 or self.snapshot_stride < 0:
            raise ParameterError("record_stride must be >= 1 and snapshot_stride >= 0")

    @property
    def record_dt(self) -> float:
        return self.dt * self.record_stride

    @property
    def warm_steps(self) -> int:
        return int(round(self.t_warmup / self.dt))

    @property
    def n_records(self) -> int:
        return (int(round(self.t_max / self.dt)) - self.warm_steps) // self.record_stride


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    u0_series: np.ndarray
    index_series: np.ndarray
    overlap_series: Optional[np.ndarray] = None  # (n, p)
    m_series: Optional[np.ndarray] = None  # (1/N) sum_i erf(u_i)
    snapshots: list = field(default_factory=list)  # (t, u) pairs
    per_asset: Optional[PerAsset] = None
    dt: float = math.nan
    record_stride: int = 1

    def __post_init__(self):
        n = len(self.times)
        if len(self.u0_series) != n or len(self.index_series) != n:
            raise ParameterError("trajectory series must have equal length")
        if self.overlap_series is not None and len(self.overlap_series) != n:
            raise ParameterError("overlap series length mismatch")

    @property
    def record_dt(self) -> float:
        return self.dt * self.record_stride

    def save(self, path, snapshot_path=None):
        cols = [self.times, self.u0_series, self.index_series]
        header = ["t", "u0", "index"]
        if self.overlap_series is not None:
            for mu in range(self.overlap_series.shape[1]):
                header.append(f"m{mu + 1}")
                cols.append(self.overlap_series[:, mu])
        out = [write_csv(path, header, cols)]
        if snapshot_path is not None:
            ts = [np.full(u.size, t) for t, u in self.snapshots]
            idx = [np.arange(u.size) for _, u in self.snapshots]
            us = [u for _, u in self.snapshots]
            cat = (lambda a: np.concatenate(a) if a else np.zeros(0))
            out.append(write_csv(snapshot_path, ["t", "i", "u_i"], [cat(ts), cat(idx).astype(int), cat(us)]))
        return out


def _check_stability(kappa: np.ndarray, dt: float):
    if kappa.size and dt * float(kappa.max()) >= STABILITY_LIMIT:
        raise ParameterError(
            f"dt * max(kappa) = {dt * float(kappa.max()):.4g} violates the stability guard "
            f"(< {STABILITY_LIMIT}); reduce dt"
        )


def _csr_arrays(matrix: CouplingMatrix):
    csr = matrix.csr()
    csr.sort_indices()
    return (np.ascontiguousarray(csr.indptr, dtype=np.int64),
            np.ascontiguousarray(csr.indices, dtype=np.int64),
            np.ascontiguousarray(csr.data, dtype=float))


def step(state: MarketState, matrix: CouplingMatrix, params: ModelParams, per_asset: PerAsset,
         dt: float, rng: RngStream) -> MarketState:
    """One Euler-Maruyama step; noise is the first draw of the fast and slow sub-streams."""
    N = state.u.size
    if matrix.N != N or per_asset.kappa.size != N:
        raise ParameterError("state, matrix and per-asset arrays disagree on N")
    _check_stability(per_asset.kappa, dt)
    xi = rng.child("fast_noise").generator().standard_normal(N)
    xi0 = rng.child("slow_noise").generator().standard_normal()
    drift = matrix.csr() @ special.erf(state.u)
    u = state.u + dt * (-per_asset.kappa * state.u + drift + params.sigma0 * state.u0 + per_asset.I) \
        + params.sigma * math.sqrt(dt) * xi
    bad = ~np.isfinite(u)
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericalError(f"non-finite log-price at asset {i}", index=i, t=state.t + dt)
    u0 = state.u0 - dt * params.gamma * state.u0 + math.sqrt(2.0 * params.gamma * dt) * xi0
    return MarketState(u, u0, state.t + dt)


class _Integrator:
    """Drives the chunked kernel with noise drawn from fixed sub-streams."""

    def __init__(self, params, matrix, per_asset, schedule, rng, patterns):
        self.params = params
        self.s = schedule
        self.indptr, self.indices, self.data = _csr_arrays(matrix)
        self.kappa = per_asset.kappa
        self.drift = per_asset.I
        self.fast = rng.child("fast_noise").generator()
        self.slow = rng.child("slow_noise").generator()
        # row 0 is an all-ones probe that records the magnetisation
        rows = [np.ones((1, matrix.N))]
        if patterns is not None:
            rows.append(patterns.xi)
        self.pat = np.ascontiguousarray(np.concatenate(rows), dtype=float)
        self.N = matrix.N

    def advance(self, u, u0, n_steps, t_start, stride=0, out=None):
        """Integrate ``n_steps`` steps; returns ``(u0, records written)``."""
        p = self.params
        xi = self.fast.standard_normal((n_steps, self.N))
        xi0 = self.slow.standard_normal(n_steps)
        if out is None:
            out = (np.zeros(0), np.zeros(0), np.zeros((0, self.pat.shape[0])))
        clamp = self.s.clamp_u0 is not None
        u0, n_rec, bad = _backend.kernels.integrate_chunk(
            u, float(u0), self.indptr, self.indices, self.data, self.kappa, self.drift,
            float(p.sigma), float(p.sigma0), float(p.gamma), float(self.s.dt), xi, xi0,
            clamp, int(stride), 0, self.pat, *out)
        if bad >= 0:
            raise NumericalError(f"non-finite log-price at asset {bad}", index=int(bad), t_start=t_start)
        return u0, n_rec


def initial_state(params: ModelParams, per_asset: PerAsset, rng: RngStream,
                  clamp_u0: Optional[float] = None) -> MarketState:
    """Per-asset stationary laws of the free dynamics: ``u_i ~ Normal(0, sigma^2/(2 kappa_i))``."""
    gen = rng.child("init").generator()
    sd = params.sigma / np.sqrt(2.0 * per_asset.kappa)
    u = sd * gen.standard_normal(per_asset.kappa.size)
    u0 = gen.standard_normal() if clamp_u0 is None else clamp_u0
    return MarketState(u, float(u0), 0.0)


def run(params: ModelParams, matrix: CouplingMatrix, schedule: Schedule, rng: RngStream,
        per_asset: Optional[PerAsset] = None, state: Optional[MarketState] = None) -> Trajectory:
    """Simulate one market and record index, slow factor and overlaps.

    ``state`` replaces the default start drawn by :func:`initial_state`.
    """
    N = matrix.N
    if per_asset is None:
        per_asset = draw_per_asset(params, N, rng)
    _check_stability(per_asset.kappa, schedule.dt)
    if state is None:
        state = initial_state(params, per_asset, rng, schedule.clamp_u0)
    elif state.u.size != N:
        raise ParameterError("initial state does not match the coupling matrix")
    elif schedule.clamp_u0 is not None:
        state = MarketState(state.u, schedule.clamp_u0, state.t)
    patterns = matrix.patterns
    integ = _Integrator(params, matrix, per_asset, schedule, rng, patterns)
    u = np.array(state.u)
    u0 = state.u0
    stride = schedule.record_stride

    # warm-up without records
    chunk = max(1, _CHUNK_DOUBLES // N)
    done, warm = 0, schedule.warm_steps
    while done < warm:
        n = min(chunk, warm - done)
        u0, _ = integ.advance(u, u0, n, done * schedule.dt)
        done += n

    n_rec = schedule.n_records
    p = integ.pat.shape[0] - 1
    index = np.empty(n_rec)
    u0s = np.empty(n_rec)
    ovl = np.empty((n_rec, p + 1))
    snaps = []
    # chunk boundaries fall on record steps; snapshots on chunk ends
    per_chunk = schedule.snapshot_stride or max(1, chunk // stride)
    rec = 0
    while rec < n_rec:
        k = min(per_chunk, n_rec - rec)
        out = (index[rec:rec + k], u0s[rec:rec + k], ovl[rec:rec + k])
        u0, got = integ.advance(u, u0, k * stride, (warm + rec * stride) * schedule.dt, stride, out)
        if got != k:
            raise NumericalError("kernel wrote an unexpected number of records", expected=k, got=got)
        rec += k
        if schedule.snapshot_stride:
            snaps.append(((warm + rec * stride) * schedule.dt, u.copy()))
    times = (warm + stride * np.arange(1, n_rec + 1)) * schedule.dt
    return Trajectory(times, u0s, index, ovl[:, 1:].copy() if p else None, ovl[:, 0].copy(), snaps,
                      per_asset, schedule.dt, stride)


def overlaps(state: Union[MarketState, np.ndarray], patterns: PatternSet) -> np.ndarray:
    """``m_mu = (1/N) sum_i xi_i^mu erf(u_i)`` for every stored pattern."""
    u = state.u if isinstance(state, MarketState) else np.asarray(state, dtype=float)
    if u.shape != (patterns.N,):
        raise ParameterError(f"state has shape {u.shape}, patterns need ({patterns.N},)")
    return patterns.xi.astype(float) @ special.erf(u) / patterns.N


def index_returns(traj: Union[Trajectory, np.ndarray], lag: int = 1) -> np.ndarray:
    series = traj.index_series if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if not isinstance(lag, (int, np.integer)) or lag < 1:
        raise ParameterError("lag must be a positive integer")
    if lag >= series.size:
        raise ParameterError(f"lag {lag} too large for a series of length {series.size}")
    return series[lag:] - series[:-lag]


def empirical_return_density(data: Union[Trajectory, np.ndarray], lag: int = 1, bins=100,
                             min_samples: int = 1000) -> DensityCurve:
    """Normalised histogram of returns (or of raw samples when given an array)."""
    samples = index_returns(data, lag) if isinstance(data, Trajectory) else np.asarray(data, float).ravel()
    if samples.size < min_samples:
        raise StatisticsError(f"need at least {min_samples} samples, got {samples.size}")
    dens, edges = np.histogram(samples, bins=bins, density=True)
    return DensityCurve(0.5 * (edges[1:] + edges[:-1]), dens, widths=np.diff(edges),
                        meta={"samples": int(samples.size), "lag": lag})


# --- summary statistics of simulated returns ---

def excess_kurtosis(r: np.ndarray) -> float:
    """Sample excess kurtosis; NaN when the sample has no spread."""
    r = np.asarray(r, dtype=float)
    d = r - r.mean()
    v = np.mean(d * d)
    if not v > 1e-300:
        return math.nan
    return float(np.mean(d**4) / v**2 - 3.0)


def autocorrelation(x: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    v = np.dot(d, d)
    if not v > 0:
        return np.full(len(lags), math.nan)
    return np.array([np.dot(d[:-k], d[k:]) / v if k > 0 else 1.0 for k in lags])


def overlap_volatility_correlation(traj: Trajectory, lag: int = 1, window: int = 50) -> float:
    """Pearson correlation, across windows, of return volatility and overlap activity.

    Volatility is the standard deviation of index returns in a window;
    activity is the largest (over patterns) mean ``|d m_mu / dt|`` there.
    """
    if traj.overlap_series is None:
        raise ParameterError("trajectory has no overlaps")
    r = index_returns(traj, lag)
    dm = np.abs(np.diff(traj.overlap_series, axis=0)) / traj.record_dt
    n_win = min(r.size, dm.shape[0]) // window
    if n_win < 3:
        raise StatisticsError("too few windows for a correlation")
    vol = r[: n_win * window].reshape(n_win, window).std(axis=1)
    act = dm[: n_win * window].reshape(n_win, window, -1).mean(axis=1).max(axis=1)
    if vol.std() == 0 or act.std() == 0:
        return math.nan
    return float(np.corrcoef(vol, act)[0, 1])


def run_replica(args):
    """Worker entry: ``(params, spec, schedule, seed, replica, hebbian)`` -> Trajectory."""
    from .couplings import add_hebbian, generate_couplings, generate_patterns

    params, schedule, seed, replica = args
    rng = RngStream(seed, replica)
    spec = params.coupling_spec
    matrix = generate_couplings(spec, rng.child("couplings"))
    if spec.hebbian_p:
        matrix = add_hebbian(matrix, generate_patterns(spec.N, spec.hebbian_p, rng.child("patterns")))
    return run(params, matrix, schedule, rng)


def run_ensemble(params: ModelParams, schedule: Schedule, seed: int, replicas: Sequence[int],
                 workers: int = 1) -> list[Trajectory]:
    """Independent replicas, returned in ``replicas`` order for any worker count."""
    tasks = [(params, schedule, seed, int(r)) for r in replicas]
    if workers <= 1 or len(tasks) <= 1:
        return [run_replica(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_replica, tasks))
