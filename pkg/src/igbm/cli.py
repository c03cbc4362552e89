"""Command-line entry point: ``igbm {simulate,meanfield,returns,pricing,validate}``.

Every command reads an INI config (defaults when none is given), writes
plot-ready CSVs into ``--out`` and finishes with ``manifest.json`` listing
the resolved config, timings and content hashes of all outputs.

Exit codes: 0 success, 2 config error, 3 numerical non-convergence,
4 validation failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, _backend
from .config import RunConfig
from .errors import ConfigError, NumericalError, ParameterError, StatisticsError
from .io import sha256, write_csv, write_json

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("igbm")


class _Run:
    """Collects output files and timings of one command."""

    def __init__(self, command: str, cfg: RunConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.files: list[Path] = []
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def timed(self, name: str, fn, *args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        self.timings[name] = time.perf_counter() - t
        return res

    def manifest(self, extra: Optional[dict] = None) -> Path:
        self.timings["total"] = time.perf_counter() - self._t0
        payload = {
            "command": self.command,
            "version": __version__,
            "backend": _backend.BACKEND,
            "config": self.cfg.values,
            "timings_s": self.timings,
            "files": {str(p.relative_to(self.out)): sha256(p) for p in sorted(set(self.files))},
        }
        if extra:
            payload.update(extra)
        return write_json(self.out / "manifest.json", payload)


# ---------------------------------------------------------------- simulate

def cmd_simulate(cfg: RunConfig, run: _Run) -> int:
    from .simulator import autocorrelation, excess_kurtosis, index_returns, overlap_volatility_correlation, run_ensemble

    s = cfg["simulate"]
    params, sched = cfg.model_params(), cfg.schedule()
    replicas = list(range(s["replicas"]))
    trajs = run.timed("integrate", run_ensemble, params, sched, cfg["run"]["seed"], replicas, cfg["run"]["workers"])
    summary = {"lag": s["lag"], "record_dt": sched.record_dt, "replicas": []}
    for r, tr in zip(replicas, trajs):
        tag = "" if len(replicas) == 1 else f"_r{r:03d}"
        snap = run.out / f"snapshots{tag}.csv" if sched.snapshot_stride else None
        run.add(*tr.save(run.out / f"trajectory{tag}.csv", snap))
        ret = index_returns(tr, s["lag"])
        run.add(write_csv(run.out / f"returns{tag}.csv", ["t", "return"], [tr.times[s["lag"]:], ret]))
        acf = autocorrelation(np.abs(ret), s["acf_lags"])
        row = {
            "replica": r,
            "n_returns": int(ret.size),
            "excess_kurtosis": excess_kurtosis(ret),
            "abs_return_acf": {str(k): v for k, v in zip(s["acf_lags"], acf.tolist())},
        }
        if tr.overlap_series is not None:
            try:
                row["overlap_vol_corr"] = overlap_volatility_correlation(tr, s["lag"], s["vol_window"])
            except StatisticsError as exc:
                log.warning("overlap/volatility correlation skipped: %s", exc)
                row["overlap_vol_corr"] = math.nan
        summary["replicas"].append(row)
    run.add(write_json(run.out / "summary.json", summary))
    return EXIT_OK


# --------------------------------------------------------------- meanfield

OP_FIELDS = ("m", "q", "chi", "Chat0")


def cmd_meanfield(cfg: RunConfig, run: _Run, mode: str) -> int:
    from . import meanfield as mf

    m = cfg["meanfield"]
    params, grid, ctrl, workers = cfg.model_params(), cfg.theta_grid(), cfg.solver_control(), cfg["run"]["workers"]
    if mode == "solve":
        op = run.timed("solve", mf.solve_fixed_point, params, m["u0"], grid, ctrl)
        run.add(write_csv(run.out / "meanfield_solve.csv", ["u0", *OP_FIELDS, "iters", "residual"],
                          [[op.u0], [op.m], [op.q], [op.chi], [op.Chat0], [op.iterations], [op.residual]]))
        run.add(write_csv(run.out / "q_tau.csv", ["tau", "q_tau"], [op.tau, op.q_tau]))
    elif mode == "u0_curve":
        for k0 in m["kappa0_values"]:
            ops = run.timed(f"u0_curve_{k0!r}", mf.u0_curve, params.with_kappa0(k0), m["u0_values"], grid, ctrl,
                            workers)
            cols = [[o.u0 for o in ops]] + [[getattr(o, f) for o in ops] for f in OP_FIELDS]
            run.add(write_csv(run.out / f"u0_curve_kappa0_{k0!r}.csv", ["u0", *OP_FIELDS], cols))
    elif mode == "phase_scan":
        scan = run.timed("phase_scan", mf.phase_scan, params, "J0", m["J0_values"], grid, ctrl, m["threshold"],
                         m["init_m"], 1e-4, workers)
        pts = scan.points
        run.add(write_csv(run.out / "phase_scan.csv", ["J0", *OP_FIELDS, "iterations", "converged"],
                          [[p.axis_value for p in pts]] + [[getattr(p, f) for p in pts] for f in OP_FIELDS]
                          + [[p.iterations for p in pts], [int(p.converged) for p in pts]]))
        curve = run.timed("boundary", mf.boundary_curve, params, m["kappa0_values"], m["J0_lo"], m["J0_hi"], grid,
                          ctrl, 1e-4, workers)
        run.add(write_csv(run.out / "boundary.csv", ["kappa0", "J0c"], [[k for k, _ in curve], [c for _, c in curve]]))
        run.add(write_json(run.out / "phase_scan.json", {"J0c_from_scan": scan.boundary,
                                                          "threshold": scan.threshold}))
        if any(not p.converged for p in pts) or any(math.isnan(c) for _, c in curve):
            log.error("some scan points or boundary points did not converge")
            return EXIT_NUMERICAL
    else:
        raise ConfigError(f"unknown meanfield mode {mode!r}")
    return EXIT_OK


# ----------------------------------------------------------------- returns

def cmd_returns(cfg: RunConfig, run: _Run, regime: str, tau: float) -> int:
    from . import returns as rt
    from .model import GammaKappa

    r = cfg["returns"]
    params = cfg.model_params()
    x = np.linspace(-r["grid_max"], r["grid_max"], r["grid_points"])
    if regime == rt.QUASI_STATIONARY:
        num = run.timed("numeric", rt.qs_return_pdf, x, tau, params)
        gamma_law = isinstance(params.kappa_dist, GammaKappa)
        asy = rt.qs_return_pdf_asymptotic(x, params).density if gamma_law else np.full(x.size, math.nan)
        run.add(write_csv(run.out / "returns_quasi_stationary.csv", ["du", "pdf_numeric", "pdf_asymptotic"],
                          [x, num.density, asy]))
        side = {"regime": regime, "tau": tau}
        if gamma_law:
            side["variance_closed_form"] = rt.qs_return_variance(tau, params)
            # diffusive limit: variance -> sigma^2 tau when kappa0 tau << 1
            side["variance_numeric_on_grid"] = num.moment(2)
            ratio = num.moment(2) / (params.sigma**2 * tau)
            short = params.kappa_dist.kappa0 * tau <= 0.01 * (1 + 1e-9)
            side["diffusive_check"] = {"kappa0_tau": params.kappa_dist.kappa0 * tau,
                                       "variance_over_sigma2_tau": ratio,
                                       "applies": short, "passed": bool(abs(ratio - 1) < 0.01) if short else None}
            core = np.abs(x) <= 5 * params.sigma / math.sqrt(params.kappa_dist.kappa0)
            if core.any():
                side["max_rel_gap_core"] = float(np.max(np.abs(num.density[core] - asy[core]) / asy[core]))
        run.add(write_json(run.out / "returns_quasi_stationary.json", side))
        return EXIT_OK
    scale = rt.TimeScale(regime, None if regime == rt.LONG else tau)
    u0_grid = rt.table_nodes(r["table_u0_max"], r["table_points"])
    table = run.timed("op_table", rt.op_table, params, u0_grid, cfg.theta_grid(), cfg.solver_control())
    run.add(write_csv(run.out / "op_table.csv", ["u0", *OP_FIELDS],
                      [table.u0] + [table.column(f) for f in OP_FIELDS]))
    curve = run.timed("mixture", rt.slow_return_pdf, x, scale, params, table, r["n_kappa"], r["n_z"], r["n_u0"], r["n_d"])
    run.add(write_csv(run.out / f"returns_{regime}.csv", ["du", "pdf"], [x, curve.density]))
    run.add(write_json(run.out / f"returns_{regime}.json", curve.meta | {"integral_on_grid": curve.integral()}))
    return EXIT_OK


# ----------------------------------------------------------------- pricing

def cmd_pricing(cfg: RunConfig, run: _Run, variant: str) -> int:
    from . import pricing as pr
    from .meanfield import solve_fixed_point
    from .model import FixedKappa

    c = cfg["pricing"]
    params, u0 = cfg.model_params(), c["u0"]
    x = np.linspace(-c["grid_max"], c["grid_max"], c["grid_points"])
    if variant == "noninteracting":
        closed = run.timed("closed", pr.noninteracting_pricing_pdf_closed, x, params, u0)
        quad = run.timed("quadrature", pr.noninteracting_pricing_pdf_quadrature, x, params, u0)
        run.add(write_csv(run.out / "pricing_noninteracting.csv", ["ubar", "pdf_closed", "pdf_quadrature"],
                          [x, closed.density, quad.density]))
        side = {"u0": u0, "max_abs_diff": float(np.max(np.abs(closed.density - quad.density)))}
    else:
        ctrl, grid = cfg.solver_control(), cfg.theta_grid()
        op = run.timed("solve", solve_fixed_point, params, u0, grid, ctrl)
        if variant == "interacting":
            inter = run.timed("interacting", pr.interacting_pricing_pdf, x, pr.PricingContext(params, u0, op, c["kappa"]))
            free = pr.noninteracting_pricing_pdf_quadrature(x, params.replace(kappa_dist=FixedKappa(c["kappa"])), u0)
        elif variant == "market":
            inter = run.timed("market", pr.market_pricing_pdf, x, pr.PricingContext(params, u0, op))
            free = pr.market_pricing_pdf(x, pr.PricingContext(params, u0))
        else:
            raise ConfigError(f"unknown pricing variant {variant!r}")
        run.add(write_csv(run.out / f"pricing_{variant}.csv", ["ubar", "pdf_interacting", "pdf_noninteracting"],
                          [x, inter.density, free.density]))
        side = {"u0": u0, "order_parameters": {f: getattr(op, f) for f in OP_FIELDS},
                "meta": inter.meta, "grid_moments": {}}
        for name, cv in (("interacting", inter), ("noninteracting", free)):
            side["grid_moments"][name] = {"integral": cv.integral(), "mean": cv.mean(),
                                          "variance": cv.variance(), "skewness": cv.skewness()}
    run.add(write_json(run.out / f"pricing_{variant}.json", side))
    return EXIT_OK


# ---------------------------------------------------------------- validate

def cmd_validate(cfg: RunConfig, run: _Run, only: Optional[Sequence[int]]) -> int:
    from .validation import run_all

    report = run_all(only, workers=cfg["run"]["workers"])
    for item in report["criteria"]:
        status = "PASS" if item["passed"] else "FAIL"
        print(f"[{status}] {item['id']:>2} {item['name']}: {item['threshold']}")
    run.add(write_json(run.out / "validation_report.json", report))
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# -------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", type=Path, help="override [run] out")
    common.add_argument("--workers", type=int, help="override [run] workers")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    p = argparse.ArgumentParser(prog="igbm", description="Interacting geometric Brownian motion market model.")
    p.add_argument("--version", action="version", version=f"igbm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate the microscopic market")
    mf = sub.add_parser("meanfield", parents=[common], help="solve the order-parameter equations")
    mf.add_argument("--mode", choices=("solve", "u0_curve", "phase_scan"), help="override [meanfield] mode")
    rt = sub.add_parser("returns", parents=[common], help="log-return distributions")
    rt.add_argument("--regime", choices=("quasi_stationary", "intermediate", "long"), help="override [returns] regime")
    rt.add_argument("--tau", type=float, help="override [returns] tau")
    pr = sub.add_parser("pricing", parents=[common], help="equilibrium log-price distributions")
    pr.add_argument("--variant", choices=("noninteracting", "interacting", "market"),
                    help="override [pricing] variant")
    va = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    va.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")], help="comma-separated check ids")
    return p


def _resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.defaults()
    changes = {k: getattr(args, k) for k in ("seed", "workers") if getattr(args, k) is not None}
    if args.out is not None:
        changes["out"] = str(args.out)
    return cfg.override("run", **changes) if changes else cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        out = Path(cfg["run"]["out"])
        out.mkdir(parents=True, exist_ok=True)
        run = _Run(args.command, cfg, out)
        if args.command == "simulate":
            code = cmd_simulate(cfg, run)
        elif args.command == "meanfield":
            code = cmd_meanfield(cfg, run, args.mode or cfg["meanfield"]["mode"])
        elif args.command == "returns":
            code = cmd_returns(cfg, run, args.regime or cfg["returns"]["regime"],
                               args.tau if args.tau is not None else cfg["returns"]["tau"])
        elif args.command == "pricing":
            code = cmd_pricing(cfg, run, args.variant or cfg["pricing"]["variant"])
        else:
            code = cmd_validate(cfg, run, args.only)
        run.manifest({"exit_code": code})
        return code
    except (ConfigError, ParameterError, StatisticsError) as exc:
        print(f"igbm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        diag = getattr(exc, "diagnostics", {})
        print(f"igbm: numerical failure: {exc} {diag if diag else ''}".rstrip(), file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"igbm: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
