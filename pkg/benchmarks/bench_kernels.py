"""Time the compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py`` after an editable install.
Both backends get identical inputs; the script also checks that their
outputs agree before reporting timings.
"""
import argparse
import time

import numpy as np

from igbm import _kernels_py
from igbm.couplings import CouplingSpec, generate_couplings
from igbm.numerics import RngStream
from igbm.simulator import _csr_arrays

try:
    from igbm import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def chunk_case(N, steps, mean_degree, stride):
    spec = CouplingSpec(N=N, mean_degree=mean_degree, J0=0.5, J=0.5, alpha=0.5)
    J = generate_couplings(spec, RngStream(0))
    gen = np.random.default_rng(0)
    xi, xi0 = gen.standard_normal((steps, N)), gen.standard_normal(steps)
    pat = np.sign(gen.standard_normal((3, N)))
    n_rec = steps // stride
    fixed = [*_csr_arrays(J), gen.uniform(0.05, 1.0, N), gen.normal(0, 0.3, N), 0.1, 1.0, 1e-4, 0.01, xi, xi0,
             False, stride, 0, pat]

    def make():
        outs = (np.zeros(n_rec), np.zeros(n_rec), np.zeros((n_rec, 3)))
        return [np.zeros(N), 0.5, *fixed, *outs]

    return make


def mixture_case(n_x, K):
    gen = np.random.default_rng(1)
    x = np.linspace(-5, 5, n_x)
    lo = gen.normal(0, 2, K)
    hi = lo + gen.exponential(0.5, K)
    var = gen.uniform(0.01, 1.0, K)
    w = gen.dirichlet(np.ones(K))
    return x, lo, hi, var, w


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--steps", type=int, default=20000)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rows = []
    for N, c in ((50, float(49)), (500, 20.0), (2000, 100.0)):
        steps = max(args.steps * 50 // N, 200)
        make = chunk_case(N, steps, c, 100)

        def run(mod):
            a = make()
            mod.integrate_chunk(*a)
            return a[0]

        tc, uc = best_of(lambda: run(compiled), args.repeats)
        tp, up = best_of(lambda: run(_kernels_py), args.repeats)
        assert np.allclose(uc, up, rtol=1e-10, atol=1e-12)
        rows.append((f"integrate_chunk N={N} c={c:g} steps={steps}", tc, tp))

    x, lo, hi, var, w = mixture_case(401, 20000)
    for name in ("gaussian_mixture_pdf", "smeared_mixture_pdf"):
        args_ = (x, lo, var, w) if name == "gaussian_mixture_pdf" else (x, lo, hi, var, w)
        tc, dc = best_of(lambda: getattr(compiled, name)(*args_), args.repeats)
        tp, dp = best_of(lambda: getattr(_kernels_py, name)(*args_), args.repeats)
        assert np.allclose(dc, dp, rtol=1e-10)
        rows.append((f"{name} grid=401 components=20000", tc, tp))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'cython s':>10}  {'python s':>10}  {'speed-up':>8}")
    for name, tc, tp in rows:
        print(f"{name:<{width}}  {tc:>10.4f}  {tp:>10.4f}  {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
