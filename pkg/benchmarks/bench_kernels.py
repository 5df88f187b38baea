"""Timing comparison of the compiled assembly kernels against the numpy fallback.

Runs the three local-assembly kernels on randomly generated element batches at
a few mesh sizes and prints best-of-N wall times per backend.  Usage:

    python3 benchmarks/bench_kernels.py [--sizes 3200,12800,51200] [--repeats 5]
"""

import argparse
import time

import numpy as np

from alefem._kernels import fallback

try:
    from alefem._kernels import _core
except ImportError:
    _core = None


def make_inputs(rng, n_e, nq, nloc):
    dets = rng.uniform(0.1, 2.0, n_e)
    gradhat = rng.standard_normal((n_e, nq, nloc, 2))
    cof = rng.standard_normal((n_e, 2, 2))
    jac = rng.uniform(0.2, 3.0, n_e)
    wq = rng.uniform(0.01, 0.2, nq)
    phi = rng.standard_normal((nq, nloc))
    lam = rng.dirichlet(np.ones(3), size=nq)
    flux = rng.standard_normal((n_e, 3, 2))
    divflux = rng.standard_normal(n_e)
    fq = rng.standard_normal((n_e, nq))
    return dets, gradhat, cof, jac, wq, phi, lam, flux, divflux, fq


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(n_e, nq, nloc, repeats, rng):
    dets, gradhat, cof, jac, wq, phi, lam, flux, divflux, fq = make_inputs(rng, n_e, nq, nloc)
    calls = {
        "stiffness": lambda m: m.stiffness_locals(dets, gradhat, cof, jac, wq, 0.7),
        "motion": lambda m: m.motion_locals(dets, phi, gradhat, flux, lam, divflux, wq),
        "load": lambda m: m.load_locals(dets, jac, phi, fq, wq, 1.3),
    }
    rows = []
    for name, call in calls.items():
        t_np = best_of(lambda: call(fallback), repeats)
        t_c = best_of(lambda: call(_core), repeats) if _core is not None else None
        rows.append((name, t_np, t_c))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="3200,12800,51200",
                        help="comma-separated element counts")
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeat count")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if _core is None:
        print("compiled backend unavailable; timing the numpy fallback only")

    rng = np.random.default_rng(args.seed)
    header = f"{'kernel':<10} {'elems':>7} {'nloc':>4} {'nq':>3} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}"
    # nloc/nq pairs match linear and quadratic elements at their default rules
    for nloc, nq in ((3, 3), (6, 12)):
        print(f"\ndegree {'1' if nloc == 3 else '2'} elements")
        print(header)
        for n_e in sizes:
            for name, t_np, t_c in bench_case(n_e, nq, nloc, args.repeats, rng):
                if t_c is None:
                    print(f"{name:<10} {n_e:>7} {nloc:>4} {nq:>3} {t_np * 1e3:>10.3f} {'-':>12} {'-':>8}")
                else:
                    print(f"{name:<10} {n_e:>7} {nloc:>4} {nq:>3} {t_np * 1e3:>10.3f} "
                          f"{t_c * 1e3:>12.3f} {t_np / t_c:>8.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
