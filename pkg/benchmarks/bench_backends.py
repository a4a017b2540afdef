"""Compare the compiled and numpy backends on one structured reflection and
on a short walk average.

    python benchmarks/bench_backends.py [--sizes 6 8 10 12 14] [--repeat 5]

Column counts are 2^k (first-marked trees with 2^(k-2) - 2 queries).
"""

import argparse
import time

import numpy as np

from spandt import _backend, dtree, kernel, mgraph


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def walk_average(plan, signs, psi, steps, backend):
    """(1/N) sum_j U^j psi with U = diag(signs) R."""
    if backend == "cython":
        return plan.compiled().walk_average(signs, psi, steps, False)[0]
    cur, acc = psi.copy(), psi.copy()
    for _ in range(steps - 1):
        cur = signs * plan.apply_numpy(cur)
        acc += cur
    return acc / steps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[6, 8, 10, 12, 14])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200, help="walk steps for the averaging benchmark")
    args = ap.parse_args(argv)
    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'S':>7} {'flops/R':>10} " + " ".join(f"{b + ' R [us]':>15}" for b in backends)
          + " " + " ".join(f"{b + ' walk [ms]':>16}" for b in backends) + "  speedup")
    rng = np.random.default_rng(0)
    for k in args.sizes:
        tree = dtree.first_marked_tree(2 ** (k - 2) - 2)
        dg = mgraph.build_decision_graph(tree)
        plan = kernel.ReflectionPlan(dg, 0.3, 0.8, 0.6)
        y = rng.standard_normal(dg.n_cols) + 0j
        signs = np.where(mgraph.available_columns(dg, (0,) * tree.n), 1.0, -1.0)
        refl, walk = {}, {}
        outs = {}
        for b in backends:
            outs[b] = plan.apply(y, backend=b)   # warm plans and caches
            refl[b] = best_of(lambda: plan.apply(y, backend=b), args.repeat)
            walk[b] = best_of(lambda: walk_average(plan, signs, y, args.steps, b), max(1, args.repeat // 2))
        if len(outs) == 2:
            assert np.allclose(outs["python"], outs["cython"], atol=1e-10)
        speed = walk["python"] / walk["cython"] if "cython" in walk else 1.0
        print(f"{dg.n_cols:>7} {plan.flops():>10} "
              + " ".join(f"{refl[b] * 1e6:>15.1f}" for b in backends) + " "
              + " ".join(f"{walk[b] * 1e3:>16.2f}" for b in backends) + f"  {speed:6.1f}x", flush=True)


if __name__ == "__main__":
    main()
