"""Compare the compiled and numpy simplex kernels.

Times three workloads with each available kernel:

* single feasibility LPs on random instances,
* the Garver robust MILP (branch and bound with warm-started children),
* random dense LPs.

Usage: ``python3 benchmarks/bench_kernel.py [--repeat N]``
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from tepkit import lp
from tepkit.cases import garver, garver_scenarios, random_instance
from tepkit.feasibility import assemble_feasibility_lp, ensure_big_m
from tepkit.heuristic import robust_milp
from tepkit.lp.kernel import available


def feasibility_lps(n=30):
    out = []
    rng = np.random.default_rng(0)
    for seed in range(n):
        inst = random_instance(seed)
        net = ensure_big_m(inst.network)
        x = rng.integers(0, 2, len(net.candidates))
        out.append(assemble_feasibility_lp(net, x, inst.scenarios[0]))
    return out


def dense_lps(n=10, m=60, k=80):
    rng = np.random.default_rng(1)
    out = []
    for _ in range(n):
        A = rng.uniform(0, 1, (m, k))
        out.append(lp.LinearProgram(-rng.uniform(1, 2, k), A, ["<="] * m, rng.uniform(5, 10, m),
                                    upper=np.full(k, 3.0)))
    return out


def garver_milp():
    net = ensure_big_m(garver())
    return robust_milp(net, garver_scenarios())


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    feas, dense, milp = feasibility_lps(), dense_lps(), garver_milp()
    workloads = {
        "feasibility LPs (30)": lambda k: [lp.solve_lp(q, kernel=k) for q in feas],
        "dense LPs (10)": lambda k: [lp.solve_lp(q, kernel=k) for q in dense],
        "Garver robust MILP": lambda k: lp.solve_mip(milp, kernel=k),
    }
    kernels = available()
    print(f"{'workload':24s}" + "".join(f"{k:>12s}" for k in kernels) + ("     speedup" if len(kernels) > 1 else ""))
    for name, work in workloads.items():
        t = {k: timed(lambda: work(k), args.repeat) for k in kernels}
        row = f"{name:24s}" + "".join(f"{t[k]:11.3f}s" for k in kernels)
        if "cython" in t and "python" in t:
            row += f"{t['python'] / t['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
