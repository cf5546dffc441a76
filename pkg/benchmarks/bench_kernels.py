"""Compare the numba and numpy kernel backends.

Times two workloads on both backends and checks that they agree:

* path: one 180-day trajectory (tau = 7, u = 300, dt = 0.01), scalar kernel
* batch: final states for a batch of random release vectors (tau = 7, T = 70)

Run:  python benchmarks/bench_kernels.py [--batch 256] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from allee_release import _kernels
from allee_release.model import derive_params
from allee_release.simulate import make_grid


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(batch: int, repeat: int, seed: int = 0) -> list[dict]:
    p = derive_params().as_array()
    rows = []

    g = make_grid(7.0, 180.0, 0.01)
    amounts = np.full(26, 300.0)
    g2 = make_grid(7.0, 70.0, 0.01)
    U = np.random.default_rng(seed).uniform(0.0, 600.0, (batch, 10))
    s1_0 = np.full(batch, 374.0)
    s2_0 = np.zeros(batch)

    results = {}
    for name in ("numba", "numpy"):
        k = _kernels.kernels_for(name)
        # first call compiles under numba; keep it out of the timings
        k.integrate_path(p, 374.0, 0.0, amounts, 0, g.steps_per_period, 7.0, g.dt, g.n_steps, g.tail, 1)
        k.integrate_final(p, s1_0[:2], s2_0[:2], U[:2], 1, g2.steps_per_period, g2.dt, g2.n_steps, g2.tail)

        t_path, path = _best_of(
            lambda: k.integrate_path(p, 374.0, 0.0, amounts, 0, g.steps_per_period, 7.0, g.dt, g.n_steps, g.tail, 1),
            repeat,
        )
        t_batch, fin = _best_of(
            lambda: k.integrate_final(p, s1_0, s2_0, U, 1, g2.steps_per_period, g2.dt, g2.n_steps, g2.tail),
            repeat,
        )
        results[name] = (path, fin)
        rows.append({"backend": name, "path_s": t_path, "batch_s": t_batch})

    (pa, fa), (pb, fb) = results["numba"], results["numpy"]
    path_err = float(np.max(np.abs(pa[1] - pb[1]) + np.abs(pa[2] - pb[2])))
    batch_err = float(np.max(np.abs(fa[0] - fb[0]) + np.abs(fa[1] - fb[1])))
    for r in rows:
        r["path_max_abs_diff"] = path_err
        r["batch_max_abs_diff"] = batch_err
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = bench(args.batch, args.repeat)
    print(f"{'backend':<8} {'path [s]':>10} {'batch [s]':>10}")
    for r in rows:
        print(f"{r['backend']:<8} {r['path_s']:>10.4f} {r['batch_s']:>10.4f}")
    nb, npy = rows
    print(f"speedup  {npy['path_s'] / nb['path_s']:>10.1f}x {npy['batch_s'] / nb['batch_s']:>10.1f}x")
    print(f"max |numba - numpy|: path {nb['path_max_abs_diff']:.3g}, batch {nb['batch_max_abs_diff']:.3g}")


if __name__ == "__main__":
    main()
