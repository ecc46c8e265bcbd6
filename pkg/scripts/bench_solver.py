"""Time the surround solve against grid size and space constant.

Cold solves start from zero; warm solves start from the previous frame of a
drifting texture, as in the per-frame pipeline loop.
"""

import argparse
import time

import numpy as np

from csdvs.surround import MeshParams, SolveInfo, solve_steady_state


def texture(n, shift, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    base = np.log(rng.uniform(0.05, 1.0, (n, n + 64)) + 0.02)
    return base[:, shift:shift + n]


def bench(n, L, frames, tol):
    p = MeshParams(L)
    cold = SolveInfo()
    t0 = time.perf_counter()
    v = solve_steady_state(texture(n, 0), p, tol=tol, info=cold)
    t_cold = time.perf_counter() - t0
    iters = []
    t0 = time.perf_counter()
    for k in range(1, frames + 1):
        info = SolveInfo()
        v = solve_steady_state(texture(n, k % 64), p, tol=tol, x0=v, info=info)
        iters.append(info.iterations)
    t_warm = (time.perf_counter() - t0) / frames
    return t_cold, cold.iterations, t_warm, float(np.mean(iters))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="32,64,128,256,512")
    ap.add_argument("--L", default="2,10,50")
    ap.add_argument("--frames", type=int, default=20)
    ap.add_argument("--tol", type=float, default=1e-8)
    args = ap.parse_args()

    # compile outside the timed region
    solve_steady_state(np.ones((8, 8)), MeshParams(3.0))
    print(f"{'n':>5} {'L':>6} {'cold ms':>9} {'cold it':>8} {'warm ms':>9} {'warm it':>8}")
    for n in map(int, args.sizes.split(",")):
        for L in map(float, args.L.split(",")):
            tc, ic, tw, iw = bench(n, L, args.frames, args.tol)
            print(f"{n:5d} {L:6g} {tc * 1e3:9.2f} {ic:8d} {tw * 1e3:9.2f} {iw:8.1f}")


if __name__ == "__main__":
    main()
