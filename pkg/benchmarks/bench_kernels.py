"""Compare the compiled and numpy p-energy kernels.

Times energy-only, energy+gradient and energy+gradient+Hessian-diagonal
calls on annulus meshes of increasing size, checks that both backends agree,
and times a complete capacity solve with each backend.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from pneumann import kernels
from pneumann.capacity import CapacityProblem, cap_p
from pneumann.discrete import discretize
from pneumann.geometry import DATA, OUTER, build_annulus_mesh


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--p", type=float, default=1.5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy kernel is available")
    rng = np.random.default_rng(0)
    print(f"{'cells':>8} {'mode':>10} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for res in [(16, 64), (32, 128), (64, 256)]:
        disc = discretize(build_annulus_mesh(1.0, 4.0, *res))
        u = rng.normal(size=disc.n)
        ref = None
        for mode, flags in [("energy", (False, False)), ("grad", (True, False)), ("grad+diag", (True, True))]:
            row = {}
            for name, fn in backends.items():
                call = lambda: fn(disc.cells, disc.grads, disc.vol, u, args.p, 1e-8, *flags)  # noqa: E731
                row[name] = best_of(call, args.repeat)
                out = call()
                if ref is None or mode != ref[0]:
                    ref = (mode, out)
                else:
                    assert abs(out[0] - ref[1][0]) <= 1e-12 * abs(ref[1][0])
                    if flags[0]:
                        assert np.allclose(out[1], ref[1][1], rtol=1e-12, atol=1e-14)
            speed = row["python"] / row["cython"] if "cython" in row else float("nan")
            print(f"{disc.n_cells:>8} {mode:>10} " + " ".join(f"{row[b] * 1e3:>10.3f}ms" for b in backends)
                  + f"   {speed:6.1f}x")

    prob = CapacityProblem(build_annulus_mesh(1.0, 4.0, 32, 128), DATA, OUTER)
    for name, fn in backends.items():
        saved = kernels._impl
        kernels._impl = fn
        try:
            t0 = time.perf_counter()
            est = cap_p(prob, args.p)
            dt = time.perf_counter() - t0
        finally:
            kernels._impl = saved
        print(f"capacity solve p={args.p:g} [{name}]: cap={est.value:.10f} "
              f"iterations={est.report.iterations} time={dt:.3f}s")


if __name__ == "__main__":
    main()
