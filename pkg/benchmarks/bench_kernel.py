"""Events per second of the compiled kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernel.py [--t-final 0.02] [--repeat 3]
"""
import argparse
import time

from hdldev.ctmc import SimParams, simulate
from hdldev.ctmc import _fallback
from hdldev.lattice import InitialProfile, Perturbation, RateFunction, ReactionSpec, TorusGrid

try:
    from hdldev.ctmc import _kernel
except ImportError:
    _kernel = None

CASES = [
    ("static H, N=16, ell=256", 16, 256, Perturbation.sine_mode(0.3, 1)),
    ("dynamic H, N=16, ell=256", 16, 256, Perturbation.sine_mode(0.3, 1, "cosine", 3.0)),
    ("H=0, N=32, ell=1024", 32, 1024, Perturbation.zero()),
]


def timed(params, counts, t_final, backend, repeat):
    best, n_events = float("inf"), 0
    for r in range(repeat):
        t0 = time.perf_counter()
        res = simulate(params, counts, t_final, seed=1, replica=r, record=False, backend=backend)
        best = min(best, time.perf_counter() - t0)
        n_events = res.n_events
    return n_events, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-final", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    reaction = ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(0.5))
    print(f"{'case':28s} {'backend':8s} {'events':>10s} {'seconds':>9s} {'ns/event':>9s}")
    for label, n, ell, h in CASES:
        params = SimParams(TorusGrid(n), ell, reaction, h)
        counts = InitialProfile.smooth(1.0, 0.5).counts(params.grid, ell)
        timings = {}
        for name, backend in (("cython", _kernel), ("python", _fallback)):
            if backend is None:
                continue
            # the fallback is slow: run it on a tenth of the horizon
            t_final = args.t_final if name == "cython" else args.t_final / 10
            ev, sec = timed(params, counts, t_final, backend, args.repeat)
            timings[name] = sec / ev
            print(f"{label:28s} {name:8s} {ev:10d} {sec:9.3f} {1e9 * sec / ev:9.1f}")
        if len(timings) == 2:
            print(f"{'':28s} speedup {timings['python'] / timings['cython']:.0f}x")


if __name__ == "__main__":
    main()
