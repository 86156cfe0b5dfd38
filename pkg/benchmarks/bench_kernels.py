"""Benchmark of the compiled scenario kernel against the Python fallback.

Runs the two hot per-mode pair systems (tanh-cosmology in conformal time,
polarized-wave cavity mode in coordinate time) at the production tolerance
and reports wall times, step-equivalent throughput and cross-backend
agreement.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from bogoflow import kernels

CASES = [
    ("cosmology pair, n=1..5, eta in [-10, 10]",
     kernels.FLRW_TANH,
     [[2.5, 1.5, 1.0, 2 * np.pi * n / 1000.0, 0.1] for n in range(1, 6)],
     -10.0, np.linspace(-10.0, 10.0, 601)),
    ("cavity mode (1,1,1), eps=1e-5, t in [0, 1000]",
     kernels.GW_MODE,
     [[np.pi ** 2, np.pi ** 2 / 4, np.pi ** 2, 0.0, 1e-5, 3 * np.pi, 0.0]],
     0.0, np.linspace(0.0, 1000.0, 601)),
    ("cavity mode (1,1,1), eps=1e-3, t in [0, 2000]",
     kernels.GW_MODE,
     [[np.pi ** 2, np.pi ** 2 / 4, np.pi ** 2, 0.0, 1e-3, 3 * np.pi, 0.0]],
     0.0, np.linspace(0.0, 2000.0, 601)),
]

TOL = 1e-10


def run_case(impl, family, param_sets, x0, samples):
    out = []
    for params in param_sets:
        out.append(impl.pair_evolution(family, params, x0, samples,
                                       rtol=TOL, atol=TOL))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled kernel not built; benchmarking the fallback only")

    width = max(len(c[0]) for c in CASES)
    header = f"{'case':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    print(header + ("     speedup" if len(backends) == 2 else ""))
    print("-" * len(header))

    for name, family, param_sets, x0, samples in CASES:
        times = {}
        results = {}
        for backend in backends:
            impl = kernels.get_backend(backend)
            run_case(impl, family, param_sets, x0, samples)  # warm up
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                results[backend] = run_case(impl, family, param_sets, x0,
                                            samples)
                best = min(best, time.perf_counter() - t0)
            times[backend] = best
        row = f"{name:<{width}}  " + "".join(
            f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"  {times['python'] / times['compiled']:>9.1f}x"
        print(row)
        if len(backends) == 2:
            diff = max(
                np.max(np.abs(np.asarray(a) - np.asarray(b)))
                for ra, rb in zip(results["python"], results["compiled"])
                for a, b in zip(ra, rb))
            print(f"{'':<{width}}  max cross-backend difference: {diff:.2e}")


if __name__ == "__main__":
    main()
