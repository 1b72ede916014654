"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N] [--trials N]

Times a single Levenberg-Marquardt fit, the decay-weighted sum, and an
end-to-end Monte-Carlo run with each backend swapped in.
"""

import argparse
import timeit

import numpy as np

from spinmetro import AcquisitionGrid, PowerLaw, SignalParams, SpinSystem, _pykernels, kernels
from spinmetro.estimation import monte_carlo

try:
    from spinmetro import _ckernels
except ImportError:
    _ckernels = None


def _trace(m=512, ts=0.02, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(m) * ts
    x = np.exp((0.1j - 1.0) * t) + 0.01 * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return np.ascontiguousarray(x.real), np.ascontiguousarray(x.imag), ts


def _best(stmt, repeat, number):
    return min(timeit.repeat(stmt, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=300)
    args = ap.parse_args()

    impls = {"python": _pykernels}
    if _ckernels is not None:
        impls["compiled"] = _ckernels
    else:
        print("compiled kernels not built; timing the Python fallback only")

    re, im, ts = _trace()
    sys = SpinSystem(10, decoherence=PowerLaw(0.11))
    grid = AcquisitionGrid(0.02, 512, 0.7)
    params = SignalParams(1.0, 0.01, 0.1)

    rows = []
    for name, impl in impls.items():
        fit = _best(lambda: impl.lm_fit(re, im, ts, 0.0, 1.0, 0.9, -0.8, 0.12, 1e-10, 500), args.repeat, 50)
        ssum = _best(lambda: impl.decay_weighted_square_sum(3.0, ts, 4096, -1.0), args.repeat, 200)
        saved = kernels.lm_fit
        kernels.lm_fit = impl.lm_fit
        try:
            mc = _best(lambda: monte_carlo("quantum", sys, grid, params, args.trials, 1), 1, 1)
        finally:
            kernels.lm_fit = saved
        rows.append((name, fit, ssum, mc))

    print(f"{'backend':<10}{'lm_fit (ms)':>14}{'square sum (us)':>18}{f'MC {args.trials} trials (s)':>22}")
    for name, fit, ssum, mc in rows:
        print(f"{name:<10}{fit * 1e3:>14.3f}{ssum * 1e6:>18.2f}{mc:>22.3f}")
    if len(rows) == 2:
        (_, f0, s0, m0), (_, f1, s1, m1) = rows
        print(f"{'speedup':<10}{f0 / f1:>13.1f}x{s0 / s1:>17.1f}x{m0 / m1:>21.1f}x")


if __name__ == "__main__":
    main()
