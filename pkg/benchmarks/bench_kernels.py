"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each row times one call of a hot kernel on both backends and reports the
speedup and the largest absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from kerrqrc import _fallback
from kerrqrc.dynamics import tanh_position
from kerrqrc.fock import density_matrix, fock_state
from kerrqrc.signals import mackey_glass

try:
    from kerrqrc import _kernels
except ImportError:
    _kernels = None


def cases():
    drive = mackey_glass(t_max=199.0).samples
    for d in (10, 20, 25):
        rho = density_matrix(fock_state(6, d))
        obs = tanh_position(d)
        yield (f"lindblad window d_t={d} (200 steps)", "propagate_lindblad",
               (rho, drive, 0.05, 0.1, 1.2, 0.1, 10, obs, 0.0, 0.0, False), lambda r: r[0])
    rho = density_matrix(fock_state(6, 20))
    yield ("lindblad rhs d_t=20", "lindblad_rhs", (rho, 0.5, 0.05, 0.1, 1.2, 0.05, 0.05), lambda r: r)
    yield ("classical window (200 steps)", "propagate_classical",
           (0j, drive, 0.05, 0.1, 1.2, 0.1, 10), lambda r: r[0])
    yield ("mackey-glass 100k steps", "integrate_mackey_glass",
           (0.2, 0.1, 10.0, 17.0, 1.2, 0.01, 100_000), lambda r: r)
    yield ("rossler 4000 samples", "integrate_rossler",
           (0.2, 0.2, 5.7, np.array([0.0, 1.0, 0.0]), 0.005, 50, 4000), lambda r: r[0])


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':40s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for label, name, call_args, pick in cases():
        fast, slow = getattr(_kernels, name), getattr(_fallback, name)
        t_fast = best_time(fast, call_args, args.repeat)
        t_slow = best_time(slow, call_args, args.repeat)
        diff = np.max(np.abs(np.asarray(pick(fast(*call_args))) - np.asarray(pick(slow(*call_args)))))
        print(f"{label:40s} {1e3 * t_fast:12.3f} {1e3 * t_slow:12.3f} {t_slow / t_fast:8.1f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
