"""Time the compiled schedule executor against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --rounds 200 --repeat 3

Both executors run the same event schedule from the same zero state; the
script also reports the largest difference in the final fleet state.
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from fsmdm import _backend
from fsmdm.datagen import generate_network
from fsmdm.model import Hyperparams
from fsmdm.orchestrator import AsyncProfile, build_schedule, execute_schedule


def _time(net, params, events, backend, repeat):
    best, fleet = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        fleet, _, _ = execute_schedule(net, params, events, backend=backend, record=False)
        best = min(best, time.perf_counter() - t0)
    return best, fleet


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rounds", type=int, default=200, help="server rounds per schedule")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--clients", type=int, nargs="+", default=[5, 21, 84])
    args = p.parse_args(argv)
    if _backend.compiled_execute is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")

    params = replace(Hyperparams(), k_global_max=args.rounds)
    print(f"{'L':>4}{'mode':>15}{'events':>9}{'python s':>11}{'compiled s':>12}"
          f"{'speedup':>9}{'max diff':>11}")
    for L in args.clients:
        net = generate_network(L=L, seed=L)
        for prof in (AsyncProfile(local_per_global=3),
                     AsyncProfile.with_slow_client(L, slowdown=100.0, rng_seed=1)):
            events = build_schedule(prof, L, args.rounds)
            tp, fp = _time(net, params, events, "python", args.repeat)
            tc, fc = _time(net, params, events, "compiled", args.repeat)
            diff = max(float(np.max(np.abs(getattr(fp, k) - getattr(fc, k))))
                       for k in ("X", "Z", "G", "Q", "PSI", "XI", "ZETA", "W"))
            print(f"{L:>4}{prof.mode:>15}{len(events):>9}{tp:>11.4f}{tc:>12.5f}"
                  f"{tp / tc:>9.0f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
