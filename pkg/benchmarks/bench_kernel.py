"""Compiled vs pure-Python kernel on the calibrated 10 GHz scenario.

    python benchmarks/bench_kernel.py --duration 10ms --repeat 3

Both backends must return identical totals; the script exits non-zero if not.
"""

import argparse
import statistics
import sys
import time

from hsps.config import parse_duration
from hsps.scenario import reference_scenario, single_mode_scenario
from hsps.simkernel import backend, engine


def time_backend(sc, name, repeat):
    times, totals = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        totals = engine.run(sc, backend_name=name)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), totals


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--duration", default="10ms", help="simulated time per run")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--scenario", choices=("reference", "single"), default="reference")
    args = parser.parse_args(argv)

    duration = parse_duration(args.duration, "s")
    if args.scenario == "single":
        sc = single_mode_scenario(0.005, duration_s=duration)
    else:
        sc = reference_scenario(duration_s=duration)
    names = backend.available()
    results = {name: time_backend(sc, name, args.repeat) for name in names}

    print(f"{args.scenario} scenario, {duration * 1e3:g} ms simulated ({sc.n_pulses:.3g} pulses), "
          f"median of {args.repeat}")
    print(f"{'backend':10s} {'wall (s)':>10s} {'s per sim-s':>12s} {'heralds':>10s}")
    for name, (wall, totals) in results.items():
        print(f"{name:10s} {wall:10.4f} {wall / duration:12.3f} {totals.heralds:10d}")
    if len(results) == 2:
        (wc, tc), (wp, tp) = results["compiled"], results["python"]
        print(f"speed-up   {wp / wc:.1f}x")
        if tc != tp:
            print("backends disagree", file=sys.stderr)
            return 1
    else:
        print("compiled kernel not built; only the Python kernel was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
