"""Time the average-NMSE objective across compute backends.

The evolutionary search evaluates this objective tens of thousands of times
per run, so the per-call cost decides experiment wall time.  Run with::

    python benchmarks/bench_kernels.py [--repeats 50]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cfris.channel import ScenarioConfig, generate_statistics
from cfris.estimator import PilotAssignment, average_nmse
from cfris.kernels import available_backends

SCENARIOS = {
    "desk (L=2 M=2 N=8 K=4)": ScenarioConfig(
        n_aps=2, n_antennas=2, n_elements=8, n_users=4, tau_p=2,
        unblock_prob=0.5,
    ),
    "comparison (L=4 M=4 N=32 K=8)": ScenarioConfig(
        n_aps=4, n_antennas=4, n_elements=32, n_users=8, tau_p=2,
        placement="corners",
    ),
    "full scale (L=40 M=16 N=100 K=10)": ScenarioConfig(
        n_aps=40, n_antennas=16, n_elements=100, n_users=10, tau_p=1,
        placement="corners",
    ),
}


def time_backend(stats, pilots, snr, kernel, thetas, repeats):
    average_nmse(stats, thetas[0], pilots, snr, kernel)  # warm up
    started = time.perf_counter()
    for i in range(repeats):
        average_nmse(stats, thetas[i % len(thetas)], pilots, snr, kernel)
    return (time.perf_counter() - started) / repeats


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50,
                        help="timed objective evaluations per backend")
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(backends)}")
    for label, scenario in SCENARIOS.items():
        stats = generate_statistics(scenario, rng)
        pilots = PilotAssignment.round_robin(scenario.n_users, scenario.tau_p)
        thetas = rng.uniform(-np.pi, np.pi, (8, scenario.n_elements))
        timings = {
            kernel: time_backend(stats, pilots, scenario.pilot_snr, kernel,
                                 thetas, args.repeats)
            for kernel in backends
        }
        baseline = timings.get("numpy")
        print(f"\n{label}")
        for kernel, seconds in timings.items():
            speedup = f"  ({baseline / seconds:.2f}x vs numpy)" if baseline else ""
            print(f"  {kernel:<8} {seconds * 1e3:8.3f} ms/eval{speedup}")


if __name__ == "__main__":
    main()
