"""Acceptance gate: one test and one printed pass/fail line per criterion.

1. Closed-form statistics match Monte Carlo sampling on a desk-scale
   instance (1e5 samples, 2% tolerance, under a minute).
2. NMSE stays in [0, 1] across random configurations; with orthogonal
   pilots it is nonincreasing in pilot power and vanishes at high power.
3. The adaptive optimizer converges on the sphere benchmark; traces are
   nonincreasing; operator bounds/archive invariants survive 1e3 random
   inputs.
4. Desk-scale paired comparison at equal budgets: the adaptive searcher
   beats canonical DE and the GA on mean NMSE, and optimized designs beat
   the random/equal baselines by at least 20%.
5. Full-scale ordering (opt-in via CFRIS_FULL_SCALE=1; hours of CPU).
6. Spectral efficiency under optimized phases beats random phases.
7. Comparison reports are byte-identical across repeats and worker counts.
"""

import dataclasses
import json
import os
import time

import numpy as np
import pytest

from cfris import cli
from cfris.estimator import PilotAssignment, nmse_matrix
from cfris.harness import load_config, run_comparison
from cfris.optimizer import (
    AdeConfig,
    ShadeMemory,
    apply_selection,
    augment,
    crossover,
    initialize_population,
    mutate_pbest1,
    repair_bounds,
    run_ade,
    sample_parameters,
)
from cfris.spectral import SeConfig
from cfris.validation import run_validation

from test_estimator import random_statistics

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num} — {name}: {detail}")


def test_criterion_1_closed_forms_match_sampling():
    started = time.perf_counter()
    checks = run_validation(n_samples=100_000, seed=2024)
    elapsed = time.perf_counter() - started
    worst = max(c.value for c in checks)
    ok = all(c.passed for c in checks) and elapsed < 60.0
    _report(
        1, "closed forms vs 1e5-sample Monte Carlo", ok,
        f"{len(checks)} checks, worst deviation {worst:.4f} "
        f"(tolerance 0.02), {elapsed:.1f}s (limit 60s)",
    )
    for check in checks:
        assert check.passed, check.describe()
    assert elapsed < 60.0


def test_criterion_2_nmse_bounds_and_power_monotonicity():
    # bounds over 100 random configurations
    out_of_range = 0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        L = int(rng.integers(1, 4))
        M = int(rng.integers(1, 4))
        N = int(rng.integers(4, 11))
        K = int(rng.integers(2, 6))
        tau_p = int(rng.integers(1, K + 1))
        n_blocked = int(rng.integers(0, L * K // 2 + 1))
        flat = rng.choice(L * K, size=n_blocked, replace=False)
        blocked = [(int(f) // K, int(f) % K) for f in flat]
        stats = random_statistics(rng, L=L, M=M, N=N, K=K, blocked=blocked)
        pilots = PilotAssignment.round_robin(K, tau_p)
        snr = 10.0 ** rng.uniform(-2, 4)
        theta = rng.uniform(-np.pi, np.pi, N)
        values = nmse_matrix(stats, theta, pilots, snr)
        out_of_range += int(((values < 0.0) | (values > 1.0)).sum())

    # monotone in pilot power with orthogonal pilots, tiny at high power
    powers = [1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4]
    monotone = True
    high_power_max = 0.0
    for i in range(10):
        rng = np.random.default_rng(2000 + i)
        stats = random_statistics(rng, K=4)
        pilots = PilotAssignment.round_robin(4, 4)
        theta = rng.uniform(-np.pi, np.pi, 6)
        curves = np.stack([nmse_matrix(stats, theta, pilots, p) for p in powers])
        monotone &= bool((np.diff(curves, axis=0) <= 1e-12).all())
        high_power_max = max(high_power_max, float(curves[-1].max()))

    ok = out_of_range == 0 and monotone and high_power_max < 0.05
    _report(
        2, "NMSE bounds and power monotonicity", ok,
        f"100 random configurations in [0,1] ({out_of_range} violations); "
        f"nonincreasing over p=1e-2..1e4 with orthogonal pilots: {monotone}; "
        f"max NMSE at p=1e4: {high_power_max:.2e} (< 0.05)",
    )
    assert out_of_range == 0
    assert monotone
    assert high_power_max < 0.05


def test_criterion_3_optimizer_sanity():
    sphere = lambda x: float(np.sum(np.square(x)))  # noqa: E731

    result = run_ade(
        sphere, 8, AdeConfig(population_size=20, generations=200),
        np.random.default_rng(0),
    )
    traces_ok = (np.diff(result.trace.best) <= 1e-15).all()
    for seed in range(1, 6):
        extra = run_ade(
            sphere, 8, AdeConfig(population_size=20, generations=50),
            np.random.default_rng(seed),
        )
        traces_ok &= (np.diff(extra.trace.best) <= 1e-15).all()

    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(1000):
        size = int(rng.integers(4, 11))
        dims = int(rng.integers(2, 9))
        population, archive = initialize_population(sphere, dims, size, rng)
        weight, rate = sample_parameters(ShadeMemory.create(4), rng)
        parent = int(rng.integers(size))
        mutant = mutate_pbest1(population, archive, parent, weight, 0.3, rng)
        repaired = repair_bounds(mutant, population.genomes[parent])
        child = crossover(population.genomes[parent], repaired, rate, rng)
        if not (0.0 < weight <= 1.0 and 0.0 <= rate <= 1.0):
            violations += 1
        if (np.abs(repaired) > 1.0).any() or (np.abs(child) > 1.0).any():
            violations += 1
        trials = np.clip(
            population.genomes + rng.normal(0, 0.3, population.genomes.shape),
            -1.0, 1.0,
        )
        trial_fitness = np.array([sphere(t) for t in trials])
        apply_selection(population, archive, trials, trial_fitness)
        augment(population, archive, sphere, int(rng.integers(1, size + 1)),
                0.1, rng)
        if archive.genomes.shape != population.genomes.shape:
            violations += 1
        if archive.fitness.shape != population.fitness.shape:
            violations += 1
        if (np.abs(population.genomes) > 1.0).any():
            violations += 1

    ok = result.fitness < 1e-4 and traces_ok and violations == 0
    _report(
        3, "optimizer sanity", ok,
        f"sphere best {result.fitness:.2e} (< 1e-4); traces nonincreasing: "
        f"{bool(traces_ok)}; operator property violations: {violations}/1000 inputs",
    )
    assert result.fitness < 1e-4
    assert traces_ok
    assert violations == 0


def test_criterion_4_desk_scale_ordering(tmp_path):
    config = load_config(os.path.join(CONFIG_DIR, "compare_desk.json"))
    started = time.perf_counter()
    result = run_comparison(config, out_dir=tmp_path)
    elapsed = time.perf_counter() - started
    m = result.mean_nmse

    seeds_by_algo = {
        a: sorted(r.seed for r in result.rows if r.algorithm == a) for a in m
    }
    paired = all(s == seeds_by_algo["ade"] for s in seeds_by_algo.values())

    margins = {
        a: min(1.0 - m[a] / m["rps"], 1.0 - m[a] / m["eps"])
        for a in ("ade", "de", "ga")
    }
    ok = (
        paired
        and m["ade"] <= m["de"]
        and m["ade"] <= m["ga"]
        and all(v >= 0.20 for v in margins.values())
        and elapsed < 600.0
    )
    _report(
        4, "desk-scale ordering at equal budgets", ok,
        f"mean NMSE ade {m['ade']:.6f} <= de {m['de']:.6f}, "
        f"<= ga {m['ga']:.6f}; rps {m['rps']:.6f}, eps {m['eps']:.6f} "
        f"(worst optimized-vs-baseline margin {min(margins.values()):.1%}, "
        f"needs >= 20%); ade improvement over de "
        f"{result.improvement_over_de_pct:.2f}% (reference figure: up to 33% "
        f"at full scale, reported not asserted); {elapsed:.0f}s (limit 600s)",
    )
    assert paired
    assert m["ade"] <= m["de"]
    assert m["ade"] <= m["ga"]
    for algo, margin in margins.items():
        assert margin >= 0.20, f"{algo} margin {margin:.1%}"
    assert elapsed < 600.0


@pytest.mark.skipif(
    os.environ.get("CFRIS_FULL_SCALE") != "1",
    reason="hours of CPU; enable with CFRIS_FULL_SCALE=1",
)
def test_criterion_5_full_scale_ordering(tmp_path):
    config = load_config(os.path.join(CONFIG_DIR, "full_scale.json"))
    started = time.perf_counter()
    result = run_comparison(config, out_dir=tmp_path)
    elapsed = time.perf_counter() - started
    m = result.mean_nmse
    ordered = m["ade"] < m["ga"] < m["de"] < m["rps"] < m["eps"]
    _report(
        5, "full-scale ordering", ordered,
        "mean NMSE " + " / ".join(f"{a} {m[a]:.4f}" for a in
                                  ("ade", "ga", "de", "rps", "eps"))
        + " (reference magnitudes 0.5178/0.5805/0.6077/0.9096/0.9925, "
        f"reported not asserted); {elapsed:.0f}s",
    )
    assert ordered, m


def test_criterion_5_default_skip_notice():
    if os.environ.get("CFRIS_FULL_SCALE") == "1":
        pytest.skip("full-scale run enabled; see the gated test")
    print(
        "\n[SKIP] criterion 5 — full-scale ordering: opt-in via "
        "CFRIS_FULL_SCALE=1 (about an hour of CPU)"
    )


def test_criterion_6_spectral_efficiency_direction(tmp_path):
    base = load_config(os.path.join(CONFIG_DIR, "compare_desk.json"))
    se = SeConfig(trials=800, batch_size=200, coherence_block=200)
    gains = {}
    for tau_p in (1, 2):
        config = dataclasses.replace(
            base,
            scenario=dataclasses.replace(base.scenario, tau_p=tau_p),
            se=se,
            seeds=dataclasses.replace(base.seeds, n_geometries=2),
            workers=1,
        )
        result = run_comparison(config, ("ade", "rps"), tmp_path / str(tau_p))
        gains[tau_p] = (result.mean_se["ade"], result.mean_se["rps"])

    ok = all(a > r for a, r in gains.values())
    detail = "; ".join(
        f"tau_p={t}: ade {a:.4f} vs rps {r:.4f} (+{100 * (a - r) / r:.0f}%)"
        for t, (a, r) in gains.items()
    )
    _report(
        6, "spectral efficiency direction", ok,
        detail + " — reference gains 34%/28%/21% at tau_p=1/2/5 "
        "(reported, not asserted)",
    )
    for tau_p, (a, r) in gains.items():
        assert a > r, f"tau_p={tau_p}: ade {a} vs rps {r}"


def test_criterion_7_byte_identical_reports(tmp_path):
    scenario = {
        "n_aps": 2, "n_antennas": 2, "n_elements": 8, "n_users": 4,
        "tau_p": 2, "pilot_snr": 2e13, "unblock_prob": 0.5,
    }
    files = ("results.csv", "comparison.csv", "convergence.csv")
    outputs = []
    for i, workers in enumerate((1, 3, 1)):
        config = {
            "scenario": scenario,
            "ade": {"population_size": 6, "generations": 3},
            "de": {"population_size": 6},
            "ga": {"population_size": 6},
            "se": {"trials": 8, "batch_size": 8},
            "seeds": {"master": 5, "n_geometries": 2},
            "workers": workers,
            "output_dir": str(tmp_path / f"run{i}"),
        }
        path = tmp_path / f"config{i}.json"
        path.write_text(json.dumps(config))
        assert cli.main(["compare", "--config", str(path)]) == 0
        outputs.append(
            {name: (tmp_path / f"run{i}" / name).read_bytes() for name in files}
        )
    repeat_ok = outputs[0] == outputs[2]
    workers_ok = outputs[0] == outputs[1]
    ok = repeat_ok and workers_ok
    _report(
        7, "byte-identical reports", ok,
        f"repeat run identical: {repeat_ok}; workers=1 vs workers=3 "
        f"identical: {workers_ok} ({', '.join(files)})",
    )
    assert repeat_ok
    assert workers_ok
