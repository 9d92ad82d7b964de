"""Cross-checks between closed-form statistics and Monte Carlo sampling.

Used both by ``cfris validate`` and by the acceptance tests: a small network
is generated, every analytic quantity the estimator relies on is recomputed
by brute-force averaging over channel draws, and the relative deviations are
reported as a list of named checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelStatistics, ScenarioConfig, generate_statistics
from .estimator import (
    PilotAssignment,
    aggregated_cov,
    aggregated_cross_cov,
    aggregated_mean,
    error_covariance,
    estimator_terms,
    nmse,
)
from .montecarlo import (
    empirical_channel_moments,
    empirical_estimation_stats,
    empirical_observation_moments,
    empirical_quadratic_form,
)
from .optimizer import random_phases

DEFAULT_SAMPLES = 100_000
DEFAULT_TOLERANCE = 0.02


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one closed-form-versus-sampling comparison."""

    name: str
    value: float  # worst relative deviation observed
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value <= self.tolerance

    def describe(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.4f} (tolerance {self.tolerance:g})"


def validation_scenario() -> ScenarioConfig:
    """Small instance where 1e5 draws pin every moment within a couple
    percent in a few seconds."""
    return ScenarioConfig(
        n_aps=2,
        n_antennas=2,
        n_elements=8,
        n_users=4,
        tau_p=2,
        pilot_snr=2e13,
        unblock_prob=0.5,
    )


def _rel(estimate: np.ndarray, reference: np.ndarray) -> float:
    den = max(float(np.linalg.norm(reference)), 1e-300)
    return float(np.linalg.norm(estimate - reference)) / den


def _worst_blockwise(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Max relative Frobenius error over the leading (link) axes."""
    flat_est = estimate.reshape(-1, *estimate.shape[-2:])
    flat_ref = reference.reshape(-1, *reference.shape[-2:])
    return max(_rel(e, r) for e, r in zip(flat_est, flat_ref))


def _stack_cross(cross: np.ndarray) -> np.ndarray:
    """(L, K, K, M, M) block structure -> (L, K*M, K*M) stacked covariance."""
    L, K, _, M, _ = cross.shape
    return cross.transpose(0, 1, 3, 2, 4).reshape(L, K * M, K * M)


def run_validation(
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 2024,
    tolerance: float = DEFAULT_TOLERANCE,
    scenario: ScenarioConfig | None = None,
) -> list[CheckResult]:
    """Compare every closed-form quantity against sampling estimates.

    Returns one :class:`CheckResult` per quantity; all sampling uses a
    single seeded stream so the run is reproducible.
    """
    scenario = scenario or validation_scenario()
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    stats = generate_statistics(scenario, rng)
    theta = random_phases(scenario.n_elements, rng)
    pilots = PilotAssignment.round_robin(scenario.n_users, scenario.tau_p)
    snr = scenario.pilot_snr
    checks: list[CheckResult] = []

    def add(name: str, value: float, tol: float = tolerance) -> None:
        checks.append(CheckResult(name=name, value=value, tolerance=tol))

    # Scatter quadratic form: E{H ~ D H~^H} = tr(surface_cov D) ap_corr.
    phasors = np.exp(1j * theta)
    test_matrix = phasors[:, None] * stats.user_cov[0] * np.conj(phasors)[None, :]
    worst = 0.0
    for m in range(stats.n_aps):
        sampled = empirical_quadratic_form(stats, test_matrix, m, n_samples, rng)
        closed = (
            np.trace(stats.surface_cov[m] @ test_matrix) * stats.ap_corr[m]
        )
        worst = max(worst, _rel(sampled, closed))
    add("quadratic_form_identity", worst)

    # First and second moments of the aggregated channels.  The sampling
    # noise of every estimate is set by the per-draw channel magnitude, so
    # each deviation is measured against the scale of the quantities being
    # correlated rather than the (possibly tiny) target norm; a wrong
    # formula still surfaces as an O(1) deviation on the strong links.
    moments = empirical_channel_moments(stats, theta, n_samples, rng)
    mean_ref = aggregated_mean(stats, theta)
    cov_ref = aggregated_cov(stats, theta)
    cross_ref = aggregated_cross_cov(stats, theta)
    channel_power = (
        np.einsum("lka,lka->lk", mean_ref, np.conj(mean_ref)).real
        + np.einsum("lkaa->lk", cov_ref).real
    )
    mean_dev = np.linalg.norm(moments.mean - mean_ref, axis=-1)
    add("channel_mean", float(np.max(mean_dev / np.sqrt(channel_power))))
    add("channel_covariance", _worst_blockwise(moments.cov, cov_ref))
    add(
        "channel_cross_covariance",
        _worst_blockwise(_stack_cross(moments.cross_cov), _stack_cross(cross_ref)),
    )

    # Estimator second moments.  The cross-covariance is normalized by its
    # Cauchy-Schwarz bound sqrt(E||u_centered||^2 E||y_centered||^2).
    obs = empirical_observation_moments(stats, theta, pilots, snr, n_samples, rng)
    L, K = stats.n_aps, stats.n_users
    terms = [
        [estimator_terms(stats, theta, pilots, snr, m, k) for k in range(K)]
        for m in range(L)
    ]
    cross_cov_ref = np.array([[terms[m][k].obs_cross_cov for k in range(K)] for m in range(L)])
    obs_cov_ref = np.array([[terms[m][k].obs_cov for k in range(K)] for m in range(L)])
    centered_power = np.array(
        [[np.trace(terms[m][k].channel_cov).real for k in range(K)] for m in range(L)]
    )
    obs_power = np.einsum("lkaa->lk", obs_cov_ref).real
    cross_scale = np.sqrt(centered_power * obs_power)
    cross_dev = np.linalg.norm(
        (obs.obs_cross_cov - cross_cov_ref).reshape(L, K, -1), axis=-1
    )
    add("obs_cross_covariance", float(np.max(cross_dev / cross_scale)))
    add("obs_covariance", _worst_blockwise(obs.obs_cov, obs_cov_ref))

    # Run the estimator itself and compare its error statistics.
    est = empirical_estimation_stats(stats, theta, pilots, snr, n_samples, rng)
    error_ref = np.array(
        [[error_covariance(terms[m][k]) for k in range(K)] for m in range(L)]
    )
    nmse_ref = np.array([[nmse(terms[m][k]) for k in range(K)] for m in range(L)])
    add("error_covariance", _worst_blockwise(est.error_cov, error_ref))
    worst_nmse = float(np.max(np.abs(est.nmse - nmse_ref) / np.maximum(nmse_ref, 1e-12)))
    add("nmse_closed_vs_sampled", worst_nmse)
    channel_scale = np.sqrt(np.einsum("lka,lka->lk", mean_ref, np.conj(mean_ref)).real
                            + np.einsum("lkaa->lk", cov_ref).real)
    bias = float(
        np.max(np.linalg.norm(est.mean_error, axis=-1) / np.maximum(channel_scale, 1e-300))
    )
    add("estimator_unbiased", bias)
    return checks


__all__ = [
    "CheckResult",
    "DEFAULT_SAMPLES",
    "DEFAULT_TOLERANCE",
    "run_validation",
    "validation_scenario",
]
