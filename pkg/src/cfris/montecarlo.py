"""Sampling-based estimates of the quantities the estimator computes in
closed form.

These are deliberately naive averages over channel draws; the test-suite and
the ``validate`` command compare them against the analytic expressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSampler, ChannelStatistics, aggregated_channel
from .estimator import (
    PilotAssignment,
    build_estimator_bank,
    received_pilot_signal,
)

DEFAULT_BATCH = 4096


def _batches(n_samples: int, batch_size: int):
    done = 0
    while done < n_samples:
        take = min(batch_size, n_samples - done)
        done += take
        yield take


@dataclass
class ChannelMoments:
    """Empirical first and second moments of the aggregated channels."""

    mean: np.ndarray  # (L, K, M)
    cov: np.ndarray  # (L, K, M, M)
    cross_cov: np.ndarray  # (L, K, K, M, M)
    n_samples: int


def empirical_channel_moments(
    stats: ChannelStatistics,
    theta: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH,
) -> ChannelMoments:
    """Sample mean/covariance/cross-covariance of the aggregated channels."""
    L, K, M = stats.n_aps, stats.n_users, stats.n_antennas
    sampler = ChannelSampler(stats)
    sum_u = np.zeros((L, K, M), dtype=complex)
    sum_outer = np.zeros((L, K, K, M, M), dtype=complex)
    for take in _batches(n_samples, batch_size):
        u = aggregated_channel(sampler.sample(rng, take), theta)
        sum_u += u.sum(axis=0)
        sum_outer += np.einsum("slka,slqb->lkqab", u, np.conj(u))
    mean = sum_u / n_samples
    cross = sum_outer / n_samples - np.einsum("lka,lqb->lkqab", mean, np.conj(mean))
    idx = np.arange(K)
    return ChannelMoments(
        mean=mean, cov=cross[:, idx, idx], cross_cov=cross, n_samples=n_samples
    )


def empirical_quadratic_form(
    stats: ChannelStatistics,
    matrix: np.ndarray,
    m: int,
    n_samples: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH,
) -> np.ndarray:
    """Sample E{ H_tilde @ matrix @ H_tilde^H } for the scatter part of the
    AP-surface channel at AP ``m``; analytically tr(surface_cov @ matrix)
    times the AP correlation."""
    sampler = ChannelSampler(stats)
    M = stats.n_antennas
    acc = np.zeros((M, M), dtype=complex)
    for take in _batches(n_samples, batch_size):
        h = sampler.sample(rng, take).ap_surface[:, m] - stats.ap_surface_los[m]
        acc += np.einsum("sab,bc,sdc->ad", h, matrix, np.conj(h))
    return acc / n_samples


@dataclass
class ObservationMoments:
    """Empirical second moments linking channels and pilot observations."""

    obs_cross_cov: np.ndarray  # (L, K, M, M)
    obs_cov: np.ndarray  # (L, K, M, M)
    n_samples: int


def empirical_observation_moments(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    n_samples: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH,
) -> ObservationMoments:
    """Sample the channel/observation cross-covariance and the observation
    covariance for every link."""
    L, K, M = stats.n_aps, stats.n_users, stats.n_antennas
    sampler = ChannelSampler(stats)
    sum_u = np.zeros((L, K, M), dtype=complex)
    sum_y = np.zeros((L, K, M), dtype=complex)
    sum_uy = np.zeros((L, K, M, M), dtype=complex)
    sum_yy = np.zeros((L, K, M, M), dtype=complex)
    for take in _batches(n_samples, batch_size):
        realization = sampler.sample(rng, take)
        u = aggregated_channel(realization, theta)
        y = received_pilot_signal(realization, stats, theta, pilots, snr, rng=rng)
        sum_u += u.sum(axis=0)
        sum_y += y.sum(axis=0)
        sum_uy += np.einsum("slka,slkb->lkab", u, np.conj(y))
        sum_yy += np.einsum("slka,slkb->lkab", y, np.conj(y))
    mean_u = sum_u / n_samples
    mean_y = sum_y / n_samples
    cross = sum_uy / n_samples - np.einsum("lka,lkb->lkab", mean_u, np.conj(mean_y))
    cov = sum_yy / n_samples - np.einsum("lka,lkb->lkab", mean_y, np.conj(mean_y))
    return ObservationMoments(obs_cross_cov=cross, obs_cov=cov, n_samples=n_samples)


@dataclass
class EstimationStats:
    """Empirical estimator performance over channel draws."""

    mean_error: np.ndarray  # (L, K, M) average of estimate - channel
    error_cov: np.ndarray  # (L, K, M, M)
    nmse: np.ndarray  # (L, K) ratio of error power to channel power
    n_samples: int


def empirical_estimation_stats(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    n_samples: int,
    rng: np.random.Generator,
    batch_size: int = DEFAULT_BATCH,
) -> EstimationStats:
    """Run the actual estimator on sampled observations and average its
    error statistics."""
    L, K, M = stats.n_aps, stats.n_users, stats.n_antennas
    sampler = ChannelSampler(stats)
    bank = build_estimator_bank(stats, theta, pilots, snr)

    sum_err = np.zeros((L, K, M), dtype=complex)
    sum_err_outer = np.zeros((L, K, M, M), dtype=complex)
    sum_err_power = np.zeros((L, K))
    sum_ch_power = np.zeros((L, K))
    for take in _batches(n_samples, batch_size):
        realization = sampler.sample(rng, take)
        u = aggregated_channel(realization, theta)
        y = received_pilot_signal(realization, stats, theta, pilots, snr, rng=rng)
        err = bank.estimate(y) - u
        sum_err += err.sum(axis=0)
        sum_err_outer += np.einsum("slka,slkb->lkab", err, np.conj(err))
        sum_err_power += np.einsum("slka,slka->lk", err, np.conj(err)).real
        sum_ch_power += np.einsum("slka,slka->lk", u, np.conj(u)).real
    nmse = np.zeros((L, K))
    np.divide(sum_err_power, sum_ch_power, out=nmse, where=sum_ch_power > 0)
    return EstimationStats(
        mean_error=sum_err / n_samples,
        error_cov=sum_err_outer / n_samples,
        nmse=nmse,
        n_samples=n_samples,
    )
