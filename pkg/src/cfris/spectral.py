"""Monte Carlo uplink spectral efficiency under maximum-ratio combining.

Every AP combines with its own channel estimates; the achievable rate uses
the standard use-and-forget bound, so all expectations below are plain
averages over channel, pilot-noise and data-noise draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSampler, ChannelStatistics, aggregated_channel
from .errors import ConfigurationError
from .estimator import PilotAssignment, build_estimator_bank, received_pilot_signal
from .linalg import complex_normal


@dataclass(frozen=True)
class SeConfig:
    """Uplink evaluation settings.

    Attributes:
        bandwidth_mhz: system bandwidth, so rates come out in Mbit/s.
        coherence_block: symbols per coherence block (pilot + data).
        uplink_snr: data transmit power over noise; ``None`` reuses the
            pilot power.
        power_fraction: common power-control coefficient in [0, 1].
        trials: Monte Carlo channel draws.
        batch_size: draws processed per chunk to bound memory.
    """

    bandwidth_mhz: float = 10.0
    coherence_block: int = 200
    uplink_snr: float | None = None
    power_fraction: float = 1.0
    trials: int = 1000
    batch_size: int = 256

    def __post_init__(self) -> None:
        if self.bandwidth_mhz <= 0:
            raise ConfigurationError("bandwidth_mhz must be positive")
        if self.coherence_block < 1:
            raise ConfigurationError("coherence_block must be at least 1")
        if self.uplink_snr is not None and self.uplink_snr <= 0:
            raise ConfigurationError("uplink_snr must be positive")
        if not 0.0 <= self.power_fraction <= 1.0:
            raise ConfigurationError("power_fraction must lie in [0, 1]")
        if self.trials < 1 or self.batch_size < 1:
            raise ConfigurationError("trials and batch_size must be positive")


@dataclass
class SeResult:
    sinr: np.ndarray  # (K,)
    se: np.ndarray  # (K,) bits/s/Hz
    rate_mbps: np.ndarray  # (K,)
    trials: int


def sinr_from_samples(
    channels: np.ndarray,
    estimates: np.ndarray,
    noise: np.ndarray,
    uplink_snr: float,
    power_fraction: float | np.ndarray = 1.0,
) -> np.ndarray:
    """Use-and-forget SINR per user from paired samples.

    Args:
        channels: true aggregated channels, shape (S, L, K, M).
        estimates: the combining vectors (channel estimates), same shape.
        noise: receiver noise draws, shape (S, L, M), unit variance.
        uplink_snr: data power over noise.
        power_fraction: scalar or per-user coefficients in [0, 1].

    The desired-signal power uses the mean combined gain; everything else
    (gain fluctuation, interference, noise pickup) lands in the denominator.
    """
    K = channels.shape[-2]
    eta = np.broadcast_to(np.asarray(power_fraction, dtype=float), (K,))
    # combined[s, k, q]: combiner of user k applied to user q's channel
    combined = np.einsum("slka,slqa->skq", np.conj(estimates), channels)
    picked_noise = np.einsum("slka,sla->sk", np.conj(estimates), noise)
    idx = np.arange(K)
    own = combined[:, idx, idx]  # (S, K)

    mean_gain = own.mean(axis=0)
    desired = uplink_snr * eta * np.abs(mean_gain) ** 2
    fluctuation = uplink_snr * eta * (
        (np.abs(own) ** 2).mean(axis=0) - np.abs(mean_gain) ** 2
    )
    second = (np.abs(combined) ** 2).mean(axis=0)  # (K, K)
    interference = uplink_snr * (second @ eta - eta * second[idx, idx])
    noise_power = (np.abs(picked_noise) ** 2).mean(axis=0)

    den = fluctuation + interference + noise_power
    out = np.zeros(K)
    np.divide(desired, den, out=out, where=den > 0)
    return out


def uplink_rates(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    pilot_snr: float,
    config: SeConfig,
    rng: np.random.Generator,
) -> SeResult:
    """Ergodic uplink SE for a fixed phase configuration.

    Each trial draws fresh channels, runs the pilot phase (shared noise per
    pilot group), forms LMMSE estimates and accumulates the moments the
    use-and-forget bound needs.
    """
    if config.coherence_block < pilots.tau_p:
        raise ConfigurationError("coherence_block must be at least tau_p")
    L, K, M = stats.n_aps, stats.n_users, stats.n_antennas
    uplink_snr = config.uplink_snr if config.uplink_snr is not None else pilot_snr
    eta = np.broadcast_to(np.asarray(config.power_fraction, dtype=float), (K,))
    sampler = ChannelSampler(stats)
    bank = build_estimator_bank(stats, theta, pilots, pilot_snr)

    idx = np.arange(K)
    sum_own = np.zeros(K, dtype=complex)
    sum_own_sq = np.zeros(K)
    sum_cross_sq = np.zeros((K, K))
    sum_noise_sq = np.zeros(K)
    done = 0
    while done < config.trials:
        take = min(config.batch_size, config.trials - done)
        done += take
        realization = sampler.sample(rng, take)
        u = aggregated_channel(realization, theta)
        y = received_pilot_signal(realization, stats, theta, pilots, pilot_snr, rng=rng)
        estimates = bank.estimate(y)
        noise = complex_normal(rng, (take, L, M))
        combined = np.einsum("slka,slqa->skq", np.conj(estimates), u)
        picked = np.einsum("slka,sla->sk", np.conj(estimates), noise)
        own = combined[:, idx, idx]
        sum_own += own.sum(axis=0)
        sum_own_sq += (np.abs(own) ** 2).sum(axis=0)
        sum_cross_sq += (np.abs(combined) ** 2).sum(axis=0)
        sum_noise_sq += (np.abs(picked) ** 2).sum(axis=0)

    n = config.trials
    mean_gain = sum_own / n
    desired = uplink_snr * eta * np.abs(mean_gain) ** 2
    fluctuation = uplink_snr * eta * (sum_own_sq / n - np.abs(mean_gain) ** 2)
    second = sum_cross_sq / n
    interference = uplink_snr * (second @ eta - eta * second[idx, idx])
    noise_power = sum_noise_sq / n

    den = fluctuation + interference + noise_power
    sinr = np.zeros(K)
    np.divide(desired, den, out=sinr, where=den > 0)
    prelog = 1.0 - pilots.tau_p / config.coherence_block
    se = prelog * np.log2(1.0 + sinr)
    return SeResult(sinr=sinr, se=se, rate_mbps=config.bandwidth_mhz * se, trials=n)
