"""Closed-form LMMSE estimation of the aggregated AP-user channels.

Each AP estimates, per user, the sum of the direct channel and the channel
reflected by the surface, from one projected pilot observation.  All second
moments needed by the estimator admit closed forms in the channel statistics
and the phase configuration; no realization averaging is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ChannelRealization, ChannelStatistics, aggregated_channel
from .errors import ConfigurationError, NumericalError
from .linalg import complex_normal, hermitize

ERROR_COV_EIG_RTOL = 1e-6


@dataclass(frozen=True)
class PilotAssignment:
    """Mapping of users to orthogonal pilot sequences.

    Users sharing an index in ``pilot_of`` transmit the same pilot and hence
    contaminate each other's observation.
    """

    pilot_of: np.ndarray  # (K,) int
    tau_p: int

    def __post_init__(self) -> None:
        pilot_of = np.ascontiguousarray(self.pilot_of, dtype=np.int64)
        object.__setattr__(self, "pilot_of", pilot_of)
        if self.tau_p < 1:
            raise ConfigurationError("tau_p must be at least 1")
        if pilot_of.ndim != 1 or pilot_of.size < 1:
            raise ConfigurationError("pilot_of must be a nonempty 1-D index array")
        if pilot_of.min() < 0 or pilot_of.max() >= self.tau_p:
            raise ConfigurationError("pilot indices must lie in [0, tau_p)")

    @classmethod
    def round_robin(cls, n_users: int, tau_p: int) -> "PilotAssignment":
        """User k gets pilot k mod tau_p."""
        return cls(np.arange(n_users, dtype=np.int64) % tau_p, tau_p)

    @property
    def n_users(self) -> int:
        return int(self.pilot_of.size)

    @property
    def n_groups(self) -> int:
        return self.tau_p

    def co_pilots(self, k: int) -> np.ndarray:
        """Indices of all users sharing user k's pilot, including k."""
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])


@dataclass
class EstimatorTerms:
    """Per-link second-order quantities behind the LMMSE estimator.

    Attributes:
        mean: deterministic part of the aggregated channel (M,).
        mean_sum: sum of the means over the co-pilot group (M,).
        scatter_cov: covariance contribution of all scattered components,
            i.e. the channel covariance minus ``los_scatter_gain * ap_corr``.
        los_scatter_gain: power of the user's deterministic surface
            excitation passed through the random AP-surface scatter; it
            multiplies ``ap_corr`` in the total covariance.
        obs_cross_cov: cross-covariance between the zero-mean channel and the
            centered pilot observation (M, M).
        obs_cov: covariance of the centered pilot observation (M, M).
        ap_corr: AP-side spatial correlation of the surface link (M, M).
        snr: pilot power over noise.
        tau_p: pilot length.
    """

    mean: np.ndarray
    mean_sum: np.ndarray
    scatter_cov: np.ndarray
    los_scatter_gain: float
    obs_cross_cov: np.ndarray
    obs_cov: np.ndarray
    ap_corr: np.ndarray
    snr: float
    tau_p: int

    @property
    def channel_cov(self) -> np.ndarray:
        """Covariance of the aggregated channel around its mean."""
        return self.scatter_cov + self.los_scatter_gain * self.ap_corr

    @property
    def channel_power(self) -> float:
        """Total mean-square norm of the aggregated channel."""
        return float(
            np.vdot(self.mean, self.mean).real + np.trace(self.channel_cov).real
        )


def estimator_terms(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    m: int,
    k: int,
) -> EstimatorTerms:
    """Assemble the closed-form moments for AP ``m`` and user ``k``.

    This is the straightforward dense implementation (explicit diagonal
    phase matrix, full products); the kernels in :mod:`cfris.kernels`
    reproduce it with cheaper contractions.
    """
    phi = np.diag(np.exp(1j * np.asarray(theta, dtype=float)))
    surface_cov = stats.surface_cov[m]
    ap_corr = stats.ap_corr[m]
    h_los = stats.ap_surface_los[m]
    group = pilots.co_pilots(k)

    def scatter_cov_of(kk: int) -> np.ndarray:
        reflected = phi @ stats.user_cov[kk] @ phi.conj().T
        return (
            stats.direct_cov[m, kk]
            + h_los @ reflected @ h_los.conj().T
            + np.trace(surface_cov @ reflected) * ap_corr
        )

    excitation = {kk: phi @ stats.surface_user_los[kk] for kk in group}
    excitation_sum = sum(excitation.values())
    mean = h_los @ excitation[k]
    mean_sum = h_los @ excitation_sum

    scatter_cov = scatter_cov_of(k)
    los_scatter_gain = float(np.vdot(excitation[k], surface_cov @ excitation[k]).real)
    cross_gain = complex(np.vdot(excitation_sum, surface_cov @ excitation[k]))
    scale = np.sqrt(snr * pilots.tau_p)
    obs_cross_cov = scale * (scatter_cov + cross_gain * ap_corr)
    group_gain = float(np.vdot(excitation_sum, surface_cov @ excitation_sum).real)
    obs_cov = snr * pilots.tau_p * (
        sum(scatter_cov_of(kk) for kk in group) + group_gain * ap_corr
    ) + np.eye(stats.n_antennas)

    return EstimatorTerms(
        mean=mean,
        mean_sum=mean_sum,
        scatter_cov=hermitize(scatter_cov),
        los_scatter_gain=los_scatter_gain,
        obs_cross_cov=obs_cross_cov,
        obs_cov=hermitize(obs_cov),
        ap_corr=ap_corr,
        snr=float(snr),
        tau_p=pilots.tau_p,
    )


def received_pilot_signal(
    realization: ChannelRealization,
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Projected pilot observation per link, shape (..., L, K, M).

    Co-pilot users see the *same* observation at an AP (identical projection
    of the received block), so the additive noise is drawn per pilot group
    and shared across the group's columns.  Pass ``noise`` of shape
    (..., L, n_groups, M) to override the draw.
    """
    u = aggregated_channel(realization, theta)
    batch = u.shape[:-3]
    L, K, M = u.shape[-3:]
    if noise is None:
        if rng is None:
            raise ConfigurationError("supply either rng or noise")
        noise = complex_normal(rng, batch + (L, pilots.n_groups, M))
    group_sum = np.zeros(batch + (L, pilots.n_groups, M), dtype=complex)
    for g in range(pilots.n_groups):
        members = np.flatnonzero(pilots.pilot_of == g)
        if members.size:
            group_sum[..., g, :] = u[..., members, :].sum(axis=-2)
    scale = np.sqrt(snr * pilots.tau_p)
    per_group = scale * group_sum + noise
    return per_group[..., pilots.pilot_of, :]


def lmmse_estimate(terms: EstimatorTerms, observation: np.ndarray) -> np.ndarray:
    """Estimate the aggregated channel from the raw observation.

    ``observation`` has shape (..., M); the estimate is the mean plus the
    LMMSE correction computed from the centered observation.
    """
    centered = observation - np.sqrt(terms.snr * terms.tau_p) * terms.mean_sum
    weights = np.linalg.solve(terms.obs_cov, centered[..., None])[..., 0]
    return terms.mean + np.einsum("ij,...j->...i", terms.obs_cross_cov, weights)


def error_covariance(terms: EstimatorTerms, check: bool = True) -> np.ndarray:
    """Covariance of the estimation error; Hermitian PSD by construction.

    Raises:
        NumericalError: if ``check`` and an eigenvalue is below
            ``-ERROR_COV_EIG_RTOL`` relative to the spectral radius.
    """
    gain = np.linalg.solve(terms.obs_cov, terms.obs_cross_cov.conj().T)
    cov = hermitize(terms.channel_cov - terms.obs_cross_cov @ gain)
    if check:
        eigs = np.linalg.eigvalsh(cov)
        radius = max(float(np.max(np.abs(eigs))), 1e-300)
        if float(np.min(eigs)) < -ERROR_COV_EIG_RTOL * radius:
            raise NumericalError(
                f"error covariance not PSD: min relative eigenvalue "
                f"{float(np.min(eigs)) / radius:.3e}"
            )
    return cov


def nmse(terms: EstimatorTerms, method: str = "cov") -> float:
    """Normalized MSE of one link's estimate.

    ``method='cov'`` traces the error covariance; ``method='gain'`` uses the
    equivalent form 1 - (mean power + captured observation power) / total.
    Links carrying no power at all report 0 by convention.
    """
    den = terms.channel_power
    if den <= 0.0:
        return 0.0
    if method == "cov":
        num = float(np.trace(error_covariance(terms, check=False)).real)
        return num / den
    if method == "gain":
        gain = np.linalg.solve(terms.obs_cov, terms.obs_cross_cov.conj().T)
        captured = float(np.trace(terms.obs_cross_cov @ gain).real)
        mean_power = float(np.vdot(terms.mean, terms.mean).real)
        return 1.0 - (mean_power + captured) / den
    raise ConfigurationError(f"unknown nmse method {method!r}")


@dataclass
class EstimatorBank:
    """Precomputed LMMSE filters for every link, for batched estimation."""

    mean: np.ndarray  # (L, K, M)
    mean_sum: np.ndarray  # (L, K, M)
    filters: np.ndarray  # (L, K, M, M) applied to the centered observation
    snr: float
    tau_p: int

    def estimate(self, observation: np.ndarray) -> np.ndarray:
        """Estimates for raw observations of shape (..., L, K, M)."""
        centered = observation - np.sqrt(self.snr * self.tau_p) * self.mean_sum
        return self.mean + np.einsum("lkab,...lkb->...lka", self.filters, centered)


def build_estimator_bank(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
) -> EstimatorBank:
    """Assemble per-link terms once and keep only what estimation needs."""
    L, K, M = stats.n_aps, stats.n_users, stats.n_antennas
    mean = np.empty((L, K, M), dtype=complex)
    mean_sum = np.empty((L, K, M), dtype=complex)
    filters = np.empty((L, K, M, M), dtype=complex)
    for m in range(L):
        for k in range(K):
            t = estimator_terms(stats, theta, pilots, snr, m, k)
            mean[m, k] = t.mean
            mean_sum[m, k] = t.mean_sum
            filters[m, k] = np.linalg.solve(t.obs_cov, t.obs_cross_cov.conj().T).conj().T
    return EstimatorBank(
        mean=mean, mean_sum=mean_sum, filters=filters,
        snr=float(snr), tau_p=pilots.tau_p,
    )


def nmse_matrix(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    kernel: str | None = None,
) -> np.ndarray:
    """Per-link NMSE, shape (L, K), via the selected compute backend."""
    if pilots.n_users != stats.n_users:
        raise ConfigurationError("pilot assignment does not match the user count")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (stats.n_elements,):
        raise ConfigurationError(
            f"theta must have shape ({stats.n_elements},), got {theta.shape}"
        )
    fn = kernels.get_kernel(kernel)
    return fn(
        stats.direct_cov,
        stats.ap_corr,
        stats.surface_cov,
        stats.user_cov,
        stats.ap_surface_los,
        stats.surface_user_los,
        pilots.pilot_of,
        pilots.n_groups,
        float(snr),
        int(pilots.tau_p),
        np.exp(1j * theta),
    )


def average_nmse(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
    kernel: str | None = None,
) -> float:
    """Network-wide objective: mean of the per-link NMSE over all L*K links."""
    return float(nmse_matrix(stats, theta, pilots, snr, kernel).mean())


def average_nmse_reference(
    stats: ChannelStatistics,
    theta: np.ndarray,
    pilots: PilotAssignment,
    snr: float,
) -> float:
    """Same objective via the dense per-link path; used to cross-check kernels."""
    total = 0.0
    for m in range(stats.n_aps):
        for k in range(stats.n_users):
            total += nmse(estimator_terms(stats, theta, pilots, snr, m, k))
    return total / (stats.n_aps * stats.n_users)


def make_objective(
    stats: ChannelStatistics,
    pilots: PilotAssignment,
    snr: float,
    kernel: str | None = None,
):
    """Bind statistics into a ``theta -> average NMSE`` callable."""

    def objective(theta: np.ndarray) -> float:
        return average_nmse(stats, theta, pilots, snr, kernel)

    return objective


def aggregated_mean(stats: ChannelStatistics, theta: np.ndarray) -> np.ndarray:
    """Closed-form mean of the aggregated channel, shape (L, K, M)."""
    phasors = np.exp(1j * np.asarray(theta, dtype=float))
    return np.einsum(
        "lmn,kn->lkm", stats.ap_surface_los, phasors * stats.surface_user_los
    )


def aggregated_cov(stats: ChannelStatistics, theta: np.ndarray) -> np.ndarray:
    """Closed-form covariance of the aggregated channel, shape (L, K, M, M)."""
    phasors = np.exp(1j * np.asarray(theta, dtype=float))
    reflected = phasors[None, :, None] * stats.user_cov * np.conj(phasors)[None, None, :]
    los_part = np.einsum(
        "lmn,knp,lqp->lkmq", stats.ap_surface_los, reflected, np.conj(stats.ap_surface_los)
    )
    trace_part = np.einsum("lij,kji->lk", stats.surface_cov, reflected).real
    excitation = phasors * stats.surface_user_los
    gain = np.einsum(
        "kn,lnp,kp->lk", np.conj(excitation), stats.surface_cov, excitation
    ).real
    rap = stats.ap_corr[:, None]
    return stats.direct_cov + los_part + (trace_part + gain)[..., None, None] * rap


def aggregated_cross_cov(stats: ChannelStatistics, theta: np.ndarray) -> np.ndarray:
    """Cross-covariances between all user pairs at each AP, (L, K, K, M, M).

    The [l, k, k] diagonal equals :func:`aggregated_cov`; for k != k' only
    the shared AP-surface scatter couples the two channels.
    """
    phasors = np.exp(1j * np.asarray(theta, dtype=float))
    excitation = phasors * stats.surface_user_los  # (K, N)
    coupling = np.einsum(
        "qn,lnp,kp->lkq", np.conj(excitation), stats.surface_cov, excitation
    )  # (L, K, K): row k, column k' -> excitation_k'^H R excitation_k
    out = coupling[..., None, None] * stats.ap_corr[:, None, None]
    idx = np.arange(stats.n_users)
    out[:, idx, idx] = aggregated_cov(stats, theta)
    return out
