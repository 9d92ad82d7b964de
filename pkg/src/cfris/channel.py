"""Scenario configuration and spatially correlated channel generation.

The network is a square service area with L multi-antenna access points, K
single-antenna users and one reflecting surface with N passive elements.
Direct AP-user links are correlated Rayleigh (and may be blocked); the two
surface links are correlated Rician whose line-of-sight parts come from
array geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .linalg import (
    check_covariance,
    complex_normal,
    exponential_correlation,
    local_scattering_correlation,
    psd_sqrt,
)


@dataclass(frozen=True)
class PathlossConfig:
    """Log-distance path loss, one exponent per link class.

    Gains are ``ref_gain * (d / ref_distance) ** -exponent`` in linear scale.
    Reflected links see much less clutter than street-level direct links, so
    they get a separate (smaller) exponent.
    """

    ref_gain_db: float = -30.5
    ref_distance_m: float = 1.0
    direct_exponent: float = 3.76
    surface_exponent: float = 2.2

    def __post_init__(self) -> None:
        if self.ref_distance_m <= 0:
            raise ConfigurationError("ref_distance_m must be positive")
        if self.direct_exponent < 0 or self.surface_exponent < 0:
            raise ConfigurationError("path-loss exponents must be nonnegative")

    def gain(self, distance_m: np.ndarray, exponent: float) -> np.ndarray:
        ref = 10.0 ** (self.ref_gain_db / 10.0)
        return ref * (np.asarray(distance_m) / self.ref_distance_m) ** (-exponent)


@dataclass(frozen=True)
class CorrelationConfig:
    """Spatial correlation model used on every array.

    ``exponential`` builds unit-diagonal matrices coeff**|i-j| and ignores
    geometry; ``local_scattering`` uses a Gaussian angular spread around the
    nominal azimuth of each link.
    """

    model: str = "exponential"
    ap_coeff: float = 0.5
    surface_coeff: float = 0.5
    angular_spread_deg: float = 15.0

    def __post_init__(self) -> None:
        if self.model not in ("exponential", "local_scattering"):
            raise ConfigurationError(f"unknown correlation model {self.model!r}")
        for c in (self.ap_coeff, self.surface_coeff):
            if not 0.0 <= c < 1.0:
                raise ConfigurationError("correlation coefficients must lie in [0, 1)")


@dataclass(frozen=True)
class RicianConfig:
    """Rician K-factors (dB) of the two surface links."""

    ap_surface_db: float = 10.0
    surface_user_db: float = 10.0

    def los_fraction(self, db: float) -> float:
        kappa = 10.0 ** (db / 10.0)
        return kappa / (1.0 + kappa)


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one network instance.

    Attributes:
        n_aps: number of access points (L).
        n_antennas: antennas per AP (M).
        n_elements: reflecting elements (N).
        n_users: single-antenna users (K).
        tau_p: pilot sequence length; users k and k' share a pilot iff
            k % tau_p == k' % tau_p.
        pilot_snr: pilot transmit power normalized to unit noise variance.
        unblock_prob: probability that a direct AP-user link is present.
        area_side_m: side of the square service area.
        ap_height_m / user_height_m / surface_height_m: element heights.
        spacing: antenna/element spacing in wavelengths.
        placement: "uniform" drops APs and users anywhere in the square;
            "corners" clusters APs southwest and users southeast with the
            surface at the center, making the surface path dominant.
        corner_fraction: side of each corner square relative to the area.
    """

    n_aps: int = 4
    n_antennas: int = 4
    n_elements: int = 32
    n_users: int = 8
    tau_p: int = 2
    pilot_snr: float = 1e13
    unblock_prob: float = 0.2
    area_side_m: float = 1000.0
    ap_height_m: float = 15.0
    user_height_m: float = 1.65
    surface_height_m: float = 30.0
    spacing: float = 0.5
    placement: str = "uniform"
    corner_fraction: float = 0.25
    pathloss: PathlossConfig = field(default_factory=PathlossConfig)
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    rician: RicianConfig = field(default_factory=RicianConfig)

    def __post_init__(self) -> None:
        for name in ("n_aps", "n_antennas", "n_elements", "n_users", "tau_p"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.pilot_snr <= 0:
            raise ConfigurationError("pilot_snr must be positive")
        if not 0.0 <= self.unblock_prob <= 1.0:
            raise ConfigurationError("unblock_prob must lie in [0, 1]")
        if self.area_side_m <= 0 or self.spacing <= 0:
            raise ConfigurationError("area_side_m and spacing must be positive")
        if self.placement not in ("uniform", "corners"):
            raise ConfigurationError(
                f"placement must be 'uniform' or 'corners', got {self.placement!r}"
            )
        if not 0.0 < self.corner_fraction <= 0.5:
            raise ConfigurationError("corner_fraction must lie in (0, 0.5]")


@dataclass(frozen=True)
class NetworkGeometry:
    """Positions of every radio endpoint, in meters."""

    ap_positions: np.ndarray  # (L, 3)
    user_positions: np.ndarray  # (K, 3)
    surface_position: np.ndarray  # (3,)


@dataclass(frozen=True)
class LinkGains:
    """Large-scale power gains per link class (linear scale)."""

    direct: np.ndarray  # (L, K)
    ap_surface: np.ndarray  # (L,)
    surface_user: np.ndarray  # (K,)


@dataclass
class ChannelStatistics:
    """Second-order statistics consumed by the estimator and optimizer.

    ``direct_cov[m, k]`` already folds in blocking and large-scale gain.
    The AP-side correlation of the surface link is normalized to unit
    diagonal; the AP-surface gain is carried entirely by ``surface_cov``.
    """

    direct_cov: np.ndarray  # (L, K, M, M) complex
    ap_corr: np.ndarray  # (L, M, M) complex, unit diagonal
    surface_cov: np.ndarray  # (L, N, N) complex
    user_cov: np.ndarray  # (K, N, N) complex
    ap_surface_los: np.ndarray  # (L, M, N) complex
    surface_user_los: np.ndarray  # (K, N) complex
    blocking: np.ndarray  # (L, K) float in {0, 1}

    def __post_init__(self) -> None:
        self.direct_cov = np.ascontiguousarray(self.direct_cov, dtype=np.complex128)
        self.ap_corr = np.ascontiguousarray(self.ap_corr, dtype=np.complex128)
        self.surface_cov = np.ascontiguousarray(self.surface_cov, dtype=np.complex128)
        self.user_cov = np.ascontiguousarray(self.user_cov, dtype=np.complex128)
        self.ap_surface_los = np.ascontiguousarray(self.ap_surface_los, dtype=np.complex128)
        self.surface_user_los = np.ascontiguousarray(self.surface_user_los, dtype=np.complex128)
        self.blocking = np.ascontiguousarray(self.blocking, dtype=np.float64)

    @property
    def n_aps(self) -> int:
        return self.direct_cov.shape[0]

    @property
    def n_users(self) -> int:
        return self.direct_cov.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.direct_cov.shape[2]

    @property
    def n_elements(self) -> int:
        return self.surface_cov.shape[1]

    def validate(self) -> None:
        """Check shapes and that every covariance is Hermitian PSD."""
        L, K, M, N = self.n_aps, self.n_users, self.n_antennas, self.n_elements
        expected = {
            "direct_cov": (L, K, M, M),
            "ap_corr": (L, M, M),
            "surface_cov": (L, N, N),
            "user_cov": (K, N, N),
            "ap_surface_los": (L, M, N),
            "surface_user_los": (K, N),
            "blocking": (L, K),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ConfigurationError(f"{name} has shape {actual}, expected {shape}")
        check_covariance(self.direct_cov, "direct_cov")
        check_covariance(self.ap_corr, "ap_corr")
        check_covariance(self.surface_cov, "surface_cov")
        check_covariance(self.user_cov, "user_cov")
        if not np.all(np.isin(self.blocking, (0.0, 1.0))):
            raise ConfigurationError("blocking must contain only 0/1 entries")


@dataclass(frozen=True)
class ChannelRealization:
    """One (or a batch of) small-scale channel draws.

    Leading axes before the documented ones are batch axes.
    """

    direct: np.ndarray  # (..., L, K, M)
    ap_surface: np.ndarray  # (..., L, M, N)
    surface_user: np.ndarray  # (..., K, N)


def generate_geometry(scenario: ScenarioConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Drop APs and users in the square; surface placement depends on layout.

    ``uniform``: APs and users anywhere in the square, surface at the center
    of the south wall. ``corners``: APs in the southwest corner square and
    users in the southeast corner square (side = ``corner_fraction`` of the
    area side), surface at the area center — the regime where most traffic
    is relayed off the surface.
    """
    side = scenario.area_side_m
    if scenario.placement == "uniform":
        ap_xy = rng.uniform(0.0, side, size=(scenario.n_aps, 2))
        user_xy = rng.uniform(0.0, side, size=(scenario.n_users, 2))
        surface = np.array([side / 2.0, 0.0, scenario.surface_height_m])
    else:  # corners
        corner = scenario.corner_fraction * side
        ap_xy = rng.uniform(0.0, corner, size=(scenario.n_aps, 2))
        user_xy = rng.uniform(0.0, corner, size=(scenario.n_users, 2))
        user_xy[:, 0] += side - corner
        surface = np.array([side / 2.0, side / 2.0, scenario.surface_height_m])
    aps = np.column_stack([ap_xy, np.full(scenario.n_aps, scenario.ap_height_m)])
    users = np.column_stack([user_xy, np.full(scenario.n_users, scenario.user_height_m)])
    return NetworkGeometry(aps, users, surface)


def large_scale_fading(geometry: NetworkGeometry, pathloss: PathlossConfig) -> LinkGains:
    """Distance-based power gains for the three link classes."""
    d_direct = np.linalg.norm(
        geometry.ap_positions[:, None, :] - geometry.user_positions[None, :, :], axis=-1
    )
    d_as = np.linalg.norm(geometry.ap_positions - geometry.surface_position, axis=-1)
    d_su = np.linalg.norm(geometry.user_positions - geometry.surface_position, axis=-1)
    return LinkGains(
        direct=pathloss.gain(d_direct, pathloss.direct_exponent),
        ap_surface=pathloss.gain(d_as, pathloss.surface_exponent),
        surface_user=pathloss.gain(d_su, pathloss.surface_exponent),
    )


def sample_blocking(
    scenario: ScenarioConfig, rng: np.random.Generator
) -> np.ndarray:
    """Bernoulli presence indicator per direct link (1 = link exists)."""
    draws = rng.random((scenario.n_aps, scenario.n_users))
    return (draws < scenario.unblock_prob).astype(np.float64)


def _planar_shape(n: int) -> tuple[int, int]:
    """Most-square factorization n = rows * cols with rows <= cols."""
    best = 1
    for d in range(1, int(np.sqrt(n)) + 1):
        if n % d == 0:
            best = d
    return best, n // best


def _linear_response(n: int, spacing: float, cos_dir: float) -> np.ndarray:
    """Unit-modulus response of an n-element line array.

    ``cos_dir`` is the cosine between the array axis and the propagation
    direction.
    """
    return np.exp(2j * np.pi * spacing * np.arange(n) * cos_dir)


def _planar_response(n: int, spacing: float, direction: np.ndarray) -> np.ndarray:
    """Response of the surface, indexed row-major over a rows x cols grid.

    The surface lies in the x-z plane, so only the x and z components of the
    unit propagation direction matter.
    """
    rows, cols = _planar_shape(n)
    horiz = _linear_response(cols, spacing, direction[0])
    vert = _linear_response(rows, spacing, direction[2])
    return np.kron(vert, horiz)


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ConfigurationError("coincident endpoints leave the link direction undefined")
    return vec / norm


def _azimuth(src: np.ndarray, dst: np.ndarray) -> float:
    d = dst - src
    return float(np.arctan2(d[1], d[0]))


def build_statistics(
    scenario: ScenarioConfig,
    geometry: NetworkGeometry,
    gains: LinkGains,
    blocking: np.ndarray,
) -> ChannelStatistics:
    """Assemble means and covariances from geometry and large-scale gains.

    Direct links are Rayleigh with per-link gain and AP-side correlation;
    both surface links are Rician, the mean carrying the ``los_fraction`` of
    the power and the covariance the rest.

    Scaling all entries of ``gains`` by c scales every gain-bearing output
    (direct_cov, surface_cov, user_cov, and the squared norms of both
    line-of-sight parts) by c; ``ap_corr`` stays a unit-diagonal factor.
    """
    L, M = scenario.n_aps, scenario.n_antennas
    N, K = scenario.n_elements, scenario.n_users
    corr = scenario.correlation
    spacing = scenario.spacing

    los_as = scenario.rician.los_fraction(scenario.rician.ap_surface_db)
    los_su = scenario.rician.los_fraction(scenario.rician.surface_user_db)

    def ap_corr_matrix(angle: float) -> np.ndarray:
        if corr.model == "exponential":
            return exponential_correlation(M, corr.ap_coeff)
        return local_scattering_correlation(M, angle, corr.angular_spread_deg, spacing)

    def surface_corr_matrix(angle: float) -> np.ndarray:
        if corr.model == "exponential":
            return exponential_correlation(N, corr.surface_coeff)
        return local_scattering_correlation(N, angle, corr.angular_spread_deg, spacing)

    direct_cov = np.empty((L, K, M, M), dtype=complex)
    ap_corr = np.empty((L, M, M), dtype=complex)
    surface_cov = np.empty((L, N, N), dtype=complex)
    user_cov = np.empty((K, N, N), dtype=complex)
    ap_surface_los = np.empty((L, M, N), dtype=complex)
    surface_user_los = np.empty((K, N), dtype=complex)

    surface_pos = geometry.surface_position
    for m in range(L):
        ap = geometry.ap_positions[m]
        to_surface = _unit(surface_pos - ap)
        ap_corr[m] = ap_corr_matrix(_azimuth(ap, surface_pos))
        surface_cov[m] = (
            gains.ap_surface[m] * (1.0 - los_as) * surface_corr_matrix(_azimuth(surface_pos, ap))
        )
        # Rank-one mean: AP response toward the surface times the surface
        # response toward the AP.
        a_ap = _linear_response(M, spacing, to_surface[0])
        a_sf = _planar_response(N, spacing, _unit(ap - surface_pos))
        ap_surface_los[m] = np.sqrt(gains.ap_surface[m] * los_as) * np.outer(a_ap, np.conj(a_sf))
        for k in range(K):
            user = geometry.user_positions[k]
            direct_cov[m, k] = (
                blocking[m, k] * gains.direct[m, k] * ap_corr_matrix(_azimuth(ap, user))
            )
    for k in range(K):
        user = geometry.user_positions[k]
        user_cov[k] = (
            gains.surface_user[k] * (1.0 - los_su) * surface_corr_matrix(_azimuth(surface_pos, user))
        )
        a_sf = _planar_response(N, spacing, _unit(user - surface_pos))
        surface_user_los[k] = np.sqrt(gains.surface_user[k] * los_su) * a_sf

    return ChannelStatistics(
        direct_cov=direct_cov,
        ap_corr=ap_corr,
        surface_cov=surface_cov,
        user_cov=user_cov,
        ap_surface_los=ap_surface_los,
        surface_user_los=surface_user_los,
        blocking=blocking,
    )


def generate_statistics(
    scenario: ScenarioConfig, rng: np.random.Generator, validate: bool = True
) -> ChannelStatistics:
    """Draw a network instance: geometry, blocking, and channel statistics."""
    geometry = generate_geometry(scenario, rng)
    gains = large_scale_fading(geometry, scenario.pathloss)
    blocking = sample_blocking(scenario, rng)
    stats = build_statistics(scenario, geometry, gains, blocking)
    if validate:
        stats.validate()
    return stats


class ChannelSampler:
    """Draws small-scale realizations consistent with fixed statistics.

    Square roots of every covariance are factored once at construction so
    repeated Monte Carlo batches stay cheap.
    """

    def __init__(self, stats: ChannelStatistics):
        self.stats = stats
        self._direct_root = psd_sqrt(stats.direct_cov)
        self._ap_root = psd_sqrt(stats.ap_corr)
        self._surface_root = psd_sqrt(stats.surface_cov)
        self._user_root = psd_sqrt(stats.user_cov)

    def sample(
        self, rng: np.random.Generator, size: int | None = None
    ) -> ChannelRealization:
        """One realization (``size=None``) or a batch with leading axis ``size``."""
        stats = self.stats
        L, K = stats.n_aps, stats.n_users
        M, N = stats.n_antennas, stats.n_elements
        batch = (size,) if size is not None else ()
        g = np.einsum(
            "lkmn,...lkn->...lkm",
            self._direct_root,
            complex_normal(rng, batch + (L, K, M)),
        )
        h = stats.ap_surface_los + np.einsum(
            "lab,...lbn,lnc->...lac",
            self._ap_root,
            complex_normal(rng, batch + (L, M, N)),
            self._surface_root,
        )
        z = stats.surface_user_los + np.einsum(
            "kmn,...kn->...km", self._user_root, complex_normal(rng, batch + (K, N))
        )
        return ChannelRealization(direct=g, ap_surface=h, surface_user=z)


def sample_channel_realization(
    stats: ChannelStatistics, rng: np.random.Generator, size: int | None = None
) -> ChannelRealization:
    """Convenience wrapper building a one-shot :class:`ChannelSampler`."""
    return ChannelSampler(stats).sample(rng, size)


def aggregated_channel(
    realization: ChannelRealization, theta: np.ndarray
) -> np.ndarray:
    """Effective channel per link: direct part plus the reflected path.

    Returns an (..., L, K, M) array for phase vector ``theta`` of length N.
    """
    phasors = np.exp(1j * np.asarray(theta))
    reflected = np.einsum(
        "...lmn,...kn->...lkm",
        realization.ap_surface,
        phasors * realization.surface_user,
    )
    return realization.direct + reflected
