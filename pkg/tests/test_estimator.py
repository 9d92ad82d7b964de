import numpy as np
import pytest

from cfris.channel import ChannelSampler, ChannelStatistics
from cfris.errors import ConfigurationError
from cfris.estimator import (
    PilotAssignment,
    aggregated_cov,
    aggregated_cross_cov,
    aggregated_mean,
    average_nmse,
    average_nmse_reference,
    build_estimator_bank,
    error_covariance,
    estimator_terms,
    lmmse_estimate,
    make_objective,
    nmse,
    nmse_matrix,
    received_pilot_signal,
)


def random_statistics(rng, L=2, M=2, N=6, K=4, blocked=()):
    """Random but valid second-order statistics, no geometry involved."""

    def psd(n, scale=1.0):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return scale * (a @ a.conj().T) / n

    def corr(n):
        mat = psd(n)
        d = np.sqrt(np.diagonal(mat).real)
        return mat / np.outer(d, d)

    blocking = np.ones((L, K))
    for m, k in blocked:
        blocking[m, k] = 0.0
    direct = np.zeros((L, K, M, M), dtype=complex)
    for m in range(L):
        for k in range(K):
            direct[m, k] = blocking[m, k] * psd(M, scale=rng.uniform(0.5, 2.0))
    ap_surface_los = np.empty((L, M, N), dtype=complex)
    for m in range(L):
        u = rng.normal(size=M) + 1j * rng.normal(size=M)
        v = rng.normal(size=N) + 1j * rng.normal(size=N)
        ap_surface_los[m] = np.outer(u, v) / np.sqrt(M * N)
    return ChannelStatistics(
        direct_cov=direct,
        ap_corr=np.stack([corr(M) for _ in range(L)]),
        surface_cov=np.stack([psd(N) for _ in range(L)]),
        user_cov=np.stack([psd(N, scale=rng.uniform(0.5, 2.0)) for _ in range(K)]),
        ap_surface_los=ap_surface_los,
        surface_user_los=(rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N)))
        / np.sqrt(N),
        blocking=blocking,
    )


def test_pilot_assignment_round_robin():
    pilots = PilotAssignment.round_robin(5, 2)
    np.testing.assert_array_equal(pilots.pilot_of, [0, 1, 0, 1, 0])
    np.testing.assert_array_equal(pilots.co_pilots(2), [0, 2, 4])
    assert pilots.n_groups == 2
    assert pilots.n_users == 5


def test_pilot_assignment_validation():
    with pytest.raises(ConfigurationError):
        PilotAssignment(np.array([0, 2]), tau_p=2)
    with pytest.raises(ConfigurationError):
        PilotAssignment(np.array([-1, 0]), tau_p=2)
    with pytest.raises(ConfigurationError):
        PilotAssignment(np.array([0, 1]), tau_p=0)


def test_nmse_forms_agree(rng):
    for trial in range(20):
        stats = random_statistics(rng)
        pilots = PilotAssignment.round_robin(4, 2)
        theta = rng.uniform(-np.pi, np.pi, 6)
        snr = 10 ** rng.uniform(-1, 3)
        for m in range(2):
            for k in range(4):
                terms = estimator_terms(stats, theta, pilots, snr, m, k)
                a = nmse(terms, method="cov")
                b = nmse(terms, method="gain")
                assert abs(a - b) < 1e-9, (trial, m, k)


def test_nmse_rejects_unknown_method(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    terms = estimator_terms(stats, theta, pilots, scenario.pilot_snr, 0, 0)
    with pytest.raises(ConfigurationError):
        nmse(terms, method="mse")


def test_nmse_in_unit_interval(rng):
    for _ in range(30):
        stats = random_statistics(rng, blocked=((0, 1), (1, 2)))
        pilots = PilotAssignment.round_robin(4, rng.integers(1, 5))
        theta = rng.uniform(-np.pi, np.pi, 6)
        snr = 10 ** rng.uniform(-2, 4)
        values = nmse_matrix(stats, theta, pilots, snr)
        assert (values >= 0.0).all() and (values <= 1.0 + 1e-12).all()


def test_nmse_degenerate_link_reports_zero(rng):
    stats = random_statistics(rng, blocked=((0, 0),))
    # remove the surface path entirely for user 0 as well
    stats.user_cov[0] = 0.0
    stats.surface_user_los[0] = 0.0
    pilots = PilotAssignment.round_robin(4, 2)
    theta = rng.uniform(-np.pi, np.pi, 6)
    values = nmse_matrix(stats, theta, pilots, snr=100.0)
    assert values[0, 0] == 0.0
    assert (values[:, 1:] > 0.0).all()


def test_nmse_monotone_in_power_and_small_at_high_power(rng):
    # orthogonal pilots on an unblocked instance with O(1) link gains:
    # more pilot power can only help, and at p = 1e4 the estimate is
    # essentially exact
    stats = random_statistics(rng)
    pilots = PilotAssignment.round_robin(4, 4)
    theta = rng.uniform(-np.pi, np.pi, 6)
    powers = [1e-2, 1e-1, 1.0, 1e2, 1e4]
    values = [average_nmse(stats, theta, pilots, p) for p in powers]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < 0.05


def test_nmse_matrix_validates_theta(stats, pilots, scenario):
    with pytest.raises(ConfigurationError):
        nmse_matrix(stats, np.zeros(scenario.n_elements + 1), pilots, 1.0)
    short = PilotAssignment.round_robin(scenario.n_users - 1, scenario.tau_p)
    with pytest.raises(ConfigurationError):
        nmse_matrix(stats, np.zeros(scenario.n_elements), short, 1.0)


def test_average_nmse_matches_reference(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    fast = average_nmse(stats, theta, pilots, scenario.pilot_snr)
    dense = average_nmse_reference(stats, theta, pilots, scenario.pilot_snr)
    np.testing.assert_allclose(fast, dense, rtol=1e-10)


def test_make_objective_binds_arguments(stats, pilots, scenario, rng):
    objective = make_objective(stats, pilots, scenario.pilot_snr)
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    np.testing.assert_allclose(
        objective(theta), average_nmse(stats, theta, pilots, scenario.pilot_snr)
    )


def test_received_pilot_signal_shared_noise_within_group(stats, pilots, scenario, rng):
    sampler = ChannelSampler(stats)
    r = sampler.sample(rng, 3)
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    y = received_pilot_signal(r, stats, theta, pilots, scenario.pilot_snr, rng=rng)
    assert y.shape == (3, scenario.n_aps, scenario.n_users, scenario.n_antennas)
    # co-pilot users see the identical projected observation
    np.testing.assert_array_equal(y[..., 0, :], y[..., 2, :])
    np.testing.assert_array_equal(y[..., 1, :], y[..., 3, :])
    assert not np.array_equal(y[..., 0, :], y[..., 1, :])


def test_received_pilot_signal_explicit_noise_and_scaling(stats, pilots, scenario, rng):
    from cfris.channel import aggregated_channel

    sampler = ChannelSampler(stats)
    r = sampler.sample(rng)
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    noise = np.zeros(
        (scenario.n_aps, pilots.n_groups, scenario.n_antennas), dtype=complex
    )
    y = received_pilot_signal(
        stats=stats, realization=r, theta=theta, pilots=pilots,
        snr=scenario.pilot_snr, noise=noise,
    )
    u = aggregated_channel(r, theta)
    scale = np.sqrt(scenario.pilot_snr * pilots.tau_p)
    expected = scale * (u[:, 0] + u[:, 2])
    np.testing.assert_allclose(y[:, 0], expected, rtol=1e-12)
    with pytest.raises(ConfigurationError):
        received_pilot_signal(r, stats, theta, pilots, scenario.pilot_snr)


def test_lmmse_estimate_recovers_mean_at_mean_observation(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    terms = estimator_terms(stats, theta, pilots, scenario.pilot_snr, 0, 0)
    at_mean = lmmse_estimate(
        terms, np.sqrt(terms.snr * terms.tau_p) * terms.mean_sum
    )
    np.testing.assert_allclose(at_mean, terms.mean, atol=1e-12)


def test_error_covariance_is_psd(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    for m in range(scenario.n_aps):
        for k in range(scenario.n_users):
            terms = estimator_terms(stats, theta, pilots, scenario.pilot_snr, m, k)
            cov = error_covariance(terms)
            eigs = np.linalg.eigvalsh(cov)
            assert eigs.min() > -1e-9 * max(eigs.max(), 1e-300)


def test_estimator_bank_matches_per_link_estimates(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    bank = build_estimator_bank(stats, theta, pilots, scenario.pilot_snr)
    sampler = ChannelSampler(stats)
    r = sampler.sample(rng, 2)
    y = received_pilot_signal(r, stats, theta, pilots, scenario.pilot_snr, rng=rng)
    batched = bank.estimate(y)
    m, k = 1, 3
    terms = estimator_terms(stats, theta, pilots, scenario.pilot_snr, m, k)
    np.testing.assert_allclose(
        batched[:, m, k], lmmse_estimate(terms, y[:, m, k]), rtol=1e-9, atol=1e-14
    )


def test_aggregated_moments_match_terms(stats, pilots, scenario, rng):
    theta = rng.uniform(-np.pi, np.pi, scenario.n_elements)
    mean = aggregated_mean(stats, theta)
    cov = aggregated_cov(stats, theta)
    cross = aggregated_cross_cov(stats, theta)
    for m in range(scenario.n_aps):
        for k in range(scenario.n_users):
            terms = estimator_terms(stats, theta, pilots, scenario.pilot_snr, m, k)
            np.testing.assert_allclose(mean[m, k], terms.mean, atol=1e-12)
            np.testing.assert_allclose(cov[m, k], terms.channel_cov, atol=1e-12)
            np.testing.assert_allclose(cross[m, k, k], terms.channel_cov, atol=1e-12)
