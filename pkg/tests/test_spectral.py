import numpy as np
import pytest

from cfris.errors import ConfigurationError
from cfris.estimator import PilotAssignment
from cfris.optimizer import equal_phases
from cfris.spectral import SeConfig, sinr_from_samples, uplink_rates


def test_se_config_validation():
    with pytest.raises(ConfigurationError):
        SeConfig(bandwidth_mhz=0.0)
    with pytest.raises(ConfigurationError):
        SeConfig(coherence_block=0)
    with pytest.raises(ConfigurationError):
        SeConfig(uplink_snr=-1.0)
    with pytest.raises(ConfigurationError):
        SeConfig(power_fraction=1.5)
    with pytest.raises(ConfigurationError):
        SeConfig(trials=0)


def test_sinr_single_user_noise_limited():
    # Constant channel c, perfect estimate, deterministic unit noise:
    # SINR = snr |c|^4 / |c|^2 = snr |c|^2 with no fluctuation/interference.
    c = 0.5 - 1.0j
    channels = np.full((8, 1, 1, 1), c)
    noise = np.ones((8, 1, 1), dtype=complex)
    sinr = sinr_from_samples(channels, channels.copy(), noise, uplink_snr=4.0)
    np.testing.assert_allclose(sinr, [4.0 * abs(c) ** 2])


def test_sinr_two_users_hand_computed_interference():
    # Both users share the channel [1, 0]; each combiner picks up the other
    # user fully, so SINR_k = snr / (snr + 1) with unit noise pickup.
    channels = np.zeros((1, 1, 2, 2), dtype=complex)
    channels[0, 0, :, 0] = 1.0
    estimates = channels.copy()
    noise = np.array([[[1.0, 0.0]]], dtype=complex)
    sinr = sinr_from_samples(channels, estimates, noise, uplink_snr=2.0)
    np.testing.assert_allclose(sinr, [2.0 / 3.0, 2.0 / 3.0])


def test_sinr_power_fraction_silences_a_user():
    channels = np.zeros((1, 1, 2, 2), dtype=complex)
    channels[0, 0, :, 0] = 1.0
    noise = np.array([[[1.0, 0.0]]], dtype=complex)
    sinr = sinr_from_samples(
        channels, channels.copy(), noise, uplink_snr=2.0,
        power_fraction=np.array([1.0, 0.0]),
    )
    # user 1 transmits nothing; user 0 sees no interference from it
    np.testing.assert_allclose(sinr, [2.0, 0.0])


def test_sinr_zero_denominator_reports_zero():
    channels = np.zeros((4, 2, 3, 2), dtype=complex)
    noise = np.zeros((4, 2, 2), dtype=complex)
    sinr = sinr_from_samples(channels, channels.copy(), noise, uplink_snr=1.0)
    np.testing.assert_array_equal(sinr, np.zeros(3))


def test_sinr_grows_with_uplink_power(rng):
    channels = (rng.normal(size=(64, 2, 3, 2)) + 1j * rng.normal(size=(64, 2, 3, 2)))
    estimates = channels + 0.1 * (
        rng.normal(size=channels.shape) + 1j * rng.normal(size=channels.shape)
    )
    noise = rng.normal(size=(64, 2, 2)) + 1j * rng.normal(size=(64, 2, 2))
    low = sinr_from_samples(channels, estimates, noise, uplink_snr=1.0)
    high = sinr_from_samples(channels, estimates, noise, uplink_snr=100.0)
    assert (high >= low).all()
    assert (high > low).any()


def test_uplink_rates_shapes_and_formula(stats, pilots, scenario):
    config = SeConfig(trials=96, batch_size=40, coherence_block=100)
    result = uplink_rates(
        stats, equal_phases(scenario.n_elements), pilots,
        scenario.pilot_snr, config, np.random.default_rng(5),
    )
    K = scenario.n_users
    assert result.sinr.shape == (K,)
    assert result.trials == 96
    assert (result.sinr >= 0.0).all() and np.isfinite(result.sinr).all()
    prelog = 1.0 - pilots.tau_p / config.coherence_block
    np.testing.assert_allclose(result.se, prelog * np.log2(1.0 + result.sinr))
    np.testing.assert_allclose(result.rate_mbps, config.bandwidth_mhz * result.se)
    assert (result.sinr > 0.0).any()


def test_uplink_rates_rejects_short_coherence_block(stats, pilots, scenario):
    config = SeConfig(trials=4, coherence_block=1)
    with pytest.raises(ConfigurationError):
        uplink_rates(
            stats, equal_phases(scenario.n_elements), pilots,
            scenario.pilot_snr, config, np.random.default_rng(0),
        )


def test_uplink_rates_deterministic_for_seed(stats, pilots, scenario):
    config = SeConfig(trials=32, batch_size=32)
    theta = equal_phases(scenario.n_elements)
    a = uplink_rates(stats, theta, pilots, scenario.pilot_snr, config,
                     np.random.default_rng(3))
    b = uplink_rates(stats, theta, pilots, scenario.pilot_snr, config,
                     np.random.default_rng(3))
    np.testing.assert_array_equal(a.sinr, b.sinr)
