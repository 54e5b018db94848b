"""Kalman-Bucy reference filter: closed-form fixed points and exact recursions."""

import numpy as np
import pytest

from mvfilter.errors import NotPositiveDefiniteError
from mvfilter.kalman import kalman_bucy, stationary_variance
from mvfilter.presets import LinearGaussianSpec, coefficient_preset
from mvfilter.sde import SimConfig, simulate_law_flow, simulate_truth


def _scalar_spec(a=0.0, c=1.0, s0=0.0, s1=0.0, s2=1.0, m0=0.0, p0=1.0):
    one = np.array([[1.0]])
    return LinearGaussianSpec(
        A=a * one,
        C=c * one,
        sigma0=s0 * one,
        sigma1=s1 * one,
        sigma2=s2 * one,
        m0=np.array([m0]),
        P0=p0 * one,
    )


def test_stationary_variance_closed_forms():
    # a=-1, c=1, unit noises: 0 = -2P + 1 - P^2 has root sqrt(2) - 1
    plain = coefficient_preset("linear-gaussian").linear
    assert abs(stationary_variance(plain) - (np.sqrt(2.0) - 1.0)) < 1e-12
    # adding sigma1 = 1/2 shifts the linear term: 0 = 1 - 3P - P^2
    corr = coefficient_preset("correlated-linear").linear
    assert abs(stationary_variance(corr) - (np.sqrt(13.0) - 3.0) / 2.0) < 1e-12


def test_stationary_variance_without_observation_is_lyapunov():
    spec = _scalar_spec(a=-0.8, c=0.0, s0=0.7)
    assert abs(stationary_variance(spec) - 0.7**2 / 1.6) < 1e-12
    # correlated noise feeds the gain even with c = 0 and cancels its own
    # contribution to the variance balance
    spec2 = _scalar_spec(a=-0.8, c=0.0, s0=0.7, s1=0.5)
    assert abs(stationary_variance(spec2) - 0.7**2 / 1.6) < 1e-12
    with pytest.raises(ValueError):
        stationary_variance(_scalar_spec(a=0.0, c=0.0, s0=1.0))


def test_noise_free_information_decay_matches_discrete_recursion():
    # A = 0, Q = 0: the Euler Riccati step is p <- p - p^2 dt and the mean
    # contracts by the same gain; both recursions are reproduced exactly
    spec = _scalar_spec(a=0.0, c=1.0, m0=1.0, p0=1.0)
    dt = 0.01
    times = dt * np.arange(51)
    y = np.zeros((51, 1))
    res = kalman_bucy(spec, times, y)
    p, m = 1.0, 1.0
    for k in range(50):
        m = m - p * m * dt
        p = p - p * p * dt
        assert abs(res.covs[k + 1, 0, 0] - p) < 1e-14
        assert abs(res.means[k + 1, 0] - m) < 1e-14
    # and the continuous solution p0 / (1 + p0 t) is approached at first order
    assert abs(res.covs[-1, 0, 0] - 1.0 / (1.0 + times[-1])) < 2.0 * dt


def test_riccati_flow_reaches_stationary_point():
    for name in ("linear-gaussian", "correlated-linear"):
        spec = coefficient_preset(name).linear
        times = 0.01 * np.arange(801)
        res = kalman_bucy(spec, times, np.zeros((801, 1)))
        assert abs(res.covs[-1, 0, 0] - stationary_variance(spec)) < 1e-3
        # covariances stay symmetric nonnegative along the way
        assert np.all(res.covs[:, 0, 0] >= 0.0)


def test_covariance_positivity_guard():
    spec = _scalar_spec(a=0.0, c=1.0, s2=1e-2, p0=1.0)
    times = 0.1 * np.arange(3)
    with pytest.raises(NotPositiveDefiniteError) as err:
        kalman_bucy(spec, times, np.zeros((3, 1)))
    assert err.value.step == 1


def test_tracking_error_is_filter_scale():
    # regression on a fixed seed: the conditional mean should sit within a
    # few stationary standard deviations of the hidden state
    preset = coefficient_preset("linear-gaussian")
    cfg = SimConfig(horizon=4.0, dt=0.01, n_law=8, seed=123)
    law = simulate_law_flow(preset.coefficients, preset.initial_law, cfg)
    truth = simulate_truth(preset.coefficients, law, preset.initial_law, cfg)
    res = kalman_bucy(preset.linear, truth.times, truth.Y)
    gap = abs(res.means[-1, 0] - truth.X[-1, 0])
    assert gap < 4.0 * np.sqrt(stationary_variance(preset.linear))
    assert abs(res.covs[-1, 0, 0] - stationary_variance(preset.linear)) < 1e-3


def test_stationary_signal_std_helper():
    spec = coefficient_preset("linear-gaussian").linear
    assert abs(spec.stationary_signal_std() - np.sqrt(0.5)) < 1e-12
