"""Preset construction, coefficient validation and hypothesis screening."""

from dataclasses import replace

import numpy as np
import pytest

from mvfilter.coefficients import (
    CoefficientSet,
    CouplingMode,
    HypothesisConstants,
    SamplerConfig,
    estimate_hypotheses,
    observation_h,
)
from mvfilter.errors import DimensionMismatchError
from mvfilter.measures import EmpiricalMeasure
from mvfilter.presets import (
    InitialLaw,
    bounded_preset_names,
    coefficient_preset,
    preset_names,
    with_observation_drift,
)


def test_preset_registry():
    names = preset_names()
    assert set(names) == {"linear-gaussian", "correlated-linear", "mean-field-linear",
                          "tanh-observation", "sensor-correlated"}
    assert set(bounded_preset_names()) == {"tanh-observation", "sensor-correlated"}
    with pytest.raises(ValueError, match="unknown preset"):
        coefficient_preset("zakai")


def test_linear_presets_carry_matrix_reference():
    lg = coefficient_preset("linear-gaussian")
    assert lg.linear is not None
    assert abs(lg.linear.stationary_signal_std() - np.sqrt(0.5)) < 1e-15
    assert lg.params["sigma1"] == 0.0
    cl = coefficient_preset("correlated-linear")
    assert cl.params["sigma1"] == 0.5
    # a mean-field term breaks the closed linear reference
    assert coefficient_preset("mean-field-linear").linear is None
    assert coefficient_preset("mean-field-linear", abar=0.0).linear is not None


def test_initial_law_sampling_moments():
    rng = np.random.default_rng(0)
    point = InitialLaw("point", [1.5], 0.0)
    assert np.all(point.sample(rng, 7) == 1.5)
    gauss = InitialLaw("gaussian", [0.0], 0.8)
    uni = InitialLaw("uniform", [0.0], 0.8)
    gs = gauss.sample(rng, 40000)
    us = uni.sample(rng, 40000)
    assert abs(gs.var() - 0.64) < 0.64 * 0.05
    assert abs(us.var() - 0.64) < 0.64 * 0.05
    assert np.max(np.abs(us)) <= 0.8 * np.sqrt(3.0) + 1e-12
    assert np.array_equal(gauss.mean(), [0.0])
    assert np.array_equal(gauss.cov(), [[0.8 ** 2]])
    with pytest.raises(ValueError, match="kind"):
        InitialLaw("dirac", [0.0], 0.0)


def test_validate_rejects_bad_shapes_and_conditioning():
    c = coefficient_preset("linear-gaussian").coefficients
    bad = replace(c, b1=lambda t, x, mu: np.zeros(x.shape[0]))
    with pytest.raises(DimensionMismatchError, match="b1"):
        bad.validate()

    def two_channel(s2):
        return CoefficientSet(
            n=1, d=1, m=2,
            b1=lambda t, x, mu: -x,
            sigma0=lambda t, x, mu: np.ones((x.shape[0], 1, 1)),
            sigma1=lambda t, x, mu: np.zeros((x.shape[0], 1, 2)),
            b2=lambda t, x, mu: np.concatenate([x, x], axis=1),
            sigma2=lambda t: s2,
            constants=HypothesisConstants(lipschitz=2.0, growth=1.5, observation_bound=10.0),
        )

    two_channel(np.eye(2)).validate()
    nearly_singular = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-12]])
    with pytest.raises(ValueError, match="condition"):
        two_channel(nearly_singular).validate()


def test_sensor_mixing_unit_covariance():
    preset = coefficient_preset("sensor-correlated")
    c = preset.coefficients
    assert c.mode == CouplingMode.SENSOR
    gap = c.sensor_sigma2 @ c.sensor_sigma2.T + c.sensor_sigma3 @ c.sensor_sigma3.T - np.eye(1)
    assert np.max(np.abs(gap)) <= 1e-12
    with pytest.raises(ValueError, match="unit-covariance"):
        coefficient_preset("sensor-correlated", mix2=0.9, mix3=0.6)
    with pytest.raises(ValueError, match="sensor mode requires"):
        replace(c, sensor_sigma2=None).validate()


def test_observation_h_by_mode():
    x = np.array([[0.3], [-1.0]])
    mu = EmpiricalMeasure.from_points(x)
    signal = coefficient_preset("tanh-observation", gamma=0.7).coefficients
    scaled = replace(signal, sigma2=lambda t: np.array([[2.0]]))
    assert np.allclose(observation_h(signal, 0.0, x, mu), 0.7 * np.tanh(x))
    assert np.allclose(observation_h(scaled, 0.0, x, mu), 0.35 * np.tanh(x))
    sensor = coefficient_preset("sensor-correlated", gamma=0.5).coefficients
    assert np.allclose(observation_h(sensor, 0.0, x, mu), 0.5 * np.tanh(x))


def test_signal_noise_dims_by_mode():
    assert coefficient_preset("tanh-observation").coefficients.signal_noise_dims() == 1
    assert coefficient_preset("sensor-correlated").coefficients.signal_noise_dims() == 1


def test_with_observation_drift_variants():
    preset = coefficient_preset("tanh-observation")
    x = np.array([[2.0]])
    mu = EmpiricalMeasure.from_points(x)
    silent = with_observation_drift(preset, "zero")
    assert np.all(silent.coefficients.b2(0.0, x, mu) == 0.0)
    loud = with_observation_drift(preset, "constant", value=0.4)
    assert np.all(loud.coefficients.b2(0.0, x, mu) == 0.4)
    assert loud.params["b2_value"] == 0.4
    assert "constant-observation" in loud.coefficients.label
    with pytest.raises(ValueError, match="kind"):
        with_observation_drift(preset, "linear")


def test_hypothesis_screening_accepts_honest_declarations():
    for name in preset_names():
        report = estimate_hypotheses(coefficient_preset(name).coefficients,
                                     SamplerConfig(n_samples=120, seed=5))
        assert report.passed, (name, report.estimates, report.declared, report.flags)


def test_hypothesis_screening_flags_understated_constants():
    c = coefficient_preset("tanh-observation").coefficients
    lying = replace(c, constants=HypothesisConstants(
        lipschitz=0.01, growth=c.constants.growth,
        observation_bound=c.constants.observation_bound,
        sup_bound=c.constants.sup_bound))
    report = estimate_hypotheses(lying, SamplerConfig(n_samples=120, seed=5))
    assert not report.passed
    assert not report.flags["state_lipschitz"]
    assert report.flags["growth"]


def test_hypothesis_estimates_are_running_maxima():
    c = coefficient_preset("sensor-correlated").coefficients
    small = estimate_hypotheses(c, SamplerConfig(n_samples=40, seed=11))
    large = estimate_hypotheses(c, SamplerConfig(n_samples=160, seed=11))
    for key, est in small.estimates.items():
        assert large.estimates[key] >= est - 1e-15


def test_sup_bound_flag_only_for_bounded_models():
    unbounded = estimate_hypotheses(coefficient_preset("linear-gaussian").coefficients,
                                    SamplerConfig(n_samples=30))
    bounded = estimate_hypotheses(coefficient_preset("tanh-observation").coefficients,
                                  SamplerConfig(n_samples=30))
    assert "sup_bound" not in unbounded.flags
    assert "sup_bound" in bounded.flags
