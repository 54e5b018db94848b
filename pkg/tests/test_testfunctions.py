"""Finite-difference sweeps over every shipped test-function family."""

import numpy as np
import pytest

from mvfilter.testfunctions import (
    bump,
    constant,
    coordinate,
    gaussian,
    linear,
    plateau,
    quadratic,
    tanh_of_linear,
    windowed_coordinate,
    windowed_quadratic,
)


def families(dim):
    rng = np.random.default_rng(dim)
    a = rng.standard_normal(dim)
    q = rng.standard_normal((dim, dim))
    q = 0.5 * (q + q.T)
    fams = [
        constant(dim, 2.5),
        linear(a, 0.3),
        coordinate(dim, dim - 1),
        quadratic(q, a, -0.7),
        gaussian(dim, 1.3, center=0.2 * a, amplitude=0.8),
        tanh_of_linear(a, 0.1),
        plateau(dim, 1.0, 2.5),
        bump(dim, 2.0),
        windowed_coordinate(dim, 0, 2.0, 4.0),
        windowed_quadratic(q, a, 0.1, 2.0, 4.0),
    ]
    return fams


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_gradient_matches_finite_differences(dim):
    rng = np.random.default_rng(100 + dim)
    pts = rng.standard_normal((12, dim)) * 1.5
    eps = 1e-6
    for tf in families(dim):
        grads = tf.grad_fn(pts)
        for i in range(dim):
            shift = np.zeros(dim)
            shift[i] = eps
            fd = (tf.value_fn(pts + shift) - tf.value_fn(pts - shift)) / (2 * eps)
            assert np.allclose(grads[:, i], fd, atol=5e-6), tf


@pytest.mark.parametrize("dim", [1, 2])
def test_hessian_matches_finite_differences(dim):
    rng = np.random.default_rng(200 + dim)
    pts = rng.standard_normal((8, dim)) * 1.5
    eps = 1e-4
    for tf in families(dim):
        hess = tf.hess_fn(pts)
        for i in range(dim):
            for j in range(dim):
                ei = np.zeros(dim)
                ej = np.zeros(dim)
                ei[i] = eps
                ej[j] = eps
                fd = (
                    tf.value_fn(pts + ei + ej)
                    - tf.value_fn(pts + ei - ej)
                    - tf.value_fn(pts - ei + ej)
                    + tf.value_fn(pts - ei - ej)
                ) / (4 * eps * eps)
                assert np.allclose(hess[:, i, j], fd, atol=2e-4), tf


def test_windowed_functions_vanish_outside_outer_radius():
    rng = np.random.default_rng(3)
    far = 10.0 + rng.random((20, 2)) * 5.0
    for tf in (
        plateau(2, 1.0, 2.5),
        bump(2, 2.0),
        windowed_coordinate(2, 0, 2.0, 4.0),
        windowed_quadratic(np.eye(2), np.zeros(2), 0.0, 2.0, 4.0),
    ):
        assert np.all(tf.value_fn(far) == 0.0)
        assert np.all(tf.grad_fn(far) == 0.0)
        assert np.all(tf.hess_fn(far) == 0.0)


def test_plateau_is_one_inside_inner_radius():
    tf = plateau(2, 1.0, 3.0, center=np.array([0.5, -0.5]))
    pts = np.array([[0.5, -0.5], [1.0, -0.5], [0.5, 0.3]])
    assert np.allclose(tf.value_fn(pts), 1.0)
    assert np.all((tf.value_fn(np.random.default_rng(4).standard_normal((50, 2)) * 3) >= 0.0))


def test_gaussian_closed_form():
    tf = gaussian(1, variance=2.0, amplitude=3.0)
    x = np.array([[0.0], [1.0]])
    want = 3.0 * np.exp(-np.array([0.0, 1.0]) / 4.0)
    assert np.allclose(tf.value_fn(x), want, rtol=1e-12)


def test_windowed_coordinate_matches_plain_inside_window():
    tf = windowed_coordinate(1, 0, 3.0, 6.0)
    x = np.linspace(-2.9, 2.9, 7)[:, None]
    assert np.allclose(tf.value_fn(x), x[:, 0], atol=1e-12)


def test_quadratic_closed_form():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -1.0])
    tf = quadratic(q, b, 0.25)
    x = np.array([[1.0, 2.0]])
    want = x[0] @ q @ x[0] + b @ x[0] + 0.25
    assert np.isclose(tf.value_fn(x)[0], want)
    assert np.allclose(tf.hess_fn(x)[0], 2.0 * q)


def test_estimated_c2_norm_positive_and_stable():
    tf = tanh_of_linear(np.array([1.0]))
    n1 = tf.estimated_c2_norm()
    n2 = tf.estimated_c2_norm()
    assert n1 == n2 > 0.0


def test_cosh_power_kills_scaled_gain():
    from mvfilter.testfunctions import cosh_power, fd_gradient, fd_hessian

    p = 2.8
    tf = cosh_power(p)
    x = np.linspace(-3.0, 3.0, 25)[:, None]
    assert np.allclose(tf.value_fn(x), np.cosh(x[:, 0]) ** (-p), rtol=1e-12)
    for pt in (np.array([-1.7]), np.array([0.3]), np.array([2.2])):
        assert np.allclose(tf.grad_fn(pt[None, :])[0], fd_gradient(tf, pt), atol=2e-8)
        assert np.allclose(tf.hess_fn(pt[None, :])[0], fd_hessian(tf, pt), atol=2e-6)
    # the defining property: f * (p * s) * tanh + s * f' = 0 for any scale s
    s = 0.25
    cancel = tf.value_fn(x) * (p * s) * np.tanh(x[:, 0]) + s * tf.grad_fn(x)[:, 0]
    assert np.max(np.abs(cancel)) < 1e-14
    with pytest.raises(ValueError):
        cosh_power(0.0)
