"""Cylindrical functionals of measures: values, partials, measure derivative.

The measure-derivative oracle is a first-order Taylor expansion along an
L2 perturbation of the atoms: pushing every atom y -> y + t eta(y) changes
F(x, mu) by t <mu, dF/dmu(x, mu)(y) . eta(y)> + O(t^2).
"""

import numpy as np
import pytest

from mvfilter.functionals import (
    CylindricalStateFunctional,
    MeasureFunctional,
    linear_outer,
    load_battery_manifest,
    measure_battery,
    outer_from_scalar,
    outer_from_state,
    outer_product,
    quadratic_outer,
    state_battery,
    tanh_outer,
)
from mvfilter.measures import EmpiricalMeasure
from mvfilter.testfunctions import coordinate, gaussian, quadratic, tanh_of_linear


def sample_measure(rng, n=30, dim=1, weighted=True):
    pts = rng.standard_normal((n, dim))
    w = rng.random(n) + 0.2 if weighted else None
    return EmpiricalMeasure.from_points(pts, w)


def test_measure_functional_value_composition():
    rng = np.random.default_rng(20)
    mu = sample_measure(rng)
    phi1, phi2 = coordinate(1), gaussian(1, 1.0)
    G = MeasureFunctional((phi1, phi2), quadratic_outer(np.eye(2), [0.5, -1.0], 0.3))
    z = np.array([mu.integrate(phi1.value_fn), mu.integrate(phi2.value_fn)])
    assert np.allclose(G.zvec(mu), z)
    assert np.isclose(G.value(mu), z @ z + 0.5 * z[0] - z[1] + 0.3)
    assert np.isclose(G.value_of_z(z), G.value(mu))


def test_arity_mismatch_raises():
    with pytest.raises(ValueError):
        MeasureFunctional((coordinate(1),), quadratic_outer(np.eye(2)))
    with pytest.raises(ValueError):
        CylindricalStateFunctional((coordinate(1),), outer_from_scalar(quadratic_outer(np.eye(2)), 1))


def test_scalar_outer_derivatives_by_finite_differences():
    rng = np.random.default_rng(21)
    z0 = rng.standard_normal(3)
    eps = 1e-6
    for g in (linear_outer([1.0, -2.0, 0.5], 0.1), tanh_outer([0.7, 0.2, -0.4], -0.3),
              quadratic_outer(rng.standard_normal((3, 3)), rng.standard_normal(3), 0.2)):
        grad = g.grad(z0)
        hess = g.hess(z0)
        for i in range(3):
            e = np.zeros(3)
            e[i] = eps
            assert np.isclose(grad[i], (g.value(z0 + e) - g.value(z0 - e)) / (2 * eps), atol=1e-6)
            assert np.allclose(hess[:, i], (g.grad(z0 + e) - g.grad(z0 - e)) / (2 * eps), atol=1e-5)


def state_functional_zoo(rng):
    psi1, psi2 = gaussian(1, 1.0), tanh_of_linear(np.array([0.8]), 0.1)
    tf = quadratic(np.array([[0.6]]), np.array([0.2]), 0.0)
    return [
        CylindricalStateFunctional((psi1, psi2), outer_from_scalar(tanh_outer([1.0, -0.5]), 1)),
        CylindricalStateFunctional((psi1,), outer_from_state(tf, 1)),
        CylindricalStateFunctional((psi1, psi2), outer_product(tf, quadratic_outer(np.eye(2), [0.1, 0.2]))),
    ]


def test_state_functional_x_derivatives():
    rng = np.random.default_rng(22)
    mu = sample_measure(rng)
    xs = rng.standard_normal((6, 1))
    eps = 1e-6
    for F in state_functional_zoo(rng):
        g = F.grad_x(xs, mu)
        h = F.hess_x(xs, mu)
        fd_g = (F.value(xs + eps, mu) - F.value(xs - eps, mu)) / (2 * eps)
        assert np.allclose(g[:, 0], fd_g, atol=1e-5)
        fd_h = (F.value(xs + 1e-4, mu) - 2 * F.value(xs, mu) + F.value(xs - 1e-4, mu)) / 1e-8
        assert np.allclose(h[:, 0, 0], fd_h, atol=1e-3)


def test_lions_derivative_matches_perturbation_oracle():
    rng = np.random.default_rng(23)
    mu = sample_measure(rng, n=40)
    x0 = np.array([0.4])

    def eta(y):
        return np.sin(y)

    for F in state_functional_zoo(rng):
        base = F.value(x0, mu)
        deriv = F.lions_derivative(x0, mu, mu.points)  # (M, 1)
        pairing = mu.integrate(np.sum(deriv * eta(mu.points), axis=1))
        got = []
        for t in (1e-4, 5e-5):
            mut = EmpiricalMeasure(mu.points + t * eta(mu.points), mu.weights)
            got.append((F.value(x0, mut) - base) / t)
        # Richardson: the t->0 limit should approach the pairing linearly
        extrap = 2 * got[1] - got[0]
        assert np.isclose(extrap, pairing, rtol=2e-4, atol=1e-7)


def test_lions_derivative_jacobian_by_fd_in_y():
    rng = np.random.default_rng(24)
    mu = sample_measure(rng)
    x0 = np.array([0.1])
    y = rng.standard_normal((5, 1))
    eps = 1e-6
    for F in state_functional_zoo(rng):
        jac = F.lions_derivative_jacobian(x0, mu, y)
        fd = (F.lions_derivative(x0, mu, y + eps) - F.lions_derivative(x0, mu, y - eps)) / (2 * eps)
        assert np.allclose(jac[:, :, 0], fd, atol=1e-5)


def test_batteries_load_and_evaluate():
    manifest = load_battery_manifest()
    assert {e["kind"] for e in manifest["entries"]} == {"measure", "state"}
    rng = np.random.default_rng(25)
    mu = sample_measure(rng, n=25)
    for G in measure_battery(1):
        assert G.ident
        v = G.value(mu)
        assert np.isfinite(v)
    for F in state_battery(1):
        assert F.ident
        v = F.value(np.array([0.3]), mu)
        assert np.isfinite(v)
    # idents are unique within each battery
    mids = [G.ident for G in measure_battery(1)]
    sids = [F.ident for F in state_battery(1)]
    assert len(set(mids)) == len(mids)
    assert len(set(sids)) == len(sids)


def test_battery_dimension_two():
    rng = np.random.default_rng(26)
    mu = sample_measure(rng, n=20, dim=2)
    for G in measure_battery(2):
        assert np.isfinite(G.value(mu))
