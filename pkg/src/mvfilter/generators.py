"""Generators acting on test functions and on cylindrical functionals.

Three layers, all evaluated against weighted point-cloud measures:

- :func:`state_generator`: second-order drift-diffusion operator on scalar
  test functions (the x-part shared by everything else).
- :func:`mean_field_generator`: the operator for functionals F(x, mu) of the
  state together with its (deterministic) law; the measure term of the
  cylindrical F reduces to inner products of the state generator applied to
  the inner functions.
- :func:`filter_law_generator`: the operator driving functionals G(nu) of
  the unnormalized filter measure, whose second-order term is built from
  the observation-gain integrands.
"""

from __future__ import annotations

import numpy as np

from .coefficients import CoefficientSet, CouplingMode, observation_h
from .functionals import CylindricalStateFunctional, MeasureFunctional
from .measures import EmpiricalMeasure
from .testfunctions import TestFunction

__all__ = [
    "state_generator",
    "mean_field_generator",
    "filter_law_generator",
    "gain_integrand",
    "effective_sigma1",
]


def _xpart(c: CoefficientSet, t: float, x: np.ndarray, mu: EmpiricalMeasure, grads, hesses) -> np.ndarray:
    """grad . b1 + 0.5 tr(hess (sigma0 sigma0^T + sigma1 sigma1^T)), batched."""
    b1v = np.asarray(c.b1(t, x, mu), dtype=float)
    s0 = np.asarray(c.sigma0(t, x, mu), dtype=float)
    s1 = np.asarray(c.sigma1(t, x, mu), dtype=float)
    diff = np.einsum("nij,nkj->nik", s0, s0) + np.einsum("nij,nkj->nik", s1, s1)
    drift = np.einsum("ni,ni->n", grads, b1v)
    return drift + 0.5 * np.einsum("nij,nij->n", hesses, diff)


def state_generator(c: CoefficientSet, t: float, tf: TestFunction, mu: EmpiricalMeasure, x) -> np.ndarray | float:
    """Drift-diffusion generator applied to a test function at x.

    x may be a single point (n,) or a batch (N, n); the measure argument
    feeds the coefficients only.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    xb = arr[None, :] if single else arr
    out = _xpart(c, t, xb, mu, tf.grad_fn(xb), tf.hess_fn(xb))
    return float(out[0]) if single else out


def mean_field_generator(
    c: CoefficientSet, t: float, F: CylindricalStateFunctional, mu: EmpiricalMeasure, x
) -> np.ndarray | float:
    """Generator of the state paired with its law, applied to F at (x, mu).

    The state part reuses :func:`_xpart` on F's x-derivatives.  For
    cylindrical F the measure part collapses to
    ``sum_j d f/d z_j (x, z) * <mu, state_generator psi_j>``: the inner
    products are x-independent and computed once per call.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    xb = arr[None, :] if single else arr
    z = F.zvec(mu)

    xpart = _xpart(c, t, xb, mu, F.outer.grad_x(xb, z), F.outer.hess_x(xb, z))

    atoms = mu.points
    inner = np.array(
        [
            mu.integrate(_xpart(c, t, atoms, mu, psi.grad_fn(atoms), psi.hess_fn(atoms)))
            for psi in F.psis
        ]
    )
    mupart = F.outer.grad_z(xb, z) @ inner
    out = xpart + mupart
    return float(out[0]) if single else out


def effective_sigma1(c: CoefficientSet, t: float, x: np.ndarray, mu: EmpiricalMeasure) -> np.ndarray:
    """Matrix pairing particle gradients with the innovation noise, (N, n, m).

    Signal mode: sigma1 itself.  Sensor mode: sigma1 sigma2_mix^T, the
    component of the signal noise visible in the compound observation.
    """
    s1 = np.asarray(c.sigma1(t, x, mu), dtype=float)
    if c.mode == CouplingMode.SENSOR:
        return s1 @ c.sensor_sigma2.T
    return s1


def gain_integrand(c: CoefficientSet, t: float, tf: TestFunction, mu: EmpiricalMeasure, x: np.ndarray) -> np.ndarray:
    """Per-particle integrand of the innovation term: phi h^j + d_i phi S1^{ij}.

    Returns (N, m).  S1 is :func:`effective_sigma1`; its second summand is
    the correlated-noise correction that distinguishes this model class from
    filters with independent noises.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    h = observation_h(c, t, xb, mu)
    vals = tf.value_fn(xb)
    grads = tf.grad_fn(xb)
    s1 = effective_sigma1(c, t, xb, mu)
    return vals[:, None] * h + np.einsum("ni,nij->nj", grads, s1)


def filter_law_generator(
    c: CoefficientSet, t: float, G: MeasureFunctional, nu: EmpiricalMeasure, law: EmpiricalMeasure
) -> float:
    """Generator of the filter-measure evolution applied to G at nu.

    ``nu`` is the (possibly unnormalized) filter cloud; ``law`` is the
    unconditional signal law feeding the coefficients.  First-order term
    pairs grad g with <nu, state_generator phi_u>; second-order term pairs
    hess g with the innovation-channel products
    ``sum_l <nu, gain_u^l> <nu, gain_v^l>``.
    """
    z = G.zvec(nu)
    atoms = nu.points
    b = np.array(
        [
            nu.integrate(_xpart(c, t, atoms, law, phi.grad_fn(atoms), phi.hess_fn(atoms)))
            for phi in G.phis
        ]
    )
    gains = np.stack([nu.integrate(gain_integrand(c, t, phi, law, atoms)) for phi in G.phis])
    quad = gains @ gains.T  # (k, k): sum over innovation channels
    return float(G.outer.grad(z) @ b + 0.5 * np.sum(G.outer.hess(z) * quad))
