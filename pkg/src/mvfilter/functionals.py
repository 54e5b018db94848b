"""Cylindrical functionals of measures and of state-measure pairs.

Both functional classes used by the diagnostics are cylindrical: they see a
measure only through finitely many smoothed moments z_j = <mu, psi_j>.  For
``F(x, mu) = f(x, z)`` the measure derivative has the closed form

    dF/dmu (x, mu)(y) = sum_j  d f / d z_j (x, z) * grad psi_j (y),

which is what :meth:`CylindricalStateFunctional.lions_derivative` returns;
its y-Jacobian swaps ``grad psi_j`` for the Hessian.  The outer functions f
and g are built from bounded smooth primitives with analytic partials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .measures import EmpiricalMeasure
from .testfunctions import TestFunction, testfunction_from_spec

__all__ = [
    "ScalarOuter",
    "identity_outer",
    "linear_outer",
    "tanh_outer",
    "quadratic_outer",
    "OuterXZ",
    "outer_from_scalar",
    "outer_from_state",
    "outer_product",
    "MeasureFunctional",
    "CylindricalStateFunctional",
    "load_battery_manifest",
    "measure_battery",
    "state_battery",
]


@dataclass(frozen=True)
class ScalarOuter:
    """Smooth g: R^k -> R with gradient and Hessian callables."""

    k: int
    value: Callable
    grad: Callable
    hess: Callable


def identity_outer() -> ScalarOuter:
    return linear_outer([1.0])


def linear_outer(a, b: float = 0.0) -> ScalarOuter:
    a = np.asarray(a, dtype=float).reshape(-1)
    k = a.shape[0]
    return ScalarOuter(
        k,
        lambda z: float(np.dot(a, z) + b),
        lambda z: a.copy(),
        lambda z: np.zeros((k, k)),
    )


def tanh_outer(a, b: float = 0.0) -> ScalarOuter:
    """g(z) = tanh(a . z + b), bounded with bounded derivatives."""
    a = np.asarray(a, dtype=float).reshape(-1)
    k = a.shape[0]
    aa = np.outer(a, a)

    def value(z):
        return float(np.tanh(np.dot(a, z) + b))

    def grad(z):
        t = np.tanh(np.dot(a, z) + b)
        return (1.0 - t * t) * a

    def hess(z):
        t = np.tanh(np.dot(a, z) + b)
        return -2.0 * t * (1.0 - t * t) * aa

    return ScalarOuter(k, value, grad, hess)


def quadratic_outer(q, b=None, c: float = 0.0) -> ScalarOuter:
    """g(z) = z . q z + b . z + c (unbounded; for derivative checks)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    q = 0.5 * (q + q.T)
    k = q.shape[0]
    bv = np.zeros(k) if b is None else np.asarray(b, dtype=float).reshape(k)
    return ScalarOuter(
        k,
        lambda z: float(z @ q @ z + bv @ z + c),
        lambda z: 2.0 * q @ z + bv,
        lambda z: 2.0 * q.copy(),
    )


@dataclass(frozen=True)
class OuterXZ:
    """Smooth f: R^n x R^k -> R with the partials the generators need."""

    k: int
    value: Callable  # (x batch (N,n), z (k,)) -> (N,)
    grad_x: Callable  # -> (N, n)
    hess_x: Callable  # -> (N, n, n)
    grad_z: Callable  # -> (N, k)


def outer_from_scalar(g: ScalarOuter, dim: int) -> OuterXZ:
    """f(x, z) = g(z): no state dependence."""
    return OuterXZ(
        g.k,
        lambda x, z: np.full(x.shape[0], g.value(z)),
        lambda x, z: np.zeros((x.shape[0], dim)),
        lambda x, z: np.zeros((x.shape[0], dim, dim)),
        lambda x, z: np.broadcast_to(g.grad(z), (x.shape[0], g.k)).copy(),
    )


def outer_from_state(tf: TestFunction, k: int = 1) -> OuterXZ:
    """f(x, z) = tf(x): no measure dependence."""
    return OuterXZ(
        k,
        lambda x, z: tf.value_fn(x),
        lambda x, z: tf.grad_fn(x),
        lambda x, z: tf.hess_fn(x),
        lambda x, z: np.zeros((x.shape[0], k)),
    )


def outer_product(tf: TestFunction, g: ScalarOuter) -> OuterXZ:
    """f(x, z) = tf(x) * g(z)."""
    return OuterXZ(
        g.k,
        lambda x, z: tf.value_fn(x) * g.value(z),
        lambda x, z: tf.grad_fn(x) * g.value(z),
        lambda x, z: tf.hess_fn(x) * g.value(z),
        lambda x, z: tf.value_fn(x)[:, None] * g.grad(z)[None, :],
    )


@dataclass(frozen=True)
class MeasureFunctional:
    """G(nu) = g(<nu, phi_1>, ..., <nu, phi_k>)."""

    phis: tuple[TestFunction, ...]
    outer: ScalarOuter
    ident: str = ""

    def __post_init__(self):
        if len(self.phis) != self.outer.k:
            raise ValueError("outer arity differs from number of inner functions")

    def zvec(self, nu: EmpiricalMeasure) -> np.ndarray:
        return np.array([nu.integrate(phi.value_fn) for phi in self.phis])

    def value(self, nu: EmpiricalMeasure) -> float:
        return self.outer.value(self.zvec(nu))

    def value_of_z(self, z: np.ndarray) -> float:
        return self.outer.value(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class CylindricalStateFunctional:
    """F(x, mu) = f(x, <mu, psi_1>, ..., <mu, psi_k>)."""

    psis: tuple[TestFunction, ...]
    outer: OuterXZ
    ident: str = ""

    def __post_init__(self):
        if len(self.psis) != self.outer.k:
            raise ValueError("outer arity differs from number of inner functions")

    def zvec(self, mu: EmpiricalMeasure) -> np.ndarray:
        return np.array([mu.integrate(psi.value_fn) for psi in self.psis])

    def value(self, x, mu: EmpiricalMeasure):
        x, single = _batch(x)
        out = self.outer.value(x, self.zvec(mu))
        return float(out[0]) if single else out

    def grad_x(self, x, mu: EmpiricalMeasure):
        x, single = _batch(x)
        out = self.outer.grad_x(x, self.zvec(mu))
        return out[0] if single else out

    def hess_x(self, x, mu: EmpiricalMeasure):
        x, single = _batch(x)
        out = self.outer.hess_x(x, self.zvec(mu))
        return out[0] if single else out

    def grad_z(self, x, mu: EmpiricalMeasure):
        x, single = _batch(x)
        out = self.outer.grad_z(x, self.zvec(mu))
        return out[0] if single else out

    def lions_derivative(self, x, mu: EmpiricalMeasure, y):
        """Measure derivative evaluated at y; (n,) or batched (M, n) over y."""
        y, single = _batch(y)
        gz = self.grad_z(x, mu)  # (k,) for a single x
        grads = np.stack([psi.grad_fn(y) for psi in self.psis])  # (k, M, n)
        out = np.tensordot(gz, grads, axes=(0, 0))
        return out[0] if single else out

    def lions_derivative_jacobian(self, x, mu: EmpiricalMeasure, y):
        """y-Jacobian of the measure derivative; (n, n) or (M, n, n)."""
        y, single = _batch(y)
        gz = self.grad_z(x, mu)
        hesses = np.stack([psi.hess_fn(y) for psi in self.psis])  # (k, M, n, n)
        out = np.tensordot(gz, hesses, axes=(0, 0))
        return out[0] if single else out


def _batch(x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


# ---------------------------------------------------------------------------
# functional battery: named (outer, inner) combinations from the manifest


def load_battery_manifest() -> dict:
    text = resources.files("mvfilter.data").joinpath("functional_battery.json").read_text()
    return json.loads(text)


def _scalar_outer_from_spec(spec: dict) -> ScalarOuter:
    kind = spec["type"]
    if kind == "identity":
        return identity_outer()
    if kind == "linear":
        return linear_outer(spec["a"], spec.get("b", 0.0))
    if kind == "tanh":
        return tanh_outer(spec["a"], spec.get("b", 0.0))
    if kind == "quadratic":
        return quadratic_outer(spec["q"], spec.get("b"), spec.get("c", 0.0))
    raise ValueError(f"unknown outer type {kind!r}")


def measure_battery(dim: int = 1) -> list[MeasureFunctional]:
    """Measure functionals from the manifest (entries with kind 'measure')."""
    manifest = load_battery_manifest()
    out = []
    for entry in manifest["entries"]:
        if entry["kind"] != "measure":
            continue
        phis = tuple(testfunction_from_spec(s, dim) for s in entry["inner"])
        outer = _scalar_outer_from_spec(entry["outer"])
        out.append(MeasureFunctional(phis, outer, ident=entry["id"]))
    return out


def state_battery(dim: int = 1) -> list[CylindricalStateFunctional]:
    """State-measure functionals from the manifest (kind 'state')."""
    manifest = load_battery_manifest()
    out = []
    for entry in manifest["entries"]:
        if entry["kind"] != "state":
            continue
        psis = tuple(testfunction_from_spec(s, dim) for s in entry["inner"])
        style = entry["outer"]
        if style["type"] == "scalar":
            outer = outer_from_scalar(_scalar_outer_from_spec(style["g"]), dim)
        elif style["type"] == "state":
            outer = outer_from_state(testfunction_from_spec(style["tf"], dim), k=len(psis))
        elif style["type"] == "product":
            outer = outer_product(
                testfunction_from_spec(style["tf"], dim),
                _scalar_outer_from_spec(style["g"]),
            )
        else:
            raise ValueError(f"unknown state outer type {style['type']!r}")
        out.append(CylindricalStateFunctional(psis, outer, ident=entry["id"]))
    return out
