"""Smooth test functions with analytically coded first and second derivatives.

Compactly supported functions are built from a smooth radial plateau (equal
to 1 inside an inner radius, 0 outside an outer radius) and multiplied by
polynomials where unbounded growth inside the window is wanted.  Gradient and
Hessian are coded in closed form; the derivative-consistency test compares
them against centered finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "TestFunction",
    "constant",
    "coordinate",
    "linear",
    "quadratic",
    "gaussian",
    "tanh_of_linear",
    "cosh_power",
    "bump",
    "plateau",
    "windowed_coordinate",
    "windowed_quadratic",
    "tf_sum",
    "tf_scale",
    "tf_product",
    "testfunction_from_spec",
    "fd_gradient",
    "fd_hessian",
]

# formulas for the transition profile are evaluated strictly inside (0, 1);
# outside this band the exact limit values 1/0 are used (the discarded tail
# contributions are below double precision)
_EDGE = 0.01


@dataclass(frozen=True)
class TestFunction:
    """Scalar function on R^n with gradient and Hessian callables.

    The callables are vectorized over a leading batch axis: ``value_fn``
    maps (N, n) to (N,), ``grad_fn`` to (N, n), ``hess_fn`` to (N, n, n).
    ``support_radius`` is None for functions without compact support.
    ``c2_norm`` is an optional declared sup bound covering the function and
    its first two derivatives; :meth:`estimated_c2_norm` samples one.
    """

    dim: int
    value_fn: Callable
    grad_fn: Callable
    hess_fn: Callable
    support_radius: float | None = None
    c2_norm: float | None = None

    def _batch(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 1:
            return arr[None, :], True
        return arr, False

    def __call__(self, x):
        arr, single = self._batch(x)
        out = self.value_fn(arr)
        return float(out[0]) if single else out

    def gradient(self, x):
        arr, single = self._batch(x)
        out = self.grad_fn(arr)
        return out[0] if single else out

    def hessian(self, x):
        arr, single = self._batch(x)
        out = self.hess_fn(arr)
        return out[0] if single else out

    def estimated_c2_norm(self, radius: float | None = None, n_samples: int = 512, seed: int = 3) -> float:
        """Sampled sup bound over the support (or the given radius)."""
        if self.c2_norm is not None:
            return self.c2_norm
        r = radius if radius is not None else (self.support_radius or 5.0)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, 11], dtype=np.uint64)))
        x = rng.uniform(-r, r, size=(n_samples, self.dim))
        vals = np.abs(self.value_fn(x))
        grads = np.linalg.norm(self.grad_fn(x), axis=1)
        hess = np.linalg.norm(self.hess_fn(x), ord=2, axis=(1, 2))
        return float(max(vals.max(), grads.max(), hess.max()))


# ---------------------------------------------------------------------------
# transition profile: smooth step from 1 at t<=0 to 0 at t>=1


def _smooth_step(t):
    """(S, S', S'') of the standard smooth unit step built from exp(-1/u)."""
    t = np.asarray(t, dtype=float)
    s = np.where(t <= _EDGE, 1.0, 0.0)
    s1 = np.zeros_like(t)
    s2 = np.zeros_like(t)
    inside = (t > _EDGE) & (t < 1.0 - _EDGE)
    if np.any(inside):
        ti = t[inside]
        a = np.exp(-1.0 / (1.0 - ti))
        b = np.exp(-1.0 / ti)
        da = -a / (1.0 - ti) ** 2
        db = b / ti**2
        d = a + b
        num = da * b - a * db
        s[inside] = a / d
        s1[inside] = num / d**2
        dnum = a * b * (2.0 * ti - 1.0) * (1.0 / (1.0 - ti) ** 4 + 1.0 / ti**4)
        s2[inside] = dnum / d**2 - 2.0 * num * (da + db) / d**3
    return s, s1, s2


def _radial(dim, center, profile, support_radius):
    """TestFunction x -> p(|x - c|) from a radial profile p, p', p''."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)

    def split(x):
        rel = x - c
        r = np.linalg.norm(rel, axis=1)
        return rel, r

    def value(x):
        _, r = split(x)
        return profile(r)[0]

    def grad(x):
        rel, r = split(x)
        _, p1, _ = profile(r)
        safe = np.where(r > 0.0, r, 1.0)
        return (p1 / safe)[:, None] * rel

    def hess(x):
        rel, r = split(x)
        _, p1, p2 = profile(r)
        safe = np.where(r > 0.0, r, 1.0)
        u = rel / safe[:, None]
        uu = u[:, :, None] * u[:, None, :]
        eye = np.eye(dim)[None, :, :]
        rad = p2[:, None, None] * uu
        tang = (p1 / safe)[:, None, None] * (eye - uu)
        out = rad + tang
        # at the center the profile is flat (p'(0)=0): Hessian is p''(0) I
        at0 = r <= 0.0
        if np.any(at0):
            out[at0] = p2[at0, None, None] * eye
        return out

    return TestFunction(dim, value, grad, hess, support_radius=support_radius)


def plateau(dim: int, inner: float, outer: float, center=None) -> TestFunction:
    """Smooth window: 1 inside |x-c|<=inner, 0 outside |x-c|>=outer."""
    if not 0.0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    width = outer - inner

    def profile(r):
        t = (r - inner) / width
        s, s1, s2 = _smooth_step(t)
        return s, s1 / width, s2 / width**2

    return _radial(dim, center, profile, support_radius=float(outer))


def bump(dim: int, radius: float, center=None) -> TestFunction:
    """Standard smooth bump exp(1 - 1/(1 - |x-c|^2/R^2)), normalized to 1 at c."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
    r2 = radius * radius

    def parts(x):
        rel = x - c
        u = np.sum(rel * rel, axis=1) / r2
        inside = u < 1.0 - 1e-12
        s = np.where(inside, 1.0 - u, 1.0)
        val = np.where(inside, np.exp(1.0 - 1.0 / s), 0.0)
        return rel, s, val, inside

    def value(x):
        return parts(x)[2]

    def grad(x):
        rel, s, val, inside = parts(x)
        coef = np.where(inside, -2.0 * val / (r2 * s * s), 0.0)
        return coef[:, None] * rel

    def hess(x):
        rel, s, val, inside = parts(x)
        c_xx = np.where(inside, val * (4.0 / (r2 * r2 * s**4) - 8.0 / (r2 * r2 * s**3)), 0.0)
        c_id = np.where(inside, -2.0 * val / (r2 * s * s), 0.0)
        xx = rel[:, :, None] * rel[:, None, :]
        return c_xx[:, None, None] * xx + c_id[:, None, None] * np.eye(dim)[None]

    return TestFunction(dim, value, grad, hess, support_radius=float(radius))


# ---------------------------------------------------------------------------
# unbounded smooth primitives (no compact support; used for moments, oracles)


def constant(dim: int, value: float = 1.0) -> TestFunction:
    v = float(value)
    return TestFunction(
        dim,
        lambda x: np.full(x.shape[0], v),
        lambda x: np.zeros_like(x),
        lambda x: np.zeros((x.shape[0], dim, dim)),
        support_radius=None,
        c2_norm=abs(v),
    )


def linear(a, b: float = 0.0) -> TestFunction:
    a = np.asarray(a, dtype=float).reshape(-1)
    dim = a.shape[0]
    return TestFunction(
        dim,
        lambda x: x @ a + b,
        lambda x: np.broadcast_to(a, x.shape).copy(),
        lambda x: np.zeros((x.shape[0], dim, dim)),
        support_radius=None,
    )


def coordinate(dim: int, index: int = 0) -> TestFunction:
    a = np.zeros(dim)
    a[index] = 1.0
    return linear(a)


def quadratic(q, b=None, c: float = 0.0) -> TestFunction:
    """x . q x + b . x + c with symmetric q (symmetrized if not)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    q = 0.5 * (q + q.T)
    dim = q.shape[0]
    bv = np.zeros(dim) if b is None else np.asarray(b, dtype=float).reshape(dim)

    return TestFunction(
        dim,
        lambda x: np.einsum("ki,ij,kj->k", x, q, x) + x @ bv + c,
        lambda x: 2.0 * x @ q + bv,
        lambda x: np.broadcast_to(2.0 * q, (x.shape[0], dim, dim)).copy(),
        support_radius=None,
    )


def gaussian(dim: int, variance: float = 1.0, center=None, amplitude: float = 1.0) -> TestFunction:
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
    v = float(variance)

    def value(x):
        rel = x - c
        return amplitude * np.exp(-0.5 * np.sum(rel * rel, axis=1) / v)

    def grad(x):
        rel = x - c
        return value(x)[:, None] * (-rel / v)

    def hess(x):
        rel = x - c
        outer_xx = rel[:, :, None] * rel[:, None, :] / v**2
        return value(x)[:, None, None] * (outer_xx - np.eye(dim)[None] / v)

    return TestFunction(dim, value, grad, hess, support_radius=None)


def tanh_of_linear(a, b: float = 0.0) -> TestFunction:
    """tanh(a . x + b): bounded with bounded derivatives of all orders."""
    a = np.asarray(a, dtype=float).reshape(-1)
    dim = a.shape[0]
    aa = a[:, None] * a[None, :]

    def value(x):
        return np.tanh(x @ a + b)

    def grad(x):
        t = np.tanh(x @ a + b)
        return (1.0 - t * t)[:, None] * a

    def hess(x):
        t = np.tanh(x @ a + b)
        return (-2.0 * t * (1.0 - t * t))[:, None, None] * aa

    return TestFunction(dim, value, grad, hess, support_radius=None)


def cosh_power(p: float) -> TestFunction:
    """cosh(x)^(-p) on the line, for p > 0.

    Solves f' = -p tanh(x) f, so for a scalar observation drift of the form
    gamma tanh(x) and constant signal-observation coupling sigma1, the choice
    p = gamma / sigma1 makes f h + sigma1 f' vanish identically and the
    stochastic-integral term of the weak-form residual drops out.
    """
    p = float(p)
    if p <= 0.0:
        raise ValueError("the decay exponent must be positive")

    def value(x):
        return np.cosh(x[:, 0]) ** (-p)

    def grad(x):
        return (-p * np.tanh(x[:, 0]) * value(x))[:, None]

    def hess(x):
        t = np.tanh(x[:, 0])
        return ((p * p * t * t - p * (1.0 - t * t)) * value(x))[:, None, None]

    return TestFunction(1, value, grad, hess, support_radius=None, c2_norm=max(1.0, p + p * p))


# ---------------------------------------------------------------------------
# combinators


def tf_scale(tf: TestFunction, c: float) -> TestFunction:
    c = float(c)
    return TestFunction(
        tf.dim,
        lambda x: c * tf.value_fn(x),
        lambda x: c * tf.grad_fn(x),
        lambda x: c * tf.hess_fn(x),
        support_radius=tf.support_radius,
        c2_norm=None if tf.c2_norm is None else abs(c) * tf.c2_norm,
    )


def tf_sum(terms: list[TestFunction], coeffs=None) -> TestFunction:
    if not terms:
        raise ValueError("empty sum")
    dim = terms[0].dim
    if any(t.dim != dim for t in terms):
        raise ValueError("mixed dimensions in sum")
    cs = np.ones(len(terms)) if coeffs is None else np.asarray(coeffs, dtype=float)
    radii = [t.support_radius for t in terms]
    rad = None if any(r is None for r in radii) else float(max(radii))
    return TestFunction(
        dim,
        lambda x: sum(c * t.value_fn(x) for c, t in zip(cs, terms)),
        lambda x: sum(c * t.grad_fn(x) for c, t in zip(cs, terms)),
        lambda x: sum(c * t.hess_fn(x) for c, t in zip(cs, terms)),
        support_radius=rad,
    )


def tf_product(f: TestFunction, g: TestFunction) -> TestFunction:
    """Pointwise product with product-rule derivatives."""
    if f.dim != g.dim:
        raise ValueError("mixed dimensions in product")
    radii = [r for r in (f.support_radius, g.support_radius) if r is not None]
    rad = float(min(radii)) if radii else None

    def value(x):
        return f.value_fn(x) * g.value_fn(x)

    def grad(x):
        return f.grad_fn(x) * g.value_fn(x)[:, None] + f.value_fn(x)[:, None] * g.grad_fn(x)

    def hess(x):
        gf, gg = f.grad_fn(x), g.grad_fn(x)
        cross = gf[:, :, None] * gg[:, None, :]
        return (
            f.hess_fn(x) * g.value_fn(x)[:, None, None]
            + cross
            + np.swapaxes(cross, 1, 2)
            + f.value_fn(x)[:, None, None] * g.hess_fn(x)
        )

    return TestFunction(f.dim, value, grad, hess, support_radius=rad)


def windowed_coordinate(dim: int, index: int, inner: float, outer: float, center=None) -> TestFunction:
    """Coordinate function cut off smoothly outside a ball: x_i * window(x)."""
    return tf_product(coordinate(dim, index), plateau(dim, inner, outer, center=center))


def windowed_quadratic(q, b, c, inner: float, outer: float, center=None) -> TestFunction:
    tfq = quadratic(q, b, c)
    return tf_product(tfq, plateau(tfq.dim, inner, outer, center=center))


# ---------------------------------------------------------------------------
# declarative construction (battery manifests, JSON configs)


def testfunction_from_spec(spec: dict, dim: int | None = None) -> TestFunction:
    """Build a TestFunction from a plain dict, e.g. loaded from JSON."""
    kind = spec["type"]
    d = int(spec.get("dim", dim if dim is not None else 1))
    if kind == "plateau":
        return plateau(d, spec["inner"], spec["outer"], center=spec.get("center"))
    if kind == "bump":
        return bump(d, spec["radius"], center=spec.get("center"))
    if kind == "coordinate":
        return coordinate(d, spec.get("index", 0))
    if kind == "windowed-coordinate":
        return windowed_coordinate(d, spec.get("index", 0), spec["inner"], spec["outer"], center=spec.get("center"))
    if kind == "windowed-quadratic":
        q = np.atleast_2d(np.asarray(spec.get("q", np.eye(d)), dtype=float))
        if q.shape == (1, 1) and d > 1:
            q = q[0, 0] * np.eye(d)  # scalar spec scales with the dimension
        return windowed_quadratic(q, spec.get("b"), spec.get("c", 0.0), spec["inner"], spec["outer"], center=spec.get("center"))
    if kind == "gaussian":
        return gaussian(d, spec.get("variance", 1.0), center=spec.get("center"), amplitude=spec.get("amplitude", 1.0))
    if kind == "tanh":
        return tanh_of_linear(spec["a"], spec.get("b", 0.0))
    raise ValueError(f"unknown test-function type {kind!r}")


# ---------------------------------------------------------------------------
# finite differences (oracles for the analytic derivatives)


def fd_gradient(tf: TestFunction, x, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (tf(x + e) - tf(x - e)) / (2.0 * step)
    return out


def fd_hessian(tf: TestFunction, x, step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = step
            ej[j] = step
            out[i, j] = (
                tf(x + ei + ej) - tf(x + ei - ej) - tf(x - ei + ej) + tf(x - ei - ej)
            ) / (4.0 * step * step)
    return out
