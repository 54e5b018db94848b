"""Weighted point clouds and Wasserstein-2 distance between them.

An :class:`EmpiricalMeasure` is a finite nonnegative combination of point
masses.  It is the measure object used everywhere in the package: law flows,
filter clouds, and the arguments of measure functionals all reduce to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import DimensionMismatchError, ZeroMassError

__all__ = ["EmpiricalMeasure", "wasserstein2", "wasserstein2_info"]

#: clouds up to this many atoms per side get the exact transportation LP
EXACT_LP_MAX_ATOMS = 12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite weighted point cloud ``sum_i w_i * delta(x_i)``.

    points : (N, n) float array, one atom per row.
    weights : (N,) nonnegative float array.  Total mass may differ from 1;
        use :meth:`as_probability` where a probability law is required.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim != 2:
            raise ValueError("points must be a (N, n) array")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{w.shape[0]} weights for {pts.shape[0]} atoms")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("atoms and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights=None) -> "EmpiricalMeasure":
        """Uniform weights 1/N unless explicit weights are given."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if weights is None:
            weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
        return cls(pts, weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> float | np.ndarray:
        """Weighted sum of per-atom values.

        ``values`` is either a callable evaluated on the (N, n) atom array or
        an array whose leading axis indexes atoms.
        """
        if callable(values):
            values = values(self.points)
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.size:
            raise ValueError("per-atom values have the wrong leading axis")
        out = np.tensordot(self.weights, values, axes=(0, 0))
        return float(out) if out.ndim == 0 else out

    def mean(self) -> np.ndarray:
        """First moment of the probability normalization."""
        return np.asarray(self.as_probability().integrate(self.points))

    def second_moment_norm(self) -> float:
        """sqrt(int |x|^2 dmu / mass), the scale entering growth bounds."""
        p = self.as_probability()
        return float(np.sqrt(p.integrate(np.sum(p.points**2, axis=1))))

    def as_probability(self) -> "EmpiricalMeasure":
        m = self.mass
        if m <= 0.0:
            raise ZeroMassError("cannot normalize a zero-mass measure")
        if abs(m - 1.0) < 1e-15:
            return self
        return EmpiricalMeasure(self.points, self.weights / m)


def _check_pair(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    if mu.dim != nu.dim:
        raise DimensionMismatchError(f"dim {mu.dim} vs {nu.dim}")
    if mu.mass <= 0.0 or nu.mass <= 0.0:
        raise ZeroMassError("wasserstein2 needs strictly positive masses")


def _w2sq_1d(x, wx, y, wy) -> float:
    """Exact squared W2 on the line via the quantile coupling."""
    ix, iy = np.argsort(x), np.argsort(y)
    x, wx = x[ix], wx[ix]
    y, wy = y[iy], wy[iy]
    cx, cy = np.cumsum(wx), np.cumsum(wy)
    cx[-1] = cy[-1] = 1.0
    # breakpoints of the piecewise-constant quantile functions
    grid = np.union1d(cx, cy)
    grid = grid[grid > 0.0]
    widths = np.diff(np.concatenate(([0.0], grid)))
    mids = grid - 0.5 * widths
    qx = x[np.searchsorted(cx, mids)]
    qy = y[np.searchsorted(cy, mids)]
    return float(np.sum(widths * (qx - qy) ** 2))


def _w2sq_assignment(X, Y) -> float:
    """Equal-size uniform clouds: optimal matching (exact, Birkhoff)."""
    diff = X[:, None, :] - Y[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / X.shape[0])


def _w2sq_lp(X, wx, Y, wy) -> float:
    """Small transportation LP, exact for general weights."""
    nx, ny = X.shape[0], Y.shape[0]
    diff = X[:, None, :] - Y[None, :, :]
    cost = np.sum(diff * diff, axis=2).ravel()
    a_eq = np.zeros((nx + ny, nx * ny))
    for i in range(nx):
        a_eq[i, i * ny : (i + 1) * ny] = 1.0
    for j in range(ny):
        a_eq[nx + j, j::ny] = 1.0
    b_eq = np.concatenate([wx, wy])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _w2sq_sliced(X, wx, Y, wy, n_projections, seed) -> float:
    """Average of exact 1-d squared distances over random directions."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    dim = X.shape[1]
    theta = rng.standard_normal((n_projections, dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    total = 0.0
    for k in range(n_projections):
        total += _w2sq_1d(X @ theta[k], wx, Y @ theta[k], wy)
    return total / n_projections


def wasserstein2_info(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    method: str = "auto",
    n_projections: int = 128,
    projection_seed: int = 20260814,
) -> tuple[float, dict]:
    """Wasserstein-2 distance plus metadata about the route taken.

    Measures are compared as probabilities.  ``method`` is one of ``auto``,
    ``exact-1d``, ``assignment``, ``lp``, ``sliced``.  ``auto`` picks the
    exact route whenever one applies (1-d clouds; equal-size uniform clouds;
    clouds of at most EXACT_LP_MAX_ATOMS atoms) and falls back to the sliced
    approximation otherwise.
    """
    _check_pair(mu, nu)
    p, q = mu.as_probability(), nu.as_probability()
    X, wx = p.points, p.weights
    Y, wy = q.points, q.weights

    uniform = (
        X.shape[0] == Y.shape[0]
        and np.allclose(wx, 1.0 / X.shape[0], atol=1e-12)
        and np.allclose(wy, 1.0 / Y.shape[0], atol=1e-12)
    )
    if method == "auto":
        if p.dim == 1:
            method = "exact-1d"
        elif uniform:
            method = "assignment"
        elif max(X.shape[0], Y.shape[0]) <= EXACT_LP_MAX_ATOMS:
            method = "lp"
        else:
            method = "sliced"

    if method == "exact-1d":
        if p.dim != 1:
            raise ValueError("exact-1d route needs 1-d clouds")
        w2sq = _w2sq_1d(X[:, 0], wx, Y[:, 0], wy)
    elif method == "assignment":
        if not uniform:
            raise ValueError("assignment route needs equal-size uniform clouds")
        w2sq = _w2sq_assignment(X, Y)
    elif method == "lp":
        w2sq = _w2sq_lp(X, wx, Y, wy)
    elif method == "sliced":
        w2sq = _w2sq_sliced(X, wx, Y, wy, n_projections, projection_seed)
    else:
        raise ValueError(f"unknown method {method!r}")

    info = {"method": method, "exact": method != "sliced"}
    if method == "sliced":
        info["n_projections"] = n_projections
        info["projection_seed"] = projection_seed
    return float(np.sqrt(max(w2sq, 0.0))), info


def wasserstein2(mu: EmpiricalMeasure, nu: EmpiricalMeasure, method: str = "auto", **kw) -> float:
    """Wasserstein-2 distance between the probability normalizations."""
    value, _ = wasserstein2_info(mu, nu, method=method, **kw)
    return value
