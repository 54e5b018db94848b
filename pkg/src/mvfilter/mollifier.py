"""Gaussian smoothing of point clouds and the discrete L2 machinery.

S_eps convolves with the Gaussian density of variance eps per axis, mapping
measures and functions into a common L2 space realized here as values on a
uniform box grid with inner product sum(f g) dx^n.  Two rules keep the
truncation honest: the box must extend 6*sqrt(eps) beyond every atom (tail
mass outside is < 1e-8 of the kernel), and dx <= sqrt(eps)/4 so the kernel
is resolved by at least four nodes per standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CoverageError
from .measures import EmpiricalMeasure

__all__ = [
    "MollifierConfig",
    "GridFunction",
    "auto_mollifier_config",
    "smooth_measure",
    "smooth_function",
    "smooth_function_at",
    "adjoint_identity_check",
    "mollified_gap",
    "energy_curve",
    "gronwall_check",
]


@dataclass(frozen=True)
class MollifierConfig:
    """Kernel bandwidth and the uniform box grid [-L, L]^dim."""

    epsilon: float
    half_width: float
    spacing: float
    dim: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.spacing > math.sqrt(self.epsilon) / 4 * (1 + 1e-12):
            raise ValueError("spacing must satisfy dx <= sqrt(eps)/4")
        if self.half_width <= self.margin:
            raise ValueError("box too small for the 6*sqrt(eps) margin")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def margin(self) -> float:
        return 6.0 * math.sqrt(self.epsilon)

    @property
    def axis(self) -> np.ndarray:
        n_pts = int(round(2.0 * self.half_width / self.spacing)) + 1
        return -self.half_width + self.spacing * np.arange(n_pts)

    def refined(self, factor: int) -> "MollifierConfig":
        return replace(self, spacing=self.spacing / factor)

    def check_coverage(self, points: np.ndarray):
        pts = np.atleast_2d(points)
        ax = self.axis
        lo, hi = ax[0] + self.margin, ax[-1] - self.margin
        if pts.min() < lo or pts.max() > hi:
            raise CoverageError(
                f"atoms in [{pts.min():.4g}, {pts.max():.4g}] escape the "
                f"margin-adjusted box [{lo:.4g}, {hi:.4g}]"
            )


def auto_mollifier_config(points: np.ndarray, epsilon: float | None = None, spacing: float | None = None) -> MollifierConfig:
    """Box and bandwidth fitted to a cloud: eps defaults to 0.05 * std^2."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if epsilon is None:
        std = float(np.std(pts))
        epsilon = max(0.05 * std * std, 1e-8)
    if spacing is None:
        spacing = math.sqrt(epsilon) / 4
    reach = float(np.max(np.abs(pts))) + 6.0 * math.sqrt(epsilon) + spacing
    half_width = math.ceil(reach / spacing) * spacing
    return MollifierConfig(epsilon, half_width, spacing, dim=pts.shape[1])


@dataclass(frozen=True)
class GridFunction:
    """Node values on the config grid with the scaled-euclidean inner product."""

    config: MollifierConfig
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n_pts = self.config.axis.shape[0]
        if v.shape != (n_pts,) * self.config.dim:
            raise ValueError(f"values shape {v.shape} does not match the grid")
        object.__setattr__(self, "values", v)

    def inner(self, other: "GridFunction") -> float:
        return float(np.sum(self.values * other.values) * self.config.spacing ** self.config.dim)

    def norm_sq(self) -> float:
        return self.inner(self)

    def norm(self) -> float:
        return math.sqrt(max(self.norm_sq(), 0.0))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.config.spacing ** self.config.dim)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.config, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.config, self.values - other.values)

    def scaled(self, a: float) -> "GridFunction":
        return GridFunction(self.config, a * self.values)


def _kernel(u: np.ndarray, epsilon: float) -> np.ndarray:
    return np.exp(-u * u / (2.0 * epsilon)) / math.sqrt(2.0 * math.pi * epsilon)


def smooth_measure(mu: EmpiricalMeasure, cfg: MollifierConfig) -> GridFunction:
    """Kernel sum over atoms: (S_eps mu)(x) = sum_i w_i k(x - x_i)."""
    if mu.dim != cfg.dim:
        raise ValueError("measure dimension does not match the grid")
    cfg.check_coverage(mu.points)
    ax = cfg.axis
    mats = [_kernel(ax[:, None] - mu.points[None, :, j], cfg.epsilon) for j in range(cfg.dim)]
    w = mu.weights
    if cfg.dim == 1:
        vals = mats[0] @ w
    elif cfg.dim == 2:
        vals = np.einsum("pi,qi,i->pq", mats[0], mats[1], w)
    elif cfg.dim == 3:
        vals = np.einsum("pi,qi,ri,i->pqr", mats[0], mats[1], mats[2], w)
    else:
        vals = np.zeros((ax.shape[0],) * cfg.dim)
        for i in range(mu.size):
            term = w[i]
            for j in range(cfg.dim):
                shape = [1] * cfg.dim
                shape[j] = -1
                term = term * mats[j][:, i].reshape(shape)
            vals = vals + term
    return GridFunction(cfg, vals)


def _mesh(cfg: MollifierConfig) -> np.ndarray:
    ax = cfg.axis
    grids = np.meshgrid(*([ax] * cfg.dim), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def smooth_function(phi, cfg: MollifierConfig) -> GridFunction:
    """Grid-quadrature convolution of a function with the kernel, axis by axis."""
    fn = phi.value_fn if hasattr(phi, "value_fn") else phi
    ax = cfg.axis
    n_pts = ax.shape[0]
    vals = np.asarray(fn(_mesh(cfg)), dtype=float).reshape((n_pts,) * cfg.dim)
    ksm = _kernel(ax[:, None] - ax[None, :], cfg.epsilon) * cfg.spacing
    for j in range(cfg.dim):
        vals = np.moveaxis(np.tensordot(ksm, vals, axes=(1, j)), 0, j)
    return GridFunction(cfg, vals)


def smooth_function_at(points: np.ndarray, phi, cfg: MollifierConfig) -> np.ndarray:
    """(S_eps phi) at arbitrary points, by quadrature on the config grid."""
    fn = phi.value_fn if hasattr(phi, "value_fn") else phi
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ax = cfg.axis
    n_pts = ax.shape[0]
    vals = np.asarray(fn(_mesh(cfg)), dtype=float).reshape((n_pts,) * cfg.dim)
    mats = [_kernel(pts[:, j][:, None] - ax[None, :], cfg.epsilon) * cfg.spacing for j in range(cfg.dim)]
    if cfg.dim == 1:
        return mats[0] @ vals
    if cfg.dim == 2:
        return np.einsum("ip,iq,pq->i", mats[0], mats[1], vals)
    if cfg.dim == 3:
        return np.einsum("ip,iq,ir,pqr->i", mats[0], mats[1], mats[2], vals)
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        acc = vals
        for j in range(cfg.dim):
            acc = np.tensordot(mats[j][i], acc, axes=(0, 0))
        out[i] = acc
    return out


def adjoint_identity_check(mu: EmpiricalMeasure, phi, cfg: MollifierConfig, dense_factor: int = 4) -> float:
    """|<mu, S_eps phi> - <S_eps mu, phi>_H|.

    The grid-level identity is exactly symmetric (same kernel matrix on both
    sides), so the left side is re-quadratured on a dense_factor-finer grid
    to expose genuine discretization error.
    """
    fn = phi.value_fn if hasattr(phi, "value_fn") else phi
    rhs = float(np.dot(mu.weights, smooth_function_at(mu.points, phi, cfg)))
    dense = cfg.refined(dense_factor)
    smooth = smooth_measure(mu, dense)
    phi_vals = np.asarray(fn(_mesh(dense)), dtype=float).reshape(smooth.values.shape)
    lhs = smooth.inner(GridFunction(dense, phi_vals))
    return abs(lhs - rhs)


def mollified_gap(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, cfg: MollifierConfig) -> float:
    """H-norm of S_eps applied to the signed difference of two clouds."""
    return (smooth_measure(mu1, cfg) - smooth_measure(mu2, cfg)).norm()


def energy_curve(runs, cfg: MollifierConfig):
    """Ensemble mean and standard error of t -> ||S_eps mu_t||^2.

    runs: sequence of runs, each a sequence of EmpiricalMeasure (or objects
    with as_measure()) on a common time grid.
    """
    per_run = []
    for states in runs:
        row = []
        for st in states:
            m = st.as_measure() if hasattr(st, "as_measure") else st
            row.append(smooth_measure(m, cfg).norm_sq())
        per_run.append(row)
    arr = np.asarray(per_run, dtype=float)
    mean = arr.mean(axis=0)
    if arr.shape[0] > 1:
        se = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def gronwall_check(times: np.ndarray, curve: np.ndarray, stderr: np.ndarray | None = None, cap: float = 50.0, fit_window=None) -> dict:
    """Smallest C >= 0 with curve(t) <= curve(0) e^{C t} (1 + 3 rel-stderr).

    violated is True only when no finite C <= cap closes the envelope.
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(curve, dtype=float)
    if c[0] <= 0:
        raise ValueError("curve must start positive")
    rel = np.zeros_like(c) if stderr is None else np.asarray(stderr, dtype=float) / np.maximum(c, 1e-300)
    mask = t > 0
    if fit_window is not None:
        lo, hi = fit_window
        mask &= (t >= lo) & (t <= hi)
    ratio = c[mask] / (c[0] * (1.0 + 3.0 * rel[mask]))
    rates = np.log(np.maximum(ratio, 1e-300)) / t[mask]
    c_hat = float(max(0.0, rates.max())) if rates.size else 0.0
    return {"c_hat": c_hat, "violated": not (np.isfinite(c_hat) and c_hat <= cap), "cap": cap}
