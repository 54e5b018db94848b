"""Kalman-Bucy filter for linear models, including correlated noise.

Serves as the closed-form reference the particle filter is checked against.
With signal dX = A X dt + sigma0 dW + sigma1 dV and observation
dY = C X dt + sigma2 dV, the gain picks up the cross term sigma1 sigma2^T:

    K = (P C^T + sigma1 sigma2^T) R^{-1},      R = sigma2 sigma2^T
    dm = A m dt + K (dY - C m dt)
    dP/dt = A P + P A^T + sigma0 sigma0^T + sigma1 sigma1^T - K R K^T

Integrated with explicit Euler on the same grid as the particle run so the
two discretizations share their leading-order time error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError
from .presets import LinearGaussianSpec

__all__ = ["KalmanResult", "kalman_bucy", "stationary_variance"]


@dataclass(frozen=True)
class KalmanResult:
    times: np.ndarray
    means: np.ndarray  # (K+1, n)
    covs: np.ndarray  # (K+1, n, n)

    def mean_series(self, coord: int = 0) -> np.ndarray:
        return self.means[:, coord]


def kalman_bucy(spec: LinearGaussianSpec, times: np.ndarray, y: np.ndarray) -> KalmanResult:
    """Run the (correlated) Kalman-Bucy recursion along an observation path."""
    a = np.atleast_2d(np.asarray(spec.A, dtype=float))
    c = np.atleast_2d(np.asarray(spec.C, dtype=float))
    s0 = np.atleast_2d(np.asarray(spec.sigma0, dtype=float))
    s1 = np.atleast_2d(np.asarray(spec.sigma1, dtype=float))
    s2 = np.atleast_2d(np.asarray(spec.sigma2, dtype=float))
    n = a.shape[0]
    y = np.atleast_2d(np.asarray(y, dtype=float).reshape(len(times), -1))

    r = s2 @ s2.T
    q = s0 @ s0.T + s1 @ s1.T
    cross = s1 @ s2.T

    k_steps = len(times) - 1
    means = np.empty((k_steps + 1, n))
    covs = np.empty((k_steps + 1, n, n))
    m = np.asarray(spec.m0, dtype=float).reshape(n).copy()
    p = np.atleast_2d(np.asarray(spec.P0, dtype=float)).copy()
    means[0] = m
    covs[0] = p

    for k in range(k_steps):
        dt = float(times[k + 1] - times[k])
        gain = np.linalg.solve(r.T, (p @ c.T + cross).T).T
        dy = y[k + 1] - y[k]
        m = m + (a @ m) * dt + gain @ (dy - (c @ m) * dt)
        p = p + (a @ p + p @ a.T + q - gain @ r @ gain.T) * dt
        p = 0.5 * (p + p.T)
        if np.any(np.linalg.eigvalsh(p) < -1e-10):
            raise NotPositiveDefiniteError(f"covariance lost positivity at step {k + 1}", step=k + 1)
        means[k + 1] = m
        covs[k + 1] = p
    return KalmanResult(np.asarray(times, dtype=float).copy(), means, covs)


def stationary_variance(spec: LinearGaussianSpec) -> float:
    """Positive root of the scalar stationary Riccati equation."""
    a = float(np.asarray(spec.A).reshape(()))
    c = float(np.asarray(spec.C).reshape(()))
    s0 = float(np.asarray(spec.sigma0).reshape(()))
    s1 = float(np.asarray(spec.sigma1).reshape(()))
    s2 = float(np.asarray(spec.sigma2).reshape(()))
    r = s2 * s2
    # 0 = 2 a P + s0^2 + s1^2 - (P c + s1 s2)^2 / r, a quadratic in P
    alpha = c * c / r
    beta = 2.0 * (c * s1 / s2 - a)
    gamma = -s0 * s0
    if alpha == 0.0:
        if beta == 0.0:
            raise ValueError("no stationary variance for this model")
        return -gamma / beta
    disc = beta * beta - 4.0 * alpha * gamma
    return (-beta + np.sqrt(disc)) / (2.0 * alpha)
