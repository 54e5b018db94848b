"""Coefficient callables of the signal-observation pair, plus hypothesis screening.

The signal drift/diffusions may depend on the running law of the signal; the
observation drift may depend on the signal state and law but not on the
observation itself, and the observation diffusion depends on time only.
Two coupling modes are supported:

``signal-correlated``
    signal:      dX = b1 dt + sigma0 dW + sigma1 dV
    observation: dY = b2 dt + sigma2(t) dV
``sensor-correlated``
    signal:      dX = b1 dt + sigma1 dV
    observation: dY = b2 dt + sigma2_mix dV + sigma3_mix dW,
    with sigma2_mix sigma2_mix^T + sigma3_mix sigma3_mix^T = I (unit
    covariance), so the compound observation noise is a standard Brownian
    motion.

All coefficient callables are vectorized over a leading particle axis:
x has shape (N, n) and the outputs are (N, n), (N, n, d), (N, n, m), (N, m).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError
from .measures import EmpiricalMeasure, wasserstein2
from .util import stream

__all__ = [
    "CouplingMode",
    "HypothesisConstants",
    "CoefficientSet",
    "observation_h",
    "SamplerConfig",
    "HypothesisReport",
    "estimate_hypotheses",
]


class CouplingMode(str, Enum):
    SIGNAL = "signal-correlated"
    SENSOR = "sensor-correlated"


@dataclass(frozen=True)
class HypothesisConstants:
    """Declared regularity constants screened by :func:`estimate_hypotheses`.

    lipschitz : joint Lipschitz constant of (b1, sigma0, sigma1, b2) in the
        state and measure arguments.
    growth : square-root growth constant: sqrt(|b1|^2 + |sigma0|^2 +
        |sigma1|^2) <= growth * (1 + |x| + m2(mu)).
    sup_bound : optional sup bound of |b1| + |sigma0| + |sigma1| for
        bounded-coefficient models (None when the model is unbounded).
    observation_bound : bound for |b2|, |sigma2(t)| and |sigma2(t)^-1|.
    """

    lipschitz: float
    growth: float
    observation_bound: float
    sup_bound: float | None = None


@dataclass(frozen=True)
class CoefficientSet:
    """Dimensions, mode, coefficient callables and declared constants."""

    n: int
    d: int
    m: int
    b1: callable
    sigma0: callable
    sigma1: callable
    b2: callable
    sigma2: callable  # t -> (m, m); unused in sensor mode
    constants: HypothesisConstants
    mode: CouplingMode = CouplingMode.SIGNAL
    sensor_sigma2: np.ndarray | None = None  # (m, m), sensor mode only
    sensor_sigma3: np.ndarray | None = None  # (m, d), sensor mode only
    condition_cap: float = 1e8
    label: str = ""

    def validate(self, t_values=(0.0, 0.5, 1.0)) -> None:
        """Shape and conditioning checks; raises ValueError on violation."""
        x = np.zeros((2, self.n))
        mu = EmpiricalMeasure.from_points(np.zeros((2, self.n)))
        shapes = {
            "b1": (self.b1(0.0, x, mu), (2, self.n)),
            "sigma0": (self.sigma0(0.0, x, mu), (2, self.n, self.d)),
            "sigma1": (self.sigma1(0.0, x, mu), (2, self.n, self.m)),
            "b2": (self.b2(0.0, x, mu), (2, self.m)),
        }
        for name, (arr, want) in shapes.items():
            if np.asarray(arr).shape != want:
                raise DimensionMismatchError(f"{name} returned shape {np.asarray(arr).shape}, want {want}")
        if self.mode == CouplingMode.SIGNAL:
            for t in t_values:
                s2 = np.asarray(self.sigma2(t))
                if s2.shape != (self.m, self.m):
                    raise DimensionMismatchError(f"sigma2({t}) has shape {s2.shape}")
                if np.linalg.cond(s2) > self.condition_cap:
                    raise ValueError(f"sigma2({t}) condition number exceeds cap")
        else:
            s2, s3 = self.sensor_sigma2, self.sensor_sigma3
            if s2 is None or s3 is None:
                raise ValueError("sensor mode requires sensor_sigma2 and sensor_sigma3")
            if s2.shape != (self.m, self.m) or s3.shape != (self.m, self.d):
                raise DimensionMismatchError("sensor mixing matrices have wrong shapes")
            gap = s2 @ s2.T + s3 @ s3.T - np.eye(self.m)
            if np.max(np.abs(gap)) > 1e-12:
                raise ValueError("sensor mixing matrices violate the unit-covariance constraint")

    def signal_noise_dims(self) -> int:
        """Width of the per-particle noise the propagation step consumes."""
        return self.d if self.mode == CouplingMode.SIGNAL else self.m


def observation_h(c: CoefficientSet, t: float, x, mu: EmpiricalMeasure) -> np.ndarray:
    """Observation drift in innovation units.

    Signal mode solves sigma2(t) h = b2 (never forms the inverse).  In
    sensor mode the compound observation noise already has unit covariance,
    so b2 itself plays this role.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    b2v = np.asarray(c.b2(t, x, mu), dtype=float)
    if c.mode == CouplingMode.SENSOR:
        return b2v
    s2 = np.asarray(c.sigma2(t), dtype=float)
    return np.linalg.solve(s2, b2v.T).T


# ---------------------------------------------------------------------------
# hypothesis screening


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling plan for :func:`estimate_hypotheses`.

    Sample i is drawn from its own derived stream, so estimates are running
    maxima: increasing n_samples never decreases any estimate.
    """

    n_samples: int = 200
    box_radius: float = 3.0
    cloud_size: int = 8
    t_values: tuple = (0.0, 0.5, 1.0)
    seed: int = 0
    slack: float = 0.05


@dataclass(frozen=True)
class HypothesisReport:
    estimates: dict
    declared: dict
    flags: dict
    n_samples: int
    passed: bool


def _coeff_gap(c, t, xa, xb, mua, mub) -> float:
    """Summed coefficient distance between the two argument pairs."""

    def parts(x, mu):
        xr = x[None, :]
        return (
            np.asarray(c.b1(t, xr, mu))[0],
            np.asarray(c.sigma0(t, xr, mu))[0],
            np.asarray(c.sigma1(t, xr, mu))[0],
            np.asarray(c.b2(t, xr, mu))[0],
        )

    pa, pb = parts(xa, mua), parts(xb, mub)
    return float(sum(np.linalg.norm(a - b) for a, b in zip(pa, pb)))


def estimate_hypotheses(c: CoefficientSet, sampler: SamplerConfig = SamplerConfig()) -> HypothesisReport:
    """Sampled estimates of Lipschitz/growth/bound constants vs declared ones.

    The verdict fails when any estimate exceeds the declared constant by
    more than the configured slack.
    """
    lip_state = 0.0
    lip_measure = 0.0
    growth = 0.0
    sup_est = 0.0
    obs_est = 0.0
    r = sampler.box_radius
    for i in range(sampler.n_samples):
        rng = stream(sampler.seed, "hyp", i)
        t = sampler.t_values[i % len(sampler.t_values)]
        xa, xb = rng.uniform(-r, r, size=(2, c.n))
        cloud_a = rng.uniform(-r, r, size=(sampler.cloud_size, c.n))
        cloud_b = rng.uniform(-r, r, size=(sampler.cloud_size, c.n))
        mua = EmpiricalMeasure.from_points(cloud_a)
        mub = EmpiricalMeasure.from_points(cloud_b)

        dx = np.linalg.norm(xa - xb)
        if dx > 1e-9:
            lip_state = max(lip_state, _coeff_gap(c, t, xa, xb, mua, mua) / dx)
        dmu = wasserstein2(mua, mub)
        if dmu > 1e-9:
            lip_measure = max(lip_measure, _coeff_gap(c, t, xa, xa, mua, mub) / dmu)

        xr = xa[None, :]
        b1v = np.asarray(c.b1(t, xr, mua))[0]
        s0v = np.asarray(c.sigma0(t, xr, mua))[0]
        s1v = np.asarray(c.sigma1(t, xr, mua))[0]
        b2v = np.asarray(c.b2(t, xr, mua))[0]
        size = np.sqrt(np.sum(b1v**2) + np.sum(s0v**2) + np.sum(s1v**2))
        growth = max(growth, size / (1.0 + np.linalg.norm(xa) + mua.second_moment_norm()))
        sup_est = max(sup_est, np.linalg.norm(b1v) + np.linalg.norm(s0v) + np.linalg.norm(s1v))
        obs_here = np.linalg.norm(b2v)
        if c.mode == CouplingMode.SIGNAL:
            s2 = np.asarray(c.sigma2(t))
            obs_here = max(obs_here, np.linalg.norm(s2, 2), np.linalg.norm(np.linalg.inv(s2), 2))
        obs_est = max(obs_est, obs_here)

    declared = {
        "lipschitz": c.constants.lipschitz,
        "growth": c.constants.growth,
        "sup_bound": c.constants.sup_bound,
        "observation_bound": c.constants.observation_bound,
    }
    estimates = {
        "state_lipschitz": lip_state,
        "measure_lipschitz": lip_measure,
        "growth": growth,
        "sup_bound": sup_est,
        "observation_bound": obs_est,
    }
    tol = 1.0 + sampler.slack
    flags = {
        "state_lipschitz": lip_state <= declared["lipschitz"] * tol,
        "measure_lipschitz": lip_measure <= declared["lipschitz"] * tol,
        "growth": growth <= declared["growth"] * tol,
        "observation_bound": obs_est <= declared["observation_bound"] * tol,
    }
    if declared["sup_bound"] is not None:
        flags["sup_bound"] = sup_est <= declared["sup_bound"] * tol
    return HypothesisReport(
        estimates=estimates,
        declared=declared,
        flags=flags,
        n_samples=sampler.n_samples,
        passed=all(flags.values()),
    )
