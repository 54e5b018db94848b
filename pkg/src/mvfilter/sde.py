"""Euler-Maruyama simulation of the coupled signal-observation system.

The law argument of the coefficients is realized by a dedicated particle
ensemble evolved without any conditioning (:func:`simulate_law_flow`); the
observed trajectory (:func:`simulate_truth`) and every filter run read the
law from that flow.  All randomness is drawn from labeled Philox streams, so
any piece can be re-simulated independently and reproducibly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, CouplingMode, observation_h
from .errors import BlowupError
from .measures import EmpiricalMeasure
from .presets import InitialLaw
from .util import format_float, stream

__all__ = [
    "SimConfig",
    "LawFlow",
    "TruthPath",
    "simulate_law_flow",
    "simulate_truth",
    "innovation_from_observation",
    "export_truth_csv",
    "coarsen_increments",
]


@dataclass(frozen=True)
class SimConfig:
    """Time grid and ensemble sizes for the forward simulations."""

    horizon: float
    dt: float
    n_law: int = 256
    seed: int = 0
    scheme: str = "euler-maruyama"
    overflow_guard: float = 1e8

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"dt {self.dt} does not divide horizon {self.horizon}")
        if self.n_law < 2:
            raise ValueError("law ensemble needs at least 2 particles")
        if self.scheme != "euler-maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Block-sum fine-grid increments onto a grid ``factor`` times coarser."""
    k = increments.shape[0]
    if k % factor:
        raise ValueError("factor must divide the number of steps")
    shape = (k // factor, factor) + increments.shape[1:]
    return increments.reshape(shape).sum(axis=1)


@dataclass(frozen=True)
class LawFlow:
    """Unconditional signal law along the grid, one point cloud per node."""

    times: np.ndarray
    measures: tuple

    @property
    def dim(self) -> int:
        return self.measures[0].dim

    def at(self, k: int) -> EmpiricalMeasure:
        return self.measures[k]

    def subsample(self, stride: int) -> "LawFlow":
        return LawFlow(self.times[::stride], tuple(self.measures[::stride]))

    def max_second_moment(self) -> float:
        return max(m.second_moment_norm() for m in self.measures)


def simulate_law_flow(
    c: CoefficientSet, init: InitialLaw, cfg: SimConfig, noise: tuple | None = None
) -> LawFlow:
    """Interacting-particle approximation of the signal law flow.

    Every particle feeds the running empirical measure back into the
    coefficients.  ``noise`` optionally supplies pre-drawn increments
    (dW (K,N,d), dV (K,N,m)) for common-random-number experiments.
    """
    k_steps = cfg.n_steps
    rng = stream(cfg.seed, "law")
    x = init.sample(rng, cfg.n_law)
    measures = [EmpiricalMeasure.from_points(x)]
    sq_dt = np.sqrt(cfg.dt)
    for k in range(k_steps):
        t = k * cfg.dt
        mu = measures[-1]
        if noise is None:
            dw = sq_dt * rng.standard_normal((cfg.n_law, c.d))
            dv = sq_dt * rng.standard_normal((cfg.n_law, c.m))
        else:
            dw, dv = noise[0][k], noise[1][k]
        b1v = np.asarray(c.b1(t, x, mu), dtype=float)
        s0 = np.asarray(c.sigma0(t, x, mu), dtype=float)
        s1 = np.asarray(c.sigma1(t, x, mu), dtype=float)
        x = x + b1v * cfg.dt + np.einsum("nij,nj->ni", s0, dw) + np.einsum("nij,nj->ni", s1, dv)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > cfg.overflow_guard:
            raise BlowupError(f"law ensemble left the overflow guard at step {k + 1}", step=k + 1)
        measures.append(EmpiricalMeasure.from_points(x))
    return LawFlow(cfg.times(), tuple(measures))


@dataclass(frozen=True)
class TruthPath:
    """One observed trajectory of the pair, plus its change-of-measure data.

    dV holds the raw observation-noise increments; dVtilde holds the
    innovation-noise increments the filter consumes (in sensor mode these
    belong to the transformed compound noise).  log_gamma integrates the
    exponential change-of-measure density along the path by log-Euler.
    """

    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    dV: np.ndarray
    dVtilde: np.ndarray
    log_gamma: np.ndarray
    h_path: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def gamma(self) -> np.ndarray:
        return np.exp(self.log_gamma)

    def gamma_inv(self) -> np.ndarray:
        return np.exp(-self.log_gamma)

    def subsample(self, c: CoefficientSet, stride: int) -> "TruthPath":
        """Path restricted to a grid ``stride`` times coarser.

        State and observation are grid restrictions; raw noise increments are
        block sums; the innovation increments are re-derived from the coarse
        observation increments exactly as a coarse-grid observer would.
        """
        times = self.times[::stride]
        y = self.Y[::stride]
        return TruthPath(
            times=times,
            X=self.X[::stride],
            Y=y,
            dV=coarsen_increments(self.dV, stride),
            dVtilde=innovation_from_observation_grid(c, times, y),
            log_gamma=self.log_gamma[::stride],
            h_path=self.h_path[::stride],
        )


def simulate_truth(
    c: CoefficientSet, law: LawFlow, init: InitialLaw, cfg: SimConfig, noise: tuple | None = None
) -> TruthPath:
    """Simulate one signal-observation pair on the grid of ``law``.

    ``noise`` optionally supplies (dW (K,d), dV (K,m)).  The innovation
    increments returned satisfy sigma2 dVtilde = dY exactly on the grid, so
    :func:`innovation_from_observation` is an exact inverse.
    """
    k_steps = cfg.n_steps
    if len(law.measures) != k_steps + 1:
        raise ValueError("law flow grid does not match the simulation grid")
    rng = stream(cfg.seed, "truth")
    x = init.sample(rng, 1)
    sq_dt = np.sqrt(cfg.dt)

    xs = np.empty((k_steps + 1, c.n))
    ys = np.zeros((k_steps + 1, c.m))
    dvs = np.empty((k_steps, c.m))
    dvt = np.empty((k_steps, c.m))
    hs = np.empty((k_steps, c.m))
    log_gamma = np.zeros(k_steps + 1)
    xs[0] = x[0]

    sensor = c.mode == CouplingMode.SENSOR
    for k in range(k_steps):
        t = k * cfg.dt
        mu = law.at(k)
        if noise is None:
            dw = sq_dt * rng.standard_normal(c.d)
            dv = sq_dt * rng.standard_normal(c.m)
        else:
            dw, dv = noise[0][k], noise[1][k]
        b1v = np.asarray(c.b1(t, x, mu), dtype=float)[0]
        s0 = np.asarray(c.sigma0(t, x, mu), dtype=float)[0]
        s1 = np.asarray(c.sigma1(t, x, mu), dtype=float)[0]
        b2v = np.asarray(c.b2(t, x, mu), dtype=float)[0]
        h = observation_h(c, t, x, mu)[0]

        if sensor:
            du = c.sensor_sigma2 @ dv + c.sensor_sigma3 @ dw
            dy = b2v * cfg.dt + du
            dinn = du + b2v * cfg.dt  # transformed compound noise increment
            dvs[k] = du
        else:
            s2 = np.asarray(c.sigma2(t), dtype=float)
            dy = b2v * cfg.dt + s2 @ dv
            dinn = dv + h * cfg.dt
            dvs[k] = dv

        x = x + (b1v * cfg.dt + s0 @ dw + s1 @ dv)[None, :]
        xs[k + 1] = x[0]
        ys[k + 1] = ys[k] + dy
        dvt[k] = dinn
        hs[k] = h
        log_gamma[k + 1] = log_gamma[k] + h @ dinn - 0.5 * (h @ h) * cfg.dt
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > cfg.overflow_guard:
            raise BlowupError(f"truth path left the overflow guard at step {k + 1}", step=k + 1)

    return TruthPath(cfg.times(), xs, ys, dvs, dvt, log_gamma, hs)


def innovation_from_observation_grid(c: CoefficientSet, times: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Innovation increments recovered from an observed path on a grid."""
    dy = np.diff(np.asarray(y, dtype=float), axis=0)
    if c.mode == CouplingMode.SENSOR:
        return dy
    out = np.empty_like(dy)
    for k in range(dy.shape[0]):
        s2 = np.asarray(c.sigma2(float(times[k])), dtype=float)
        out[k] = np.linalg.solve(s2, dy[k])
    return out


def innovation_from_observation(c: CoefficientSet, truth: TruthPath) -> np.ndarray:
    """Innovation increments of a simulated path (round-trips exactly)."""
    return innovation_from_observation_grid(c, truth.times, truth.Y)


def export_truth_csv(path, truth: TruthPath) -> None:
    """Write t, X, Y, Gamma and the cumulative innovation as decimal text."""
    n = truth.X.shape[1]
    m = truth.Y.shape[1]
    vtilde = np.vstack([np.zeros((1, m)), np.cumsum(truth.dVtilde, axis=0)])
    gamma = truth.gamma()
    header = (
        ["t"]
        + [f"x{i}" for i in range(n)]
        + [f"y{j}" for j in range(m)]
        + ["gamma"]
        + [f"vtilde{j}" for j in range(m)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(truth.times):
            row = (
                [format_float(t)]
                + [format_float(v) for v in truth.X[k]]
                + [format_float(v) for v in truth.Y[k]]
                + [format_float(gamma[k])]
                + [format_float(v) for v in vtilde[k]]
            )
            writer.writerow(row)
