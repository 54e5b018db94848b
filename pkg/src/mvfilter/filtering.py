"""Weighted-particle approximation of the unnormalized filter.

Particles propagate under the reference measure (the one that turns the
innovation process into a Brownian motion): the drift carries the correlated
correction ``- sigma1 h`` and every particle feels the common innovation
increment through sigma1, while the log-weights accumulate the exponential
change-of-measure density.  The cross-variation between weights and
positions generated by the shared innovation is exactly what produces the
correlated-noise correction term in the weak-form identity, so no extra term
is ever added by hand.

Masses follow the convention ``<cloud, phi> = (1/N) sum_i exp(lw_i) phi(x_i)``;
a fresh cloud with zero log-weights has unit mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import CoefficientSet, CouplingMode, observation_h
from .errors import BlowupError, MassUnderflowError
from .generators import effective_sigma1
from .measures import EmpiricalMeasure
from .presets import InitialLaw
from .sde import LawFlow
from .testfunctions import TestFunction
from .util import stream

__all__ = [
    "FilterState",
    "FilterConfig",
    "FilterTrace",
    "initial_filter_state",
    "zakai_step",
    "sensor_correlated_step",
    "sensor_variant_step",
    "run_filter",
    "kallianpur_striebel",
    "ks_normalize",
    "systematic_resample",
]

_MASS_FLOOR = 1e-290


@dataclass(frozen=True)
class FilterState:
    """Particle cloud with log-weights at a fixed time."""

    particles: np.ndarray  # (N, n)
    log_weights: np.ndarray  # (N,)
    time: float = 0.0

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if lw.shape[0] != p.shape[0]:
            raise ValueError("one log-weight per particle required")
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "log_weights", lw)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def weights(self) -> np.ndarray:
        """exp(log_weights), stabilized; scale carried separately by mass."""
        shift = np.max(self.log_weights)
        return np.exp(self.log_weights - shift)

    @property
    def mass(self) -> float:
        shift = np.max(self.log_weights)
        return float(np.exp(shift) * np.mean(np.exp(self.log_weights - shift)))

    def unnormalized_moment(self, values) -> float | np.ndarray:
        """<cloud, phi> for per-particle values (callable or array)."""
        if callable(values):
            values = values(self.particles)
        values = np.asarray(values, dtype=float)
        shift = np.max(self.log_weights)
        w = np.exp(self.log_weights - shift)
        out = np.exp(shift) * np.tensordot(w, values, axes=(0, 0)) / self.size
        return float(out) if np.ndim(out) == 0 else out

    def normalized_moment(self, values) -> float | np.ndarray:
        if callable(values):
            values = values(self.particles)
        values = np.asarray(values, dtype=float)
        w = self.weights()
        out = np.tensordot(w, values, axes=(0, 0)) / np.sum(w)
        return float(out) if np.ndim(out) == 0 else out

    def ess(self) -> float:
        """Effective sample size of the normalized weights."""
        w = self.weights()
        return float(np.sum(w) ** 2 / np.sum(w * w))

    def as_measure(self) -> EmpiricalMeasure:
        """Point-cloud measure with the unnormalized (1/N) e^lw weights."""
        shift = np.max(self.log_weights)
        w = np.exp(shift) * np.exp(self.log_weights - shift) / self.size
        return EmpiricalMeasure(self.particles, w)


def initial_filter_state(init: InitialLaw, n_particles: int, seed: int, label: str = "filter-init") -> FilterState:
    rng = stream(seed, label)
    pts = init.sample(rng, n_particles)
    return FilterState(pts, np.zeros(n_particles), time=0.0)


@dataclass(frozen=True)
class FilterConfig:
    """Particle count, resampling policy, and what to record along the run."""

    n_particles: int
    resample: str = "none"  # or "systematic"
    ess_threshold: float = 0.5
    record: tuple = ()  # TestFunction objects tracked along the run
    record_ids: tuple = ()
    snapshot_stride: int = 0  # 0 = keep no particle snapshots

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.resample not in ("none", "systematic"):
            raise ValueError(f"unknown resampling policy {self.resample!r}")
        if self.record_ids and len(self.record_ids) != len(self.record):
            raise ValueError("record_ids must match record")
        if not self.record_ids:
            object.__setattr__(self, "record_ids", tuple(f"phi{i}" for i in range(len(self.record))))


@dataclass
class FilterTrace:
    """Everything the diagnostics need, recorded at every grid node."""

    times: np.ndarray
    masses: np.ndarray  # (K+1,)
    h_means: np.ndarray  # (K+1, m), normalized
    tracked: dict  # id -> {"value": (K+1,), "generator": (K+1,), "gain": (K+1, m)}
    integrability: np.ndarray  # (K+1,)
    snapshots: dict  # step index -> FilterState
    resampled: tuple
    seed: int
    n_particles: int

    @property
    def terminal(self) -> FilterState:
        k = max(self.snapshots) if self.snapshots else None
        if k is None:
            raise ValueError("trace kept no snapshots")
        return self.snapshots[k]

    def tracked_series(self, ident: str) -> dict:
        return self.tracked[ident]


def _coeff_tables(c: CoefficientSet, t: float, x: np.ndarray, mu: EmpiricalMeasure):
    """Per-particle coefficient arrays shared by stepping and recording."""
    b1v = np.asarray(c.b1(t, x, mu), dtype=float)
    s0 = np.asarray(c.sigma0(t, x, mu), dtype=float)
    s1 = np.asarray(c.sigma1(t, x, mu), dtype=float)
    h = observation_h(c, t, x, mu)
    return b1v, s0, s1, h


def zakai_step(
    c: CoefficientSet,
    mu_law: EmpiricalMeasure,
    state: FilterState,
    dvtilde: np.ndarray,
    dt: float,
    dw: np.ndarray,
) -> FilterState:
    """One reference-measure step of the signal-correlated particle filter.

    dvtilde is the shared innovation increment (m,), dw the per-particle
    Brownian increments (N, d).  Left-point evaluation throughout.
    """
    t = state.time
    x = state.particles
    b1v, s0, s1, h = _coeff_tables(c, t, x, mu_law)
    dvt = np.asarray(dvtilde, dtype=float).reshape(c.m)

    lw = state.log_weights + h @ dvt - 0.5 * np.sum(h * h, axis=1) * dt
    drift = b1v - np.einsum("nij,nj->ni", s1, h)
    xn = x + drift * dt + np.einsum("nij,nj->ni", s0, dw) + s1 @ dvt
    return FilterState(xn, lw, time=t + dt)


def sensor_correlated_step(
    c: CoefficientSet,
    mu_law: EmpiricalMeasure,
    state: FilterState,
    dutilde: np.ndarray,
    dt: float,
    db: np.ndarray,
) -> FilterState:
    """One step of the sensor-correlated variant.

    The signal noise splits into the component visible in the compound
    observation (driven by the shared transformed increment) and an
    orthogonal remainder rho dB with rho rho^T = I - sigma2_mix^T sigma2_mix.
    With sigma3_mix = 0 and sigma2_mix = I the remainder vanishes and the
    step coincides with :func:`zakai_step` at sigma0 = 0.
    """
    t = state.time
    x = state.particles
    mix2 = c.sensor_sigma2
    b1v = np.asarray(c.b1(t, x, mu_law), dtype=float)
    s1 = np.asarray(c.sigma1(t, x, mu_law), dtype=float)
    b2v = np.asarray(c.b2(t, x, mu_law), dtype=float)
    dut = np.asarray(dutilde, dtype=float).reshape(c.m)

    lw = state.log_weights + b2v @ dut - 0.5 * np.sum(b2v * b2v, axis=1) * dt

    resid = np.eye(c.m) - mix2.T @ mix2
    vals, vecs = np.linalg.eigh(0.5 * (resid + resid.T))
    rho = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    s1m2 = s1 @ mix2.T  # (N, n, m)
    drift = b1v - np.einsum("nij,nj->ni", s1m2, b2v)
    xn = x + drift * dt + s1m2 @ dut + np.einsum("nij,nj->ni", s1, db @ rho.T)
    return FilterState(xn, lw, time=t + dt)


def systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    """Systematic resampling indices for normalized weights and u in [0,1)."""
    n = weights.shape[0]
    positions = (u + np.arange(n)) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(max=n - 1)


def _record(
    c: CoefficientSet,
    k: int,
    state: FilterState,
    mu_law: EmpiricalMeasure,
    cfg: FilterConfig,
    trace: FilterTrace,
):
    t = state.time
    x = state.particles
    b1v, s0, s1, h = _coeff_tables(c, t, x, mu_law)
    s1eff = effective_sigma1(c, t, x, mu_law)
    diff = np.einsum("nij,nkj->nik", s0, s0) + np.einsum("nij,nkj->nik", s1, s1)

    mass = state.mass
    if not np.isfinite(mass) or mass < _MASS_FLOOR:
        raise MassUnderflowError(f"filter mass {mass!r} at step {k}")
    trace.masses[k] = mass
    trace.h_means[k] = state.normalized_moment(h)
    trace.integrability[k] = state.unnormalized_moment(
        np.linalg.norm(b1v, axis=1)
        + np.sum(h * h, axis=1)
        + np.sum(s1 * s1, axis=(1, 2))
        + np.linalg.norm(diff, axis=(1, 2))
    )
    for ident, tf in zip(cfg.record_ids, cfg.record):
        vals = tf.value_fn(x)
        grads = tf.grad_fn(x)
        hesses = tf.hess_fn(x)
        gen = np.einsum("ni,ni->n", grads, b1v) + 0.5 * np.einsum("nij,nij->n", hesses, diff)
        gain = vals[:, None] * h + np.einsum("ni,nij->nj", grads, s1eff)
        rec = trace.tracked[ident]
        rec["value"][k] = state.unnormalized_moment(vals)
        rec["generator"][k] = state.unnormalized_moment(gen)
        rec["gain"][k] = state.unnormalized_moment(gain)
    if cfg.snapshot_stride and (k % cfg.snapshot_stride == 0 or k == len(trace.times) - 1):
        trace.snapshots[k] = state


def run_filter(
    c: CoefficientSet,
    law: LawFlow,
    dvtilde: np.ndarray,
    cfg: FilterConfig,
    init: FilterState,
    seed: int,
    noise_bank: np.ndarray | None = None,
) -> FilterTrace:
    """Drive the particle filter along a recorded innovation path.

    ``noise_bank`` optionally supplies the per-particle increments
    (K, N, width) for common-random-number designs; by default they are
    drawn from the labeled stream (seed, "filter-noise").  Resampling, when
    enabled, happens after the step-k quantities are recorded, so recorded
    series always describe the weighted cloud the identities refer to.
    """
    k_steps = dvtilde.shape[0]
    if len(law.measures) != k_steps + 1:
        raise ValueError("law flow grid does not match the innovation path")
    dt = float(law.times[1] - law.times[0])
    width = c.signal_noise_dims()
    if noise_bank is None:
        rng = stream(seed, "filter-noise")
        noise_bank = np.sqrt(dt) * rng.standard_normal((k_steps, cfg.n_particles, width))
    if noise_bank.shape != (k_steps, cfg.n_particles, width):
        raise ValueError(f"noise bank shape {noise_bank.shape} mismatches run")

    trace = FilterTrace(
        times=law.times.copy(),
        masses=np.empty(k_steps + 1),
        h_means=np.empty((k_steps + 1, c.m)),
        tracked={
            ident: {
                "value": np.empty(k_steps + 1),
                "generator": np.empty(k_steps + 1),
                "gain": np.empty((k_steps + 1, c.m)),
            }
            for ident in cfg.record_ids
        },
        integrability=np.empty(k_steps + 1),
        snapshots={},
        resampled=(),
        seed=seed,
        n_particles=cfg.n_particles,
    )

    resampled = []
    state = init
    sensor = c.mode == CouplingMode.SENSOR
    for k in range(k_steps):
        _record(c, k, state, law.at(k), cfg, trace)
        if cfg.resample == "systematic" and state.ess() < cfg.ess_threshold * cfg.n_particles:
            w = state.weights()
            idx = systematic_resample(w / np.sum(w), float(stream(seed, "resample", k).uniform()))
            log_mass = np.log(state.mass)
            state = FilterState(state.particles[idx], np.full(cfg.n_particles, log_mass), state.time)
            resampled.append(k)
        if sensor:
            state = sensor_correlated_step(c, law.at(k), state, dvtilde[k], dt, noise_bank[k])
        else:
            state = zakai_step(c, law.at(k), state, dvtilde[k], dt, noise_bank[k])
        if not np.all(np.isfinite(state.particles)):
            raise BlowupError(f"filter cloud diverged at step {k + 1}", step=k + 1)
    _record(c, k_steps, state, law.at(k_steps), cfg, trace)
    trace.resampled = tuple(resampled)
    return trace


def kallianpur_striebel(state: FilterState, tf: TestFunction) -> float:
    """Normalized filter moment: unnormalized moment divided by the mass."""
    return float(state.normalized_moment(tf.value_fn))


# shorter names used by the diagnostics vocabulary
ks_normalize = kallianpur_striebel
sensor_variant_step = sensor_correlated_step
