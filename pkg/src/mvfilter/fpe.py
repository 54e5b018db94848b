"""Ensemble-level checks of the measure-valued evolution law.

The law of the unnormalized filter is only accessible empirically: run M
independent signal-observation pairs, filter each one, and treat the M
weighted clouds at time t as samples of the measure-valued state.  A
cylindrical functional of the cloud sees each run through the vector
z_u = <cloud, phi_u>, whose recorded series (value, generator moment, gain
moment) are exactly the ingredients of the generator at the measure level:

    (L G)(nu) = sum_u dg/dz_u <nu, gen phi_u>
              + 1/2 sum_{u,v} d2g/dz_u dz_v  sum_l <nu,gain_u^l><nu,gain_v^l>

so no particle snapshot is ever needed after the runs complete.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coefficients import CoefficientSet
from .filtering import FilterConfig, FilterTrace, initial_filter_state, run_filter
from .functionals import MeasureFunctional
from .presets import InitialLaw
from .sde import LawFlow, SimConfig, simulate_truth
from .util import derive_seed, parallel_map, stream

__all__ = [
    "LawEnsemble",
    "battery_record_set",
    "build_law_ensemble",
    "fpe_residual",
    "integrability_check",
    "projected_sde_check",
]


@dataclass(frozen=True)
class LawEnsemble:
    """Independent filter runs sharing coefficients and the signal law flow."""

    coefficients: CoefficientSet
    law: LawFlow
    traces: tuple[FilterTrace, ...]
    record_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.traces) < 2:
            raise ValueError("an ensemble needs at least two runs")

    @property
    def n_runs(self) -> int:
        return len(self.traces)

    @property
    def times(self) -> np.ndarray:
        return self.traces[0].times

    @property
    def dt(self) -> float:
        t = self.times
        return float(t[1] - t[0])

    def subset(self, m: int) -> "LawEnsemble":
        """First m runs; nested subsets share their members exactly."""
        return replace(self, traces=self.traces[:m])


def battery_record_set(functionals) -> tuple[tuple, tuple]:
    """Deduplicated (test function, id) recording set for a functional list."""
    fns, ids = [], []
    for g in functionals:
        for j, phi in enumerate(g.phis):
            ident = f"{g.ident}:{j}"
            if ident not in ids:
                ids.append(ident)
                fns.append(phi)
    return tuple(fns), tuple(ids)


def _run_member(args):
    c, law, init, cfg, fcfg, run_seed = args
    member_cfg = replace(cfg, seed=run_seed)
    truth = simulate_truth(c, law, init, member_cfg)
    state0 = initial_filter_state(init, fcfg.n_particles, run_seed)
    return run_filter(c, law, truth.dVtilde, fcfg, state0, run_seed)


def build_law_ensemble(
    c: CoefficientSet,
    law: LawFlow,
    init: InitialLaw,
    cfg: SimConfig,
    n_runs: int,
    n_particles: int,
    record: tuple,
    record_ids: tuple,
    threads: int = 1,
) -> LawEnsemble:
    """M filter runs with independent observations and independent clouds.

    Member r derives every stream from (cfg.seed, "ensemble-member", r), so
    the ensemble content is independent of execution order and thread count,
    and extending the ensemble preserves the existing members bit for bit.
    """
    fcfg = FilterConfig(n_particles=n_particles, record=record, record_ids=record_ids)
    jobs = [
        (c, law, init, cfg, fcfg, derive_seed(cfg.seed, "ensemble-member", r))
        for r in range(n_runs)
    ]
    traces = parallel_map(_run_member, jobs, threads=threads)
    return LawEnsemble(c, law, tuple(traces), tuple(record_ids))


def _functional_arrays(ens: LawEnsemble, g: MeasureFunctional, ids=None):
    ids = ids if ids is not None else tuple(f"{g.ident}:{j}" for j in range(len(g.phis)))
    missing = [i for i in ids if i not in ens.traces[0].tracked]
    if missing:
        raise KeyError(f"ensemble did not record {missing}")
    z = np.stack([
        np.stack([tr.tracked[i]["value"] for i in ids], axis=1) for tr in ens.traces
    ])  # (M, K+1, k)
    lz = np.stack([
        np.stack([tr.tracked[i]["generator"] for i in ids], axis=1) for tr in ens.traces
    ])
    gains = np.stack([
        np.stack([tr.tracked[i]["gain"] for i in ids], axis=1) for tr in ens.traces
    ])  # (M, K+1, k, m)
    return z, lz, gains


def fpe_residual(ens: LawEnsemble, g: MeasureFunctional, ids=None) -> dict:
    """Weak-form residual of the measure-level evolution, averaged over runs.

    Per run, B(t) = G(cloud_t) - G(cloud_0) - sum_k (L G)(cloud_{t_k}) dt with
    left-point quadrature; the report carries the ensemble mean of B with its
    standard error, which is the 3-sigma yardstick the acceptance checks use.
    """
    z, lz, gains = _functional_arrays(ens, g, ids)
    m_runs, n_nodes, k = z.shape
    dt = ens.dt

    gvals = np.empty((m_runs, n_nodes))
    lg = np.empty((m_runs, n_nodes))
    for r in range(m_runs):
        for j in range(n_nodes):
            zv = z[r, j]
            gvals[r, j] = g.outer.value(zv)
            alpha = gains[r, j] @ gains[r, j].T  # (k, k)
            lg[r, j] = float(
                np.dot(g.outer.grad(zv), lz[r, j]) + 0.5 * np.sum(g.outer.hess(zv) * alpha)
            )
    drift = np.concatenate([np.zeros((m_runs, 1)), np.cumsum(lg[:, :-1] * dt, axis=1)], axis=1)
    per_run = gvals - gvals[:, :1] - drift  # (M, K+1)
    mean = per_run.mean(axis=0)
    se = per_run.std(axis=0, ddof=1) / np.sqrt(m_runs)
    return {
        "series": mean,
        "stderr": se,
        "final": float(mean[-1]),
        "final_stderr": float(se[-1]),
        "per_run_final": per_run[:, -1],
        "ident": g.ident,
    }


def integrability_check(ens: LawEnsemble, cap: float = 1e6) -> dict:
    """Ensemble average of the time-integrated coefficient-moment series."""
    vals = np.array([
        float(np.sum(tr.integrability[:-1]) * ens.dt) for tr in ens.traces
    ])
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    passed = bool(np.all(np.isfinite(vals)) and vals.max() <= cap)
    return {"value": value, "stderr": se, "max": float(vals.max()), "cap": cap, "passed": passed}


def projected_sde_check(ens: LawEnsemble, ids: tuple) -> dict:
    """Drift and quadratic-covariation fingerprint of the projected dynamics.

    The vector xi_u(t) = <cloud_t, phi_u> should move with drift
    <cloud, gen phi_u> and covariation sum_l <cloud,gain_u^l><cloud,gain_v^l>;
    both are tested as zero-mean step-aggregates at 3 standard errors.
    """
    if len(ids) > 6:
        raise ValueError("keep the projection battery small (k <= 6)")
    z = np.stack([
        np.stack([tr.tracked[i]["value"] for i in ids], axis=1) for tr in ens.traces
    ])  # (M, K+1, k)
    beta = np.stack([
        np.stack([tr.tracked[i]["generator"] for i in ids], axis=1) for tr in ens.traces
    ])
    gains = np.stack([
        np.stack([tr.tracked[i]["gain"] for i in ids], axis=1) for tr in ens.traces
    ])  # (M, K+1, k, m)
    m_runs = z.shape[0]
    dt = ens.dt

    drift = z[:, -1] - z[:, 0] - np.sum(beta[:, :-1] * dt, axis=1)  # (M, k)
    dz = np.diff(z, axis=1)  # (M, K, k)
    qv = np.einsum("mku,mkv->muv", dz, dz) - dt * np.einsum(
        "mkul,mkvl->muv", gains[:, :-1], gains[:, :-1]
    )  # (M, k, k)

    drift_mean = drift.mean(axis=0)
    drift_se = drift.std(axis=0, ddof=1) / np.sqrt(m_runs)
    qv_mean = qv.mean(axis=0)
    qv_se = qv.std(axis=0, ddof=1) / np.sqrt(m_runs)
    drift_pass = bool(np.all(np.abs(drift_mean) <= 3.0 * drift_se))
    qv_pass = bool(np.all(np.abs(qv_mean) <= 3.0 * qv_se))
    return {
        "drift_mean": drift_mean,
        "drift_stderr": drift_se,
        "drift_pass": drift_pass,
        "qv_mean": qv_mean,
        "qv_stderr": qv_se,
        "qv_pass": qv_pass,
        "passed": drift_pass and qv_pass,
    }
