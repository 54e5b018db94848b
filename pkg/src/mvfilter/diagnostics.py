"""Weak-form identity checks on recorded filter runs.

Every stochastic integral below uses left-point quadrature, matching the
Euler stepping of the runs themselves, so residuals measure only the
discretization and Monte-Carlo error of the identity under test and not a
quadrature-convention mismatch.  All checks require runs recorded without
resampling: resampling preserves the measure in law but jumps the particular
atom representation the pathwise identities telescope over.
"""

from __future__ import annotations

import numpy as np

from .coefficients import CoefficientSet, observation_h
from .filtering import FilterConfig, FilterState, FilterTrace, run_filter
from .functionals import CylindricalStateFunctional
from .generators import effective_sigma1, mean_field_generator
from .measures import EmpiricalMeasure
from .mollifier import MollifierConfig, auto_mollifier_config, mollified_gap
from .sde import LawFlow
from .util import stream

__all__ = [
    "mass_identity_residual",
    "mass_process_check",
    "zakai_residual",
    "kushner_stratonovich_residual",
    "ks_residual",
    "pathwise_uniqueness_gap",
]


def _require_unresampled(trace: FilterTrace):
    if trace.resampled:
        raise ValueError("identity diagnostics need a run recorded without resampling")


def mass_identity_residual(trace: FilterTrace, dvtilde: np.ndarray) -> dict:
    """Compare the mass series against its own stochastic-integral identity.

    The mass satisfies M_t = M_0 + int M_s <normalized cloud, h> dVtilde, so
    the left-point reconstruction should track the recorded masses up to
    O(dt) + O(N^{-1/2}).
    """
    _require_unresampled(trace)
    increments = np.einsum("kj,kj->k", trace.masses[:-1, None] * trace.h_means[:-1], dvtilde)
    reconstructed = trace.masses[0] + np.concatenate([[0.0], np.cumsum(increments)])
    series = trace.masses - reconstructed
    return {
        "sup": float(np.max(np.abs(series))),
        "final": float(abs(series[-1])),
        "series": series,
        "reconstructed": reconstructed,
    }


def zakai_residual(trace: FilterTrace, dvtilde: np.ndarray, ident: str) -> dict:
    """Weak-form residual of one tracked function along the run.

    R(t_k) = value_k - value_0 - sum_{j<k} generator_j dt
             - sum_{j<k} gain_j . dVtilde_j
    with every integrand recorded at the left node of its step.
    """
    _require_unresampled(trace)
    rec = trace.tracked[ident]
    dt = float(trace.times[1] - trace.times[0])
    drift = np.concatenate([[0.0], np.cumsum(rec["generator"][:-1] * dt)])
    noise = np.concatenate([[0.0], np.cumsum(np.einsum("kj,kj->k", rec["gain"][:-1], dvtilde))])
    series = rec["value"] - rec["value"][0] - drift - noise
    return {"final": float(abs(series[-1])), "sup": float(np.max(np.abs(series))), "series": series}


def kushner_stratonovich_residual(
    c: CoefficientSet,
    law: LawFlow,
    trace: FilterTrace,
    functional: CylindricalStateFunctional,
    dvtilde: np.ndarray,
) -> dict:
    """Residual of the normalized-filter evolution for a cylindrical functional.

    The normalized cloud at each step integrates F, its mean-field generator,
    and the gain correction; the driving increments are the innovation under
    the physical measure, dVbar = dVtilde - <normalized cloud, h> dt.  The
    correction term couples the raw gain with the product of the two means,
    which is what normalization adds on top of the unnormalized identity.
    The measure slot of F follows the signal law flow, not the filter.
    """
    _require_unresampled(trace)
    k_steps = dvtilde.shape[0]
    if sorted(trace.snapshots) != list(range(k_steps + 1)):
        raise ValueError("need snapshots at every step (snapshot_stride=1)")
    dt = float(trace.times[1] - trace.times[0])

    direct = np.empty(k_steps + 1)
    gen = np.empty(k_steps + 1)
    corr = np.empty((k_steps + 1, c.m))
    hbar = np.empty((k_steps + 1, c.m))
    for k in range(k_steps + 1):
        state = trace.snapshots[k]
        t = float(trace.times[k])
        x = state.particles
        mu = law.at(k)
        fvals = functional.value(x, mu)
        gvals = mean_field_generator(c, t, functional, mu, x)
        h = observation_h(c, t, x, mu)
        s1eff = effective_sigma1(c, t, x, mu)
        gain = fvals[:, None] * h + np.einsum("ni,nij->nj", functional.grad_x(x, mu), s1eff)
        direct[k] = state.normalized_moment(fvals)
        gen[k] = state.normalized_moment(gvals)
        hbar[k] = state.normalized_moment(h)
        corr[k] = state.normalized_moment(gain) - direct[k] * hbar[k]

    dvbar = dvtilde - hbar[:-1] * dt
    drift = np.concatenate([[0.0], np.cumsum(gen[:-1] * dt)])
    noise = np.concatenate([[0.0], np.cumsum(np.einsum("kj,kj->k", corr[:-1], dvbar))])
    series = direct - direct[0] - drift - noise
    return {
        "final": float(abs(series[-1])),
        "sup": float(np.max(np.abs(series))),
        "series": series,
        "direct": direct,
        "terminal_value": float(direct[-1]),
        "reconstruction": float(direct[0] + drift[-1] + noise[-1]),
    }


def _canonical(state: FilterState) -> FilterState:
    """Sort atoms lexicographically so equal measures share one representation.

    Two clouds carrying the same point measure then receive identical
    per-particle noise rows, which is what makes the equal-initial-condition
    gap vanish bitwise rather than to Monte-Carlo accuracy.
    """
    order = np.lexsort(np.concatenate([state.particles.T, [state.log_weights]]))
    return FilterState(state.particles[order], state.log_weights[order], state.time)


def pathwise_uniqueness_gap(
    c: CoefficientSet,
    law: LawFlow,
    dvtilde: np.ndarray,
    init1: FilterState,
    init2: FilterState,
    seed: int,
    molly: MollifierConfig | None = None,
    snapshot_stride: int = 10,
) -> dict:
    """Mollified H-distance between two filters driven by identical noise.

    Both clouds consume the same innovation path and the same per-particle
    noise bank, so any surviving gap is attributable to the initial
    conditions alone.
    """
    if init1.size != init2.size:
        raise ValueError("both initializations need the same particle count")
    k_steps = dvtilde.shape[0]
    dt = float(law.times[1] - law.times[0])
    width = c.signal_noise_dims()
    bank = np.sqrt(dt) * stream(seed, "gap-noise").standard_normal((k_steps, init1.size, width))
    cfg = FilterConfig(n_particles=init1.size, snapshot_stride=snapshot_stride)
    trace1 = run_filter(c, law, dvtilde, cfg, _canonical(init1), seed, noise_bank=bank)
    trace2 = run_filter(c, law, dvtilde, cfg, _canonical(init2), seed, noise_bank=bank)

    if molly is None:
        pts = np.concatenate([trace1.snapshots[k].particles for k in sorted(trace1.snapshots)]
                             + [trace2.snapshots[k].particles for k in sorted(trace2.snapshots)])
        molly = auto_mollifier_config(pts)
    steps = sorted(trace1.snapshots)
    gaps = np.array([
        mollified_gap(trace1.snapshots[k].as_measure(), trace2.snapshots[k].as_measure(), molly)
        for k in steps
    ])
    return {
        "times": trace1.times[steps],
        "gaps": gaps,
        "terminal": float(gaps[-1]),
        "config": molly,
    }


# shorter names used by the diagnostics vocabulary
mass_process_check = mass_identity_residual
ks_residual = kushner_stratonovich_residual
