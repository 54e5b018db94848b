"""Weighted-particle filtering for mean-field signal models with correlated noises.

The package simulates coupled signal-observation systems whose signal law
enters its own coefficients, runs unnormalized (reference-measure) particle
filters along recorded innovation paths, and checks the weak-form identities
the filtering theory promises: mass evolution, Zakai and Kushner-Stratonovich
residuals, mollified pathwise-uniqueness gaps, ensemble-level evolution of
projected functionals, and linear-Gaussian agreement with the correlated-gain
Kalman-Bucy reference.
"""

from .coefficients import (
    CoefficientSet,
    CouplingMode,
    HypothesisConstants,
    estimate_hypotheses,
    observation_h,
)
from .diagnostics import (
    kushner_stratonovich_residual,
    ks_residual,
    mass_identity_residual,
    mass_process_check,
    pathwise_uniqueness_gap,
    zakai_residual,
)
from .errors import (
    BlowupError,
    CoverageError,
    DimensionMismatchError,
    MassUnderflowError,
    NotPositiveDefiniteError,
)
from .filtering import (
    FilterConfig,
    FilterState,
    FilterTrace,
    initial_filter_state,
    kallianpur_striebel,
    run_filter,
)
from .fpe import (
    LawEnsemble,
    build_law_ensemble,
    fpe_residual,
    integrability_check,
    projected_sde_check,
)
from .functionals import (
    CylindricalStateFunctional,
    MeasureFunctional,
    measure_battery,
    state_battery,
)
from .harness import ExperimentConfig, ResultRecord, run_experiment
from .kalman import kalman_bucy, stationary_variance
from .measures import EmpiricalMeasure, wasserstein2
from .mollifier import (
    MollifierConfig,
    adjoint_identity_check,
    auto_mollifier_config,
    energy_curve,
    gronwall_check,
    mollified_gap,
    smooth_function,
    smooth_measure,
)
from .presets import InitialLaw, ModelPreset, coefficient_preset, preset_names
from .sde import LawFlow, SimConfig, TruthPath, simulate_law_flow, simulate_truth
from .testfunctions import TestFunction
from .util import derive_seed, stream

__version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "CoefficientSet",
    "CouplingMode",
    "CoverageError",
    "CylindricalStateFunctional",
    "DimensionMismatchError",
    "EmpiricalMeasure",
    "ExperimentConfig",
    "FilterConfig",
    "FilterState",
    "FilterTrace",
    "HypothesisConstants",
    "InitialLaw",
    "LawEnsemble",
    "LawFlow",
    "MassUnderflowError",
    "MeasureFunctional",
    "ModelPreset",
    "MollifierConfig",
    "NotPositiveDefiniteError",
    "ResultRecord",
    "SimConfig",
    "TestFunction",
    "TruthPath",
    "adjoint_identity_check",
    "auto_mollifier_config",
    "build_law_ensemble",
    "coefficient_preset",
    "derive_seed",
    "energy_curve",
    "estimate_hypotheses",
    "fpe_residual",
    "gronwall_check",
    "initial_filter_state",
    "integrability_check",
    "kallianpur_striebel",
    "kalman_bucy",
    "ks_residual",
    "kushner_stratonovich_residual",
    "mass_identity_residual",
    "mass_process_check",
    "measure_battery",
    "mollified_gap",
    "observation_h",
    "pathwise_uniqueness_gap",
    "preset_names",
    "projected_sde_check",
    "run_experiment",
    "run_filter",
    "simulate_law_flow",
    "simulate_truth",
    "smooth_function",
    "smooth_measure",
    "state_battery",
    "stationary_variance",
    "wasserstein2",
    "zakai_residual",
]
