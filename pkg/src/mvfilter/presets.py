"""Named model presets: coefficient sets, initial laws, linear references."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import CoefficientSet, CouplingMode, HypothesisConstants

__all__ = [
    "InitialLaw",
    "ModelPreset",
    "coefficient_preset",
    "preset_names",
    "bounded_preset_names",
    "with_observation_drift",
    "LinearGaussianSpec",
]


@dataclass(frozen=True)
class InitialLaw:
    """Initial signal law with p > 2 moments (point, Gaussian or uniform)."""

    kind: str
    center: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if self.kind not in ("point", "gaussian", "uniform"):
            raise ValueError(f"unknown initial law kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "point":
            return np.tile(self.center, (count, 1))
        if self.kind == "gaussian":
            return self.center + self.scale * rng.standard_normal((count, self.dim))
        half = self.scale * np.sqrt(3.0)  # matches the Gaussian variance
        return self.center + rng.uniform(-half, half, size=(count, self.dim))

    def mean(self) -> np.ndarray:
        return self.center.copy()

    def cov(self) -> np.ndarray:
        return self.scale**2 * np.eye(self.dim)


@dataclass(frozen=True)
class LinearGaussianSpec:
    """Matrices of a linear model, consumed by the Kalman-Bucy reference."""

    A: np.ndarray
    C: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    m0: np.ndarray
    P0: np.ndarray

    def stationary_signal_std(self) -> float:
        """Scalar models only: sqrt((s0^2+s1^2) / (2|A|))."""
        a = float(self.A.reshape(()))
        q = float(self.sigma0.reshape(()) ** 2 + self.sigma1.reshape(()) ** 2)
        return float(np.sqrt(q / (2.0 * abs(a))))


@dataclass(frozen=True)
class ModelPreset:
    name: str
    coefficients: CoefficientSet
    initial_law: InitialLaw
    linear: LinearGaussianSpec | None = None
    params: dict = field(default_factory=dict)


def _const_mat(value, rows, cols):
    mat = np.asarray(value, dtype=float).reshape(rows, cols)

    def fn(t, x, mu):
        return np.broadcast_to(mat, (x.shape[0], rows, cols)).copy()

    return fn, mat


def _linear_model(name, a, c_obs, s0, s1, s2, abar=0.0, init_mean=0.0, init_std=None):
    n = d = m = 1
    if init_std is None:
        init_std = np.sqrt((s0**2 + s1**2) / (2.0 * abs(a + abar)))
    sigma0_fn, s0m = _const_mat(s0, n, d)
    sigma1_fn, s1m = _const_mat(s1, n, m)
    s2m = np.array([[s2]])

    def b1(t, x, mu):
        drift = a * x
        if abar != 0.0:
            drift = drift + abar * mu.mean()[None, :]
        return drift

    def b2(t, x, mu):
        return c_obs * x

    coeffs = CoefficientSet(
        n=n,
        d=d,
        m=m,
        b1=b1,
        sigma0=sigma0_fn,
        sigma1=sigma1_fn,
        b2=b2,
        sigma2=lambda t: s2m.copy(),
        constants=HypothesisConstants(
            lipschitz=abs(a) + abs(abar) + abs(c_obs),
            growth=max(abs(a) + abs(abar), np.hypot(s0, s1)) + 1e-9,
            observation_bound=max(abs(c_obs) * 10.0, abs(s2), 1.0 / abs(s2)),
        ),
        label=name,
    )
    init = InitialLaw("gaussian", np.array([init_mean]), float(init_std))
    # the matrix reference only describes the plain linear model; with a
    # mean-field term the conditional covariance no longer closes over (A, C)
    linear = None
    if abar == 0.0:
        linear = LinearGaussianSpec(
            A=np.array([[a]]),
            C=np.array([[c_obs]]),
            sigma0=s0m,
            sigma1=s1m,
            sigma2=s2m,
            m0=init.mean(),
            P0=init.cov(),
        )
    params = dict(a=a, abar=abar, c_obs=c_obs, sigma0=s0, sigma1=s1, sigma2=s2)
    return ModelPreset(name, coeffs, init, linear=linear, params=params)


def _tanh_model(name, kappa, gamma, s0, s1, init_mean=0.0, init_std=0.7):
    """Bounded drift -kappa*tanh(x), bounded observation gamma*tanh(x)."""
    n = d = m = 1
    sigma0_fn, _ = _const_mat(s0, n, d)
    sigma1_fn, _ = _const_mat(s1, n, m)

    def b1(t, x, mu):
        return -kappa * np.tanh(x)

    def b2(t, x, mu):
        return gamma * np.tanh(x)

    coeffs = CoefficientSet(
        n=n,
        d=d,
        m=m,
        b1=b1,
        sigma0=sigma0_fn,
        sigma1=sigma1_fn,
        b2=b2,
        sigma2=lambda t: np.array([[1.0]]),
        constants=HypothesisConstants(
            lipschitz=kappa + gamma,
            growth=max(kappa, np.hypot(s0, s1)),
            sup_bound=kappa + s0 + s1,
            observation_bound=max(gamma, 1.0),
        ),
        label=name,
    )
    init = InitialLaw("gaussian", np.array([init_mean]), init_std)
    params = dict(kappa=kappa, gamma=gamma, sigma0=s0, sigma1=s1)
    return ModelPreset(name, coeffs, init, params=params)


def _sensor_model(name, kappa, gamma, s1, mix2, mix3, init_mean=0.0, init_std=0.7):
    """Sensor-correlated variant: noise enters the observation directly."""
    n = d = m = 1
    sigma0_fn, _ = _const_mat(0.0, n, d)
    sigma1_fn, _ = _const_mat(s1, n, m)

    def b1(t, x, mu):
        return -kappa * np.tanh(x)

    def b2(t, x, mu):
        return gamma * np.tanh(x)

    coeffs = CoefficientSet(
        n=n,
        d=d,
        m=m,
        b1=b1,
        sigma0=sigma0_fn,
        sigma1=sigma1_fn,
        b2=b2,
        sigma2=lambda t: np.array([[1.0]]),
        constants=HypothesisConstants(
            lipschitz=kappa + gamma,
            growth=max(kappa, abs(s1)),
            sup_bound=kappa + abs(s1),
            observation_bound=max(gamma, 1.0),
        ),
        mode=CouplingMode.SENSOR,
        sensor_sigma2=np.array([[mix2]]),
        sensor_sigma3=np.array([[mix3]]),
        label=name,
    )
    init = InitialLaw("gaussian", np.array([init_mean]), init_std)
    params = dict(kappa=kappa, gamma=gamma, sigma1=s1, mix2=mix2, mix3=mix3)
    return ModelPreset(name, coeffs, init, params=params)


_BUILDERS = {
    "linear-gaussian": lambda **kw: _linear_model(
        "linear-gaussian",
        a=kw.get("a", -1.0),
        c_obs=kw.get("c_obs", 1.0),
        s0=kw.get("sigma0", 1.0),
        s1=kw.get("sigma1", 0.0),
        s2=kw.get("sigma2", 1.0),
        init_mean=kw.get("init_mean", 0.0),
        init_std=kw.get("init_std", None),
    ),
    "correlated-linear": lambda **kw: _linear_model(
        "correlated-linear",
        a=kw.get("a", -1.0),
        c_obs=kw.get("c_obs", 1.0),
        s0=kw.get("sigma0", 1.0),
        s1=kw.get("sigma1", 0.5),
        s2=kw.get("sigma2", 1.0),
        init_mean=kw.get("init_mean", 0.0),
        init_std=kw.get("init_std", None),
    ),
    "mean-field-linear": lambda **kw: _linear_model(
        "mean-field-linear",
        a=kw.get("a", -1.0),
        abar=kw.get("abar", 0.5),
        c_obs=kw.get("c_obs", 1.0),
        s0=kw.get("sigma0", 0.4),
        s1=kw.get("sigma1", 0.0),
        s2=kw.get("sigma2", 1.0),
        init_mean=kw.get("init_mean", 1.0),
        init_std=kw.get("init_std", 0.3),
    ),
    "tanh-observation": lambda **kw: _tanh_model(
        "tanh-observation",
        kappa=kw.get("kappa", 1.0),
        gamma=kw.get("gamma", 0.7),
        s0=kw.get("sigma0", 1.0),
        s1=kw.get("sigma1", 0.25),
        init_mean=kw.get("init_mean", 0.0),
        init_std=kw.get("init_std", 0.7),
    ),
    "sensor-correlated": lambda **kw: _sensor_model(
        "sensor-correlated",
        kappa=kw.get("kappa", 1.0),
        gamma=kw.get("gamma", 0.5),
        s1=kw.get("sigma1", 0.8),
        mix2=kw.get("mix2", 0.8),
        mix3=kw.get("mix3", 0.6),
        init_mean=kw.get("init_mean", 0.0),
        init_std=kw.get("init_std", 0.7),
    ),
}

#: presets whose coefficients are globally bounded (sup_bound declared)
_BOUNDED = ("tanh-observation", "sensor-correlated")


def preset_names() -> tuple:
    return tuple(_BUILDERS)


def bounded_preset_names() -> tuple:
    return _BOUNDED


def coefficient_preset(name: str, **overrides) -> ModelPreset:
    """Build a named preset; keyword overrides replace default parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; have {sorted(_BUILDERS)}") from None
    preset = builder(**overrides)
    preset.coefficients.validate()
    return preset


def with_observation_drift(preset: ModelPreset, kind: str, value: float = 0.0) -> ModelPreset:
    """Copy of the preset with b2 replaced by a zero or constant drift.

    Used by the mass-conservation diagnostics: ``kind='zero'`` makes the
    filter weights exactly constant, ``kind='constant'`` makes the mass an
    explicit exponential of the innovation.
    """
    c = preset.coefficients
    if kind == "zero":
        b2 = lambda t, x, mu: np.zeros((x.shape[0], c.m))
    elif kind == "constant":
        b2 = lambda t, x, mu: np.full((x.shape[0], c.m), float(value))
    else:
        raise ValueError("kind must be 'zero' or 'constant'")
    coeffs = replace(c, b2=b2, label=f"{c.label}/{kind}-observation")
    return ModelPreset(
        name=f"{preset.name}/{kind}-observation",
        coefficients=coeffs,
        initial_law=preset.initial_law,
        linear=None,
        params={**preset.params, "b2_kind": kind, "b2_value": value},
    )
