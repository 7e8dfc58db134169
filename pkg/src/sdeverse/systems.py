"""System specifications: the complete parameterization of one sampled SDE.

A spec bundles per-dimension drift, correlated diffusion, compound
Poisson jumps, and a two-state regime chain, tagged with the complexity
level it was sampled at. Specs are immutable value objects; everything
the simulator needs is precomputed here, nothing is sampled later.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidLevel, InvalidParameter
from .linalg import PD_FLOOR, CholeskyFactor, CorrelationMatrix, _frozen

MIN_LEVEL = 0
MAX_LEVEL = 7

DRIFT_KINDS = ("constant", "linear_mean_reversion", "tanh_saturating", "cubic_damped")
LEVEL0_DRIFT_KINDS = ("constant", "linear_mean_reversion")
REGIME_MECHANISMS = ("telegraph", "logistic")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class CurriculumLevel:
    """Position on the complexity ladder. Only 0..7 are supported."""

    level: int

    def __post_init__(self):
        lv = self.level
        if isinstance(lv, bool) or not isinstance(lv, (int, np.integer)):
            raise InvalidLevel(f"level must be an integer, got {lv!r}")
        lv = int(lv)
        if not MIN_LEVEL <= lv <= MAX_LEVEL:
            raise InvalidLevel(f"level {lv} outside the supported range {MIN_LEVEL}..{MAX_LEVEL}")
        object.__setattr__(self, "level", lv)

    def __int__(self) -> int:
        return self.level

    def __index__(self) -> int:
        return self.level

    def __hash__(self) -> int:
        return hash(self.level)

    def _other(self, other):
        if isinstance(other, CurriculumLevel):
            return other.level
        if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
            return int(other)
        return NotImplemented

    def __eq__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self.level == o

    def __lt__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self.level < o

    def __le__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self.level <= o

    def __gt__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self.level > o

    def __ge__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self.level >= o


def as_level(level) -> CurriculumLevel:
    return level if isinstance(level, CurriculumLevel) else CurriculumLevel(level)


def _finite_scalar(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise InvalidParameter(f"{name} must be finite, got {value}")
    return value


def _finite_vector(value, name: str, length: int | None = None) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    if a.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d vector, got shape {a.shape}")
    if length is not None and a.shape[0] != length:
        raise DimensionMismatch(f"{name} must have length {length}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter(f"{name} has non-finite entries")
    return _frozen(a)


@dataclass(frozen=True)
class DriftSpec:
    """Deterministic drift of one dimension plus its sinusoidal forcing.

    kind names the state response b(x):
      constant               rate * level_param
      linear_mean_reversion  rate * (level_param - x)
      tanh_saturating        rate * tanh(level_param - x)
      cubic_damped           -rate * u^3 / (1 + u^2), u = x - level_param
    The forcing term amplitude * sin(2*pi*frequency*t + phase) is added
    on top; amplitude 0 turns it off.
    """

    kind: str
    level_param: float
    rate: float
    forcing_amplitude: float = 0.0
    forcing_frequency: float = 1.0
    forcing_phase: float = 0.0

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise InvalidParameter(f"unknown drift kind {self.kind!r}")
        object.__setattr__(self, "level_param", _finite_scalar(self.level_param, "level_param"))
        rate = _finite_scalar(self.rate, "rate")
        if rate < 0:
            raise InvalidParameter(f"rate must be >= 0, got {rate}")
        object.__setattr__(self, "rate", rate)
        amp = _finite_scalar(self.forcing_amplitude, "forcing_amplitude")
        if amp < 0:
            raise InvalidParameter(f"forcing_amplitude must be >= 0, got {amp}")
        object.__setattr__(self, "forcing_amplitude", amp)
        freq = _finite_scalar(self.forcing_frequency, "forcing_frequency")
        if not freq > 0:
            raise InvalidParameter(f"forcing_frequency must be > 0, got {freq}")
        object.__setattr__(self, "forcing_frequency", freq)
        phase = _finite_scalar(self.forcing_phase, "forcing_phase")
        if not 0.0 <= phase < TWO_PI:
            raise InvalidParameter(f"forcing_phase must lie in [0, 2*pi), got {phase}")
        object.__setattr__(self, "forcing_phase", phase)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """Correlated diffusion: vol_i(x) = base_vol_i * (1 + state_scale_i * |x_i|).

    base_vol may be zero only for systems whose level carries no diffusion
    term at all; validate_spec enforces the level rule.
    """

    base_vol: np.ndarray
    state_scale: np.ndarray
    correlation: CorrelationMatrix
    chol: CholeskyFactor

    def __post_init__(self):
        vol = _finite_vector(self.base_vol, "base_vol")
        if np.any(vol < 0):
            raise InvalidParameter("base_vol entries must be >= 0")
        scale = _finite_vector(self.state_scale, "state_scale", vol.shape[0])
        if np.any(scale < 0):
            raise InvalidParameter("state_scale entries must be >= 0")
        if not isinstance(self.correlation, CorrelationMatrix):
            raise InvalidParameter("correlation must be a CorrelationMatrix")
        if not isinstance(self.chol, CholeskyFactor):
            raise InvalidParameter("chol must be a CholeskyFactor")
        if self.correlation.dim != vol.shape[0] or self.chol.dim != vol.shape[0]:
            raise DimensionMismatch(
                f"diffusion pieces disagree on dimension: base_vol {vol.shape[0]}, "
                f"correlation {self.correlation.dim}, chol {self.chol.dim}"
            )
        object.__setattr__(self, "base_vol", vol)
        object.__setattr__(self, "state_scale", scale)

    @property
    def dim(self) -> int:
        return self.base_vol.shape[0]


@dataclass(frozen=True, eq=False)
class JumpSpec:
    """Compound Poisson jumps with Gaussian sizes and optional common timing.

    With probability common_jump_prob a step uses one shared uniform to
    thin all dimensions' jump indicators, producing joint tail events;
    otherwise each dimension thins independently.
    """

    enabled: bool
    intensity: np.ndarray
    jump_mean: np.ndarray
    jump_std: np.ndarray
    common_jump_prob: float

    def __post_init__(self):
        object.__setattr__(self, "enabled", bool(self.enabled))
        inten = _finite_vector(self.intensity, "intensity")
        if np.any(inten < 0):
            raise InvalidParameter("jump intensity entries must be >= 0")
        if not self.enabled and np.any(inten != 0):
            raise InvalidParameter("disabled jumps require all intensities to be 0")
        mean = _finite_vector(self.jump_mean, "jump_mean", inten.shape[0])
        std = _finite_vector(self.jump_std, "jump_std", inten.shape[0])
        if np.any(std < 0):
            raise InvalidParameter("jump_std entries must be >= 0")
        p = _finite_scalar(self.common_jump_prob, "common_jump_prob")
        if not 0.0 <= p <= 1.0:
            raise InvalidParameter(f"common_jump_prob must lie in [0, 1], got {p}")
        object.__setattr__(self, "intensity", inten)
        object.__setattr__(self, "jump_mean", mean)
        object.__setattr__(self, "jump_std", std)
        object.__setattr__(self, "common_jump_prob", p)

    @staticmethod
    def disabled(dims: int) -> "JumpSpec":
        zeros = np.zeros(dims)
        return JumpSpec(False, zeros, zeros, zeros, 0.0)

    @property
    def dim(self) -> int:
        return self.intensity.shape[0]


@dataclass(frozen=True, eq=False)
class RegimeSpec:
    """Two-state regime chain adding a per-regime drift offset.

    telegraph switches at constant rates (telegraph_rates[r] is the rate
    of leaving regime r). logistic modulates one shared hazard by the
    state: lambda(x) = logistic_max_rate * sigmoid(slope . x + bias).
    Regimes shift drift only, never volatility.
    """

    enabled: bool
    mechanism: str
    n_regimes: int
    drift_offset: np.ndarray
    telegraph_rates: tuple[float, float]
    logistic_max_rate: float
    logistic_slope: np.ndarray
    logistic_bias: float

    def __post_init__(self):
        object.__setattr__(self, "enabled", bool(self.enabled))
        if self.mechanism not in REGIME_MECHANISMS:
            raise InvalidParameter(f"unknown regime mechanism {self.mechanism!r}")
        if self.n_regimes != 2:
            raise InvalidParameter(f"n_regimes is fixed at 2, got {self.n_regimes}")
        object.__setattr__(self, "n_regimes", 2)
        off = np.asarray(self.drift_offset, dtype=float)
        if off.ndim != 2 or off.shape[0] != 2:
            raise DimensionMismatch(f"drift_offset must have shape (2, D), got {off.shape}")
        if not np.all(np.isfinite(off)):
            raise InvalidParameter("drift_offset has non-finite entries")
        rates = tuple(_finite_scalar(r, "telegraph_rate") for r in self.telegraph_rates)
        if len(rates) != 2 or any(r <= 0 for r in rates):
            raise InvalidParameter(f"telegraph_rates must be two positive reals, got {rates}")
        max_rate = _finite_scalar(self.logistic_max_rate, "logistic_max_rate")
        if not max_rate > 0:
            raise InvalidParameter(f"logistic_max_rate must be > 0, got {max_rate}")
        slope = _finite_vector(self.logistic_slope, "logistic_slope", off.shape[1])
        bias = _finite_scalar(self.logistic_bias, "logistic_bias")
        object.__setattr__(self, "drift_offset", _frozen(off))
        object.__setattr__(self, "telegraph_rates", rates)
        object.__setattr__(self, "logistic_max_rate", max_rate)
        object.__setattr__(self, "logistic_slope", slope)
        object.__setattr__(self, "logistic_bias", bias)

    @staticmethod
    def disabled(dims: int) -> "RegimeSpec":
        return RegimeSpec(
            enabled=False,
            mechanism="telegraph",
            n_regimes=2,
            drift_offset=np.zeros((2, dims)),
            telegraph_rates=(1.0, 1.0),
            logistic_max_rate=1.0,
            logistic_slope=np.zeros(dims),
            logistic_bias=0.0,
        )

    @property
    def dim(self) -> int:
        return self.drift_offset.shape[1]


@dataclass(frozen=True, eq=False)
class SdeSystemSpec:
    """Everything the simulator needs for one system, D = n_features + n_targets."""

    n_features: int
    n_targets: int
    level: CurriculumLevel
    drift: tuple[DriftSpec, ...]
    diffusion: DiffusionSpec
    jumps: JumpSpec
    regimes: RegimeSpec
    init_state: np.ndarray

    def __post_init__(self):
        if not isinstance(self.n_features, (int, np.integer)) or self.n_features < 0:
            raise InvalidParameter(f"n_features must be an integer >= 0, got {self.n_features!r}")
        if not isinstance(self.n_targets, (int, np.integer)) or self.n_targets < 1:
            raise InvalidParameter(f"n_targets must be an integer >= 1, got {self.n_targets!r}")
        object.__setattr__(self, "n_features", int(self.n_features))
        object.__setattr__(self, "n_targets", int(self.n_targets))
        object.__setattr__(self, "level", as_level(self.level))
        drift = tuple(self.drift)
        if not all(isinstance(d, DriftSpec) for d in drift):
            raise InvalidParameter("drift must be a sequence of DriftSpec")
        object.__setattr__(self, "drift", drift)
        dims = self.n_features + self.n_targets
        if len(drift) != dims:
            raise DimensionMismatch(f"need {dims} DriftSpec entries, got {len(drift)}")
        for part, name in ((self.diffusion, "diffusion"), (self.jumps, "jumps"),
                           (self.regimes, "regimes")):
            if part.dim != dims:
                raise DimensionMismatch(f"{name} is {part.dim}-dimensional, spec needs {dims}")
        object.__setattr__(self, "init_state", _finite_vector(self.init_state, "init_state", dims))

    @property
    def dims(self) -> int:
        return self.n_features + self.n_targets


def validate_spec(spec: SdeSystemSpec) -> list[str]:
    """All level-consistency violations in ``spec``, empty when it is valid.

    Construction already guarantees shapes and finiteness; this checks the
    rules that tie dynamics to the curriculum level, plus positive
    definiteness with an independent eigen-solve.
    """
    out: list[str] = []
    level = int(spec.level)
    m, n = spec.n_features, spec.n_targets
    dims = spec.dims

    for i, d in enumerate(spec.drift):
        if level == 0 and d.kind not in LEVEL0_DRIFT_KINDS:
            out.append(f"drift[{i}].kind {d.kind!r} requires level >= 1")
        if level == 0 and d.forcing_amplitude > 0:
            out.append(f"drift[{i}] sinusoidal forcing requires level >= 1")

    vol = spec.diffusion.base_vol
    if level == 0:
        if np.any(vol != 0):
            out.append("diffusion.base_vol must be zero at level 0 (no diffusion term)")
        if np.any(spec.diffusion.state_scale != 0):
            out.append("diffusion.state_scale must be zero at level 0")
    else:
        if np.any(vol <= 0):
            out.append("diffusion.base_vol must be strictly positive at level >= 1")

    corr = spec.diffusion.correlation.entries
    w = np.linalg.eigvalsh(0.5 * (corr + corr.T))
    if float(w[0]) < PD_FLOOR * (1.0 - 1e-6):
        out.append("correlation not positive definite")
    if level <= 1 and float(np.abs(corr - np.eye(dims)).max()) > 1e-12:
        out.append("correlation must be identity at level <= 1")
    if level == 2 and m >= 1 and n >= 1:
        if float(np.abs(corr[:m, m:]).max(initial=0.0)) > 1e-12:
            out.append("cross-block correlation requires level >= 3")
    recon = spec.diffusion.chol.reconstruct()
    err = float(np.linalg.norm(recon - corr))
    if err > 1e-8 * max(float(np.linalg.norm(corr)), 1e-300):
        out.append("diffusion.chol does not factor diffusion.correlation")

    if spec.jumps.enabled and level < 5:
        out.append("jumps require level >= 5")
    if not spec.jumps.enabled and np.any(spec.jumps.intensity != 0):
        out.append("disabled jumps must carry zero intensity")

    if spec.regimes.enabled:
        if level < 6:
            out.append("regimes require level >= 6")
        if spec.regimes.mechanism == "logistic" and level < 7:
            out.append("logistic regime switching requires level >= 7")

    return out


# ---------------------------------------------------------------------------
# canonical JSON


def spec_to_dict(spec: SdeSystemSpec) -> dict:
    """Plain-python document with field names matching the dataclasses."""
    return {
        "n_features": spec.n_features,
        "n_targets": spec.n_targets,
        "level": int(spec.level),
        "drift": [
            {
                "kind": d.kind,
                "level_param": d.level_param,
                "rate": d.rate,
                "forcing_amplitude": d.forcing_amplitude,
                "forcing_frequency": d.forcing_frequency,
                "forcing_phase": d.forcing_phase,
            }
            for d in spec.drift
        ],
        "diffusion": {
            "base_vol": spec.diffusion.base_vol.tolist(),
            "state_scale": spec.diffusion.state_scale.tolist(),
            "correlation": spec.diffusion.correlation.entries.tolist(),
            "chol": spec.diffusion.chol.lower.tolist(),
        },
        "jumps": {
            "enabled": spec.jumps.enabled,
            "intensity": spec.jumps.intensity.tolist(),
            "jump_mean": spec.jumps.jump_mean.tolist(),
            "jump_std": spec.jumps.jump_std.tolist(),
            "common_jump_prob": spec.jumps.common_jump_prob,
        },
        "regimes": {
            "enabled": spec.regimes.enabled,
            "mechanism": spec.regimes.mechanism,
            "n_regimes": spec.regimes.n_regimes,
            "drift_offset": spec.regimes.drift_offset.tolist(),
            "telegraph_rates": list(spec.regimes.telegraph_rates),
            "logistic_max_rate": spec.regimes.logistic_max_rate,
            "logistic_slope": spec.regimes.logistic_slope.tolist(),
            "logistic_bias": spec.regimes.logistic_bias,
        },
        "init_state": spec.init_state.tolist(),
    }


def spec_from_dict(doc: dict) -> SdeSystemSpec:
    try:
        drift = tuple(
            DriftSpec(
                kind=d["kind"],
                level_param=d["level_param"],
                rate=d["rate"],
                forcing_amplitude=d["forcing_amplitude"],
                forcing_frequency=d["forcing_frequency"],
                forcing_phase=d["forcing_phase"],
            )
            for d in doc["drift"]
        )
        diffusion = DiffusionSpec(
            base_vol=doc["diffusion"]["base_vol"],
            state_scale=doc["diffusion"]["state_scale"],
            correlation=CorrelationMatrix(np.asarray(doc["diffusion"]["correlation"], float)),
            chol=CholeskyFactor(np.asarray(doc["diffusion"]["chol"], float)),
        )
        jumps = JumpSpec(
            enabled=doc["jumps"]["enabled"],
            intensity=doc["jumps"]["intensity"],
            jump_mean=doc["jumps"]["jump_mean"],
            jump_std=doc["jumps"]["jump_std"],
            common_jump_prob=doc["jumps"]["common_jump_prob"],
        )
        regimes = RegimeSpec(
            enabled=doc["regimes"]["enabled"],
            mechanism=doc["regimes"]["mechanism"],
            n_regimes=doc["regimes"]["n_regimes"],
            drift_offset=doc["regimes"]["drift_offset"],
            telegraph_rates=tuple(doc["regimes"]["telegraph_rates"]),
            logistic_max_rate=doc["regimes"]["logistic_max_rate"],
            logistic_slope=doc["regimes"]["logistic_slope"],
            logistic_bias=doc["regimes"]["logistic_bias"],
        )
        return SdeSystemSpec(
            n_features=doc["n_features"],
            n_targets=doc["n_targets"],
            level=CurriculumLevel(doc["level"]),
            drift=drift,
            diffusion=diffusion,
            jumps=jumps,
            regimes=regimes,
            init_state=doc["init_state"],
        )
    except KeyError as exc:
        raise InvalidParameter(f"spec document is missing field {exc.args[0]!r}") from None


def spec_to_json(spec: SdeSystemSpec) -> str:
    """Canonical JSON: sorted keys, no whitespace, shortest-round-trip floats."""
    return json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def spec_from_json(text: str | bytes) -> SdeSystemSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"spec document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidParameter("spec document must be a JSON object")
    return spec_from_dict(doc)
