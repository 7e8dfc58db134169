"""Euler time stepping for the jump-diffusion with regime-shifted drift.

One step, in fixed order: update the regime from its hazard, evaluate
drift (state response, sinusoidal forcing, regime offset), add correlated
diffusion scaled by sqrt(dt), then thin at most one Gaussian jump per
dimension. The order is part of the contract; reproducibility depends on
it as much as on the stream labels.

Per path and per step the draws always come in the same sequence:
regime uniform, diffusion normals, jump coupling uniform, shared jump
uniform, per-dimension jump uniforms, jump size normals. Disabled blocks
are skipped entirely, never burned.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, InvalidParameter, NonFiniteState
from .rng import RngStream, as_generator, derive_stream
from .systems import TWO_PI, SdeSystemSpec

STATE_CLAMP = 1e6

_KIND_CODE = {"constant": 0, "linear_mean_reversion": 1, "tanh_saturating": 2,
              "cubic_damped": 3}


@dataclass(frozen=True, eq=False)
class PathMatrix:
    """One realized trajectory; row k is the state after k+1 steps.

    The starting state itself is not stored, so the rows of an n-step
    simulation sit at times dt, 2*dt, ..., n*dt and span dt*(n_steps - 1).
    regime_trace is None exactly when the system has no regime chain;
    entry k is the regime in force during step k+1.
    """

    values: np.ndarray
    dt: float
    regime_trace: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionMismatch(f"values must be (T, D) with T, D >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteState("path contains non-finite values")
        dt = float(self.dt)
        if not (dt > 0 and math.isfinite(dt)):
            raise InvalidParameter(f"dt must be positive and finite, got {self.dt}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dt", dt)
        if self.regime_trace is not None:
            tr = np.asarray(self.regime_trace)
            if tr.shape != (v.shape[0],):
                raise DimensionMismatch(
                    f"regime_trace must have shape ({v.shape[0]},), got {tr.shape}"
                )
            if not np.isin(tr, (0, 1)).all():
                raise InvalidParameter("regime_trace entries must be 0 or 1")
            tr = tr.astype(np.int64)
            tr.setflags(write=False)
            object.__setattr__(self, "regime_trace", tr)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    @property
    def terminal_state(self) -> np.ndarray:
        return self.values[-1]

    @property
    def terminal_regime(self) -> int:
        return 0 if self.regime_trace is None else int(self.regime_trace[-1])


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Branched futures: values[s, k] is path s after k+1 steps off the origin."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or min(v.shape) < 1:
            raise DimensionMismatch(f"values must be (S, H, D), all >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteState("sample set contains non-finite values")
        dt = float(self.dt)
        if not (dt > 0 and math.isfinite(dt)):
            raise InvalidParameter(f"dt must be positive and finite, got {self.dt}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dt", dt)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> int:
        return self.values.shape[2]


class _Kernel:
    """Arrays the step loop needs, precomputed once per spec."""

    __slots__ = (
        "dims", "kind_groups", "level_param", "rate", "amp", "freq", "phase",
        "any_forcing", "diffusion_on", "base_vol", "state_scale", "any_state_scale",
        "chol_lower", "identity_chol", "jumps_on", "intensity", "jump_mean",
        "jump_std", "common_jump_prob", "regimes_on", "logistic_mech",
        "telegraph_rates", "logistic_max_rate", "logistic_slope", "logistic_bias",
        "drift_offset", "__weakref__",
    )

    def __init__(self, spec: SdeSystemSpec):
        d = spec.dims
        self.dims = d
        codes = np.array([_KIND_CODE[dr.kind] for dr in spec.drift])
        self.kind_groups = [
            (code, np.flatnonzero(codes == code)) for code in sorted(set(codes.tolist()))
        ]
        self.level_param = np.array([dr.level_param for dr in spec.drift])
        self.rate = np.array([dr.rate for dr in spec.drift])
        self.amp = np.array([dr.forcing_amplitude for dr in spec.drift])
        self.freq = np.array([dr.forcing_frequency for dr in spec.drift])
        self.phase = np.array([dr.forcing_phase for dr in spec.drift])
        self.any_forcing = bool(np.any(self.amp > 0))
        self.base_vol = spec.diffusion.base_vol
        self.state_scale = spec.diffusion.state_scale
        self.diffusion_on = bool(np.any(self.base_vol > 0))
        self.any_state_scale = bool(np.any(self.state_scale > 0))
        self.chol_lower = spec.diffusion.chol.lower
        self.identity_chol = bool(np.array_equal(self.chol_lower, np.eye(d)))
        self.jumps_on = spec.jumps.enabled
        self.intensity = spec.jumps.intensity
        self.jump_mean = spec.jumps.jump_mean
        self.jump_std = spec.jumps.jump_std
        self.common_jump_prob = spec.jumps.common_jump_prob
        self.regimes_on = spec.regimes.enabled
        self.logistic_mech = spec.regimes.mechanism == "logistic"
        self.telegraph_rates = np.array(spec.regimes.telegraph_rates)
        self.logistic_max_rate = spec.regimes.logistic_max_rate
        self.logistic_slope = spec.regimes.logistic_slope
        self.logistic_bias = spec.regimes.logistic_bias
        self.drift_offset = spec.regimes.drift_offset


_kernel_cache: "weakref.WeakKeyDictionary[SdeSystemSpec, _Kernel]" = weakref.WeakKeyDictionary()


def _kernel_for(spec: SdeSystemSpec) -> _Kernel:
    kern = _kernel_cache.get(spec)
    if kern is None:
        kern = _Kernel(spec)
        _kernel_cache[spec] = kern
    return kern


_DRAW_KEYS = ("regime_u", "z", "couple_u", "shared_u", "dim_u", "size_z")


def _draw_block(kern: _Kernel, g: np.random.Generator, n_steps: int) -> dict:
    """All randomness for one path over ``n_steps`` steps, fixed layout."""
    d = kern.dims
    out = dict.fromkeys(_DRAW_KEYS)
    if kern.regimes_on:
        out["regime_u"] = g.random(n_steps)
    if kern.diffusion_on:
        out["z"] = g.standard_normal((n_steps, d))
    if kern.jumps_on:
        out["couple_u"] = g.random(n_steps)
        out["shared_u"] = g.random(n_steps)
        out["dim_u"] = g.random((n_steps, d))
        out["size_z"] = g.standard_normal((n_steps, d))
    return out


def _single_path(draws: dict) -> dict:
    """Give a one-path block the leading path axis the step kernel expects."""
    return {key: (None if val is None else val[None]) for key, val in draws.items()}


def _advance(kern: _Kernel, t: float, x: np.ndarray, regimes: np.ndarray,
             dt: float, sqrt_dt: float, draws: dict, k: int):
    """One Euler step for all paths at once.

    x is (S, D), regimes (S,); every non-None draws entry carries a
    leading path axis, so entry [:, k] is step k for all paths.
    """
    if kern.regimes_on:
        if kern.logistic_mech:
            lam = kern.logistic_max_rate * expit(x @ kern.logistic_slope
                                                 + kern.logistic_bias)
        else:
            lam = kern.telegraph_rates[regimes]
        p_switch = -np.expm1(-lam * dt)
        regimes = np.where(draws["regime_u"][:, k] < p_switch, 1 - regimes, regimes)

    b = np.empty_like(x)
    for code, cols in kern.kind_groups:
        xi = x[:, cols]
        lp = kern.level_param[cols]
        rt = kern.rate[cols]
        if code == 0:
            b[:, cols] = rt * lp
        elif code == 1:
            b[:, cols] = rt * (lp - xi)
        elif code == 2:
            b[:, cols] = rt * np.tanh(lp - xi)
        else:
            u = xi - lp
            b[:, cols] = -rt * u * u * u / (1.0 + u * u)
    if kern.any_forcing:
        b = b + kern.amp * np.sin(TWO_PI * kern.freq * t + kern.phase)
    if kern.regimes_on:
        b = b + kern.drift_offset[regimes]

    x_new = x + b * dt
    if kern.diffusion_on:
        z = draws["z"][:, k, :]
        eps = z if kern.identity_chol else z @ kern.chol_lower.T
        if kern.any_state_scale:
            vol = kern.base_vol * (1.0 + kern.state_scale * np.abs(x))
        else:
            vol = kern.base_vol
        x_new = x_new + vol * eps * sqrt_dt

    if kern.jumps_on:
        p_jump = -np.expm1(-kern.intensity * dt)
        shared = draws["shared_u"][:, k, None] < p_jump
        per_dim = draws["dim_u"][:, k, :] < p_jump
        use_shared = (draws["couple_u"][:, k] < kern.common_jump_prob)[:, None]
        indicator = np.where(use_shared, shared, per_dim)
        x_new = x_new + indicator * (kern.jump_mean
                                     + kern.jump_std * draws["size_z"][:, k, :])
    return x_new, regimes


def _check_state(x: np.ndarray, step: int, system_id: str | None = None) -> None:
    bad = ~np.isfinite(x) | (np.abs(x) > STATE_CLAMP)
    if bad.any():
        path = int(np.nonzero(bad.any(axis=1))[0][0])
        raise NonFiniteState(
            f"state left [-{STATE_CLAMP:.0e}, {STATE_CLAMP:.0e}] or went non-finite "
            f"at step {step}, path {path}",
            step=step, path=path, system_id=system_id,
        )


def em_step(spec: SdeSystemSpec, t: float, x, regime: int, dt: float, rng):
    """Single Euler update of one state vector; returns (new_state, new_regime).

    rng may be an RngStream (a fresh generator is materialized, so the
    call is pure) or a numpy Generator that keeps advancing across calls.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameter(f"dt must be positive and finite, got {dt}")
    kern = _kernel_for(spec)
    x = np.asarray(x, dtype=float)
    if x.shape != (kern.dims,):
        raise DimensionMismatch(f"state must have shape ({kern.dims},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameter("state has non-finite entries")
    if regime not in (0, 1):
        raise InvalidParameter(f"regime must be 0 or 1, got {regime}")
    g = as_generator(rng)
    draws = _single_path(_draw_block(kern, g, 1))
    x_new, regimes = _advance(kern, float(t), x[None, :], np.array([regime]),
                              dt, math.sqrt(dt), draws, 0)
    _check_state(x_new, step=0)
    return x_new[0], int(regimes[0])


def simulate_history(spec: SdeSystemSpec, n_steps: int, window: float,
                     rng: RngStream) -> PathMatrix:
    """Realize one history of ``n_steps`` steps over ``window`` time units.

    dt = window / n_steps. The path starts from spec.init_state in
    regime 0; the returned rows are the post-step states (the start
    itself is not a row).
    """
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 2:
        raise InvalidParameter(f"n_steps must be an integer >= 2, got {n_steps!r}")
    if not (window > 0 and math.isfinite(window)):
        raise InvalidParameter(f"window must be positive and finite, got {window}")
    n_steps = int(n_steps)
    dt = window / n_steps
    kern = _kernel_for(spec)
    g = as_generator(rng)
    draws = _single_path(_draw_block(kern, g, n_steps))
    x = spec.init_state[None, :]
    regimes = np.zeros(1, dtype=np.int64)
    values = np.empty((n_steps, kern.dims))
    trace = np.empty(n_steps, dtype=np.int64) if kern.regimes_on else None
    sqrt_dt = math.sqrt(dt)
    for k in range(n_steps):
        x, regimes = _advance(kern, k * dt, x, regimes, dt, sqrt_dt, draws, k)
        _check_state(x, step=k)
        values[k] = x[0]
        if trace is not None:
            trace[k] = regimes[0]
    return PathMatrix(values=values, dt=dt, regime_trace=trace)


def branch_futures(spec: SdeSystemSpec, origin_state, origin_regime: int,
                   origin_time: float, n_paths: int, horizon_steps: int,
                   window: float, rng: RngStream) -> SampleSet:
    """n_paths futures branching from one shared origin, dt = window / horizon_steps.

    Path i draws from derive_stream(rng, i), so the result is identical
    no matter how callers schedule the work.
    """
    if not isinstance(n_paths, (int, np.integer)) or n_paths < 1:
        raise InvalidParameter(f"n_paths must be an integer >= 1, got {n_paths!r}")
    if not isinstance(horizon_steps, (int, np.integer)) or horizon_steps < 1:
        raise InvalidParameter(f"horizon_steps must be an integer >= 1, got {horizon_steps!r}")
    if not (window > 0 and math.isfinite(window)):
        raise InvalidParameter(f"window must be positive and finite, got {window}")
    if origin_regime not in (0, 1):
        raise InvalidParameter(f"origin_regime must be 0 or 1, got {origin_regime}")
    n_paths, horizon_steps = int(n_paths), int(horizon_steps)
    kern = _kernel_for(spec)
    origin = np.asarray(origin_state, dtype=float)
    if origin.shape != (kern.dims,):
        raise DimensionMismatch(
            f"origin_state must have shape ({kern.dims},), got {origin.shape}"
        )
    if not np.all(np.isfinite(origin)):
        raise InvalidParameter("origin_state has non-finite entries")
    dt = window / horizon_steps
    sqrt_dt = math.sqrt(dt)

    # stack the per-path draw blocks; layout within a path never changes
    per_path = [_draw_block(kern, derive_stream(rng, i).generator(), horizon_steps)
                for i in range(n_paths)]
    draws = dict.fromkeys(_DRAW_KEYS)
    for key in draws:
        if per_path[0][key] is not None:
            draws[key] = np.stack([blk[key] for blk in per_path])
    del per_path

    x = np.broadcast_to(origin, (n_paths, kern.dims)).copy()
    regimes = np.full(n_paths, int(origin_regime), dtype=np.int64)
    values = np.empty((n_paths, horizon_steps, kern.dims))
    t0 = float(origin_time)
    for k in range(horizon_steps):
        x, regimes = _advance(kern, t0 + k * dt, x, regimes, dt, sqrt_dt, draws, k)
        _check_state(x, step=k)
        values[:, k, :] = x
    return SampleSet(values=values, dt=dt)
