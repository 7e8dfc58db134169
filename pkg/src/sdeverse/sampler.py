"""Draws complete system specifications along the complexity ladder.

Mixing semantics: the dynamic a level introduces is always present in
systems sampled at that level; every optional dynamic unlocked earlier
joins with probability 1/2. Diffusion is the exception and is always on
from level 1 upward, since a system without any noise makes a degenerate
forecasting problem.

Parameter ranges (the generator's own choices, clamped hard):
  mean-reversion rate [0.1, 4.0], long-run levels [-2, 2],
  base_vol [0.05, 1.0], state_scale [0, 1],
  forcing amplitude [0, 0.5 * base_vol], forcing frequency [0.5, 8],
  jump intensity [0.5, 10], jump_mean [-0.5, 0.5], jump_std [0.02, 0.3],
  telegraph rates [0.5, 6], regime drift offsets [-1, 1],
  correlation strength [0.2, 0.95], init_state [-1, 1],
  logistic slope [-2, 2], logistic bias [-1, 1], logistic max rate [0.5, 6].
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidLevel, InvalidParameter
from .linalg import (PD_FLOOR, CholeskyFactor, CorrelationMatrix, cholesky,
                     nearest_pd_repair, sample_correlation)
from .rng import RngStream, derive_stream
from .systems import (DRIFT_KINDS, LEVEL0_DRIFT_KINDS, TWO_PI, CurriculumLevel,
                      DiffusionSpec, DriftSpec, JumpSpec, RegimeSpec,
                      SdeSystemSpec, as_level)

# child-stream labels under the sampler's stream
_PARAMS = 0
_CORRELATION = 1


def _clamped_uniform(g: np.random.Generator, lo: float, hi: float, size=None):
    return np.clip(g.uniform(lo, hi, size=size), lo, hi)


def sample_system(level, n_features: int, n_targets: int, rng: RngStream) -> SdeSystemSpec:
    """One system at the requested level; deterministic in (level, dims, rng).

    Scalar parameters and inclusion coins come from one child stream in
    source order; correlation matrices come from a second child so the
    scalar layout does not shift with the correlation mode.
    """
    lv = as_level(level)
    if not isinstance(n_features, (int, np.integer)) or n_features < 0:
        raise InvalidParameter(f"n_features must be an integer >= 0, got {n_features!r}")
    if not isinstance(n_targets, (int, np.integer)) or n_targets < 1:
        raise InvalidParameter(f"n_targets must be an integer >= 1, got {n_targets!r}")
    m, n = int(n_features), int(n_targets)
    dims = m + n
    L = int(lv)
    g = derive_stream(rng, _PARAMS).generator()
    corr_rng = derive_stream(rng, _CORRELATION)

    # diffusion scale first: forcing amplitudes are bounded by base_vol
    if L >= 1:
        base_vol = _clamped_uniform(g, 0.05, 1.0, dims)
        if g.uniform() < 0.5:
            state_scale = _clamped_uniform(g, 0.0, 1.0, dims)
        else:
            state_scale = np.zeros(dims)
    else:
        base_vol = np.zeros(dims)
        state_scale = np.zeros(dims)

    allow_nonlinear = L >= 1 and g.uniform() < 0.5
    include_forcing = L >= 1 and g.uniform() < 0.5
    pool = DRIFT_KINDS if allow_nonlinear else LEVEL0_DRIFT_KINDS
    drift = []
    for i in range(dims):
        kind = pool[int(g.integers(len(pool)))]
        level_param = float(_clamped_uniform(g, -2.0, 2.0))
        rate = float(_clamped_uniform(g, 0.1, 4.0))
        if include_forcing:
            amp = float(_clamped_uniform(g, 0.0, 0.5 * base_vol[i]))
            freq = float(_clamped_uniform(g, 0.5, 8.0))
            phase = min(float(g.uniform(0.0, TWO_PI)), np.nextafter(TWO_PI, 0.0))
        else:
            amp, freq, phase = 0.0, 1.0, 0.0
        drift.append(DriftSpec(kind, level_param, rate, amp, freq, phase))

    mode = _correlation_mode(L, g)
    strength = float(_clamped_uniform(g, 0.2, 0.95))
    correlation = _build_correlation(mode, m, n, strength, corr_rng)
    chol = cholesky(correlation.entries)
    diffusion = DiffusionSpec(base_vol, state_scale, correlation, chol)

    jumps_on = L == 5 or (L >= 6 and g.uniform() < 0.5)
    if jumps_on:
        jumps = JumpSpec(
            enabled=True,
            intensity=_clamped_uniform(g, 0.5, 10.0, dims),
            jump_mean=_clamped_uniform(g, -0.5, 0.5, dims),
            jump_std=_clamped_uniform(g, 0.02, 0.3, dims),
            common_jump_prob=float(g.uniform()),
        )
    else:
        jumps = JumpSpec.disabled(dims)

    if L >= 6:
        regimes = RegimeSpec(
            enabled=True,
            mechanism="logistic" if L >= 7 else "telegraph",
            n_regimes=2,
            drift_offset=_clamped_uniform(g, -1.0, 1.0, (2, dims)),
            telegraph_rates=(
                float(_clamped_uniform(g, 0.5, 6.0)),
                float(_clamped_uniform(g, 0.5, 6.0)),
            ),
            logistic_max_rate=float(_clamped_uniform(g, 0.5, 6.0)),
            logistic_slope=_clamped_uniform(g, -2.0, 2.0, dims),
            logistic_bias=float(_clamped_uniform(g, -1.0, 1.0)),
        )
    else:
        regimes = RegimeSpec.disabled(dims)

    init_state = _clamped_uniform(g, -1.0, 1.0, dims)

    return SdeSystemSpec(
        n_features=m,
        n_targets=n,
        level=lv,
        drift=tuple(drift),
        diffusion=diffusion,
        jumps=jumps,
        regimes=regimes,
        init_state=init_state,
    )


def _correlation_mode(L: int, g: np.random.Generator) -> str:
    """Structure ceiling by level; above level 4 the ladder is coin-mixed.

    The families nest (full implies cross-block implies intra-block), so
    walking the ladder from the top keeps every unlocked family present
    with probability >= 1/2.
    """
    if L <= 1:
        return "identity"
    if L == 2:
        return "block"
    if L == 3:
        return "cross"
    if L == 4:
        return "full"
    if g.uniform() < 0.5:
        return "full"
    if g.uniform() < 0.5:
        return "cross"
    if g.uniform() < 0.5:
        return "block"
    return "identity"


def _build_correlation(mode: str, m: int, n: int, strength: float,
                       rng: RngStream) -> CorrelationMatrix:
    dims = m + n
    if mode == "identity" or dims == 1:
        return CorrelationMatrix.identity(dims)
    if mode == "full":
        return sample_correlation(dims, strength, derive_stream(rng, 2))
    if m == 0 or n == 0:
        # a single block spans everything; block and cross coincide
        return sample_correlation(dims, strength, derive_stream(rng, 0))
    intra = np.eye(dims)
    intra[:m, :m] = sample_correlation(m, strength, derive_stream(rng, 0)).entries
    intra[m:, m:] = sample_correlation(n, strength, derive_stream(rng, 1)).entries
    if mode == "block":
        return CorrelationMatrix(intra)
    # cross: keep the intra blocks, take the off-block rectangle from a
    # full draw, then repair to the eigenvalue floor
    full = sample_correlation(dims, strength, derive_stream(rng, 2)).entries
    mixed = intra.copy()
    mixed[:m, m:] = full[:m, m:]
    mixed[m:, :m] = full[m:, :m]
    mixed = 0.5 * (mixed + mixed.T)
    return CorrelationMatrix(nearest_pd_repair(mixed, PD_FLOOR))
