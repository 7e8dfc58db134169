"""Mixture output heads: multivariate Gaussian and skewed Student-t.

These are the containers, samplers, and log-densities a forecaster needs
to express a cross-sectional distribution at one horizon. Fitting them is
someone else's job; the contract here is that parameters in, samples and
densities out, with the Cholesky factor as the only covariance encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp
from scipy.stats import t as student_t

from .errors import DimensionMismatch, InvalidParameter
from .rng import as_generator

_LOG_2PI = math.log(2.0 * math.pi)


def _as_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] < 1:
        raise InvalidParameter(f"weights must be a non-empty vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidParameter("weights must be finite and >= 0")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidParameter(f"weights must sum to 1 within 1e-9, got {w.sum()!r}")
    return w


def _as_chols(chols, k: int, name: str) -> np.ndarray:
    a = np.asarray(chols, dtype=float)
    if a.ndim != 3 or a.shape[0] != k or a.shape[1] != a.shape[2]:
        raise DimensionMismatch(f"{name} must be (K, D, D), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter(f"{name} has non-finite entries")
    for j in range(k):
        if float(np.abs(np.triu(a[j], 1)).max(initial=0.0)) != 0.0:
            raise InvalidParameter(f"{name}[{j}] must be lower-triangular")
        if not np.all(np.diag(a[j]) > 0):
            raise InvalidParameter(f"{name}[{j}] diagonal must be strictly positive")
    return a


def _freeze(*arrays):
    out = []
    for a in arrays:
        a = np.array(a, dtype=float, copy=True)
        a.setflags(write=False)
        out.append(a)
    return out


@dataclass(frozen=True, eq=False)
class GmmParams:
    """Gaussian mixture over one D-dimensional cross-section."""

    weights: np.ndarray
    means: np.ndarray
    scale_chols: np.ndarray

    def __post_init__(self):
        w = _as_weights(self.weights)
        k = w.shape[0]
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 2 or means.shape[0] != k:
            raise DimensionMismatch(f"means must be (K, D) with K={k}, got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise InvalidParameter("means has non-finite entries")
        chols = _as_chols(self.scale_chols, k, "scale_chols")
        if chols.shape[1] != means.shape[1]:
            raise DimensionMismatch("scale_chols dimension disagrees with means")
        w, means, chols = _freeze(w, means, chols)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scale_chols", chols)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dims(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True, eq=False)
class SkewTParams:
    """Mixture of skewed Student-t components (location, scale Cholesky, skew).

    dof is required to exceed 2 so every component has finite covariance.
    """

    weights: np.ndarray
    dof: np.ndarray
    locations: np.ndarray
    scale_chols: np.ndarray
    skews: np.ndarray

    def __post_init__(self):
        w = _as_weights(self.weights)
        k = w.shape[0]
        dof = np.asarray(self.dof, dtype=float)
        if dof.shape != (k,):
            raise DimensionMismatch(f"dof must have shape ({k},), got {dof.shape}")
        if not np.all(np.isfinite(dof)) or np.any(dof <= 2):
            raise InvalidParameter("dof entries must be finite and > 2")
        loc = np.asarray(self.locations, dtype=float)
        if loc.ndim != 2 or loc.shape[0] != k:
            raise DimensionMismatch(f"locations must be (K, D) with K={k}, got {loc.shape}")
        if not np.all(np.isfinite(loc)):
            raise InvalidParameter("locations has non-finite entries")
        chols = _as_chols(self.scale_chols, k, "scale_chols")
        skews = np.asarray(self.skews, dtype=float)
        if skews.shape != loc.shape:
            raise DimensionMismatch(f"skews must match locations shape, got {skews.shape}")
        if not np.all(np.isfinite(skews)):
            raise InvalidParameter("skews has non-finite entries")
        if chols.shape[1] != loc.shape[1]:
            raise DimensionMismatch("scale_chols dimension disagrees with locations")
        w, dof, loc, chols, skews = _freeze(w, dof, loc, chols, skews)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dof", dof)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "scale_chols", chols)
        object.__setattr__(self, "skews", skews)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dims(self) -> int:
        return self.locations.shape[1]


def _component_indices(weights: np.ndarray, n: int, g: np.random.Generator) -> np.ndarray:
    return g.choice(weights.shape[0], size=n, p=weights)


def gmm_sample(p: GmmParams, n: int, rng) -> np.ndarray:
    """n draws, component index first, then one normal block per draw."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameter(f"n must be an integer >= 1, got {n!r}")
    g = as_generator(rng)
    comp = _component_indices(p.weights, int(n), g)
    z = g.standard_normal((int(n), p.dims))
    return p.means[comp] + np.einsum("nij,nj->ni", p.scale_chols[comp], z)


def _gmm_component_logpdfs(p: GmmParams, x: np.ndarray) -> np.ndarray:
    """(K, n) log-densities of each component at each row of x."""
    k, d = p.n_components, p.dims
    out = np.empty((k, x.shape[0]))
    for j in range(k):
        lower = p.scale_chols[j]
        y = solve_triangular(lower, (x - p.means[j]).T, lower=True)
        quad = np.sum(y * y, axis=0)
        logdet = float(np.sum(np.log(np.diag(lower))))
        out[j] = -0.5 * (d * _LOG_2PI + quad) - logdet
    return out


def _as_points(x, dims: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != dims:
        raise DimensionMismatch(f"x must be ({dims},) or (n, {dims}), got {np.shape(x)}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter("x has non-finite entries")
    return a, single


def gmm_log_density(p: GmmParams, x) -> float | np.ndarray:
    """log sum_k w_k N(x; mean_k, L_k L_k'), stable via log-sum-exp.

    Accepts one point (D,) giving a float, or a batch (n, D) giving (n,).
    """
    pts, single = _as_points(x, p.dims)
    logpdf = _gmm_component_logpdfs(p, pts)
    with np.errstate(divide="ignore"):
        logw = np.log(p.weights)
    total = logsumexp(logpdf + logw[:, None], axis=0)
    return float(total[0]) if single else total


def _skew_delta(lower: np.ndarray, alpha: np.ndarray):
    """Correlation-scale pieces of one component: omega, corr, delta."""
    scale = lower @ lower.T
    omega = np.sqrt(np.diag(scale))
    corr = scale / np.outer(omega, omega)
    ca = corr @ alpha
    delta = ca / math.sqrt(1.0 + float(alpha @ ca))
    return omega, corr, delta


def skewt_sample(p: SkewTParams, n: int, rng) -> np.ndarray:
    """Draw via the conditioning representation of the skew-normal.

    Per draw: one (D+1)-dimensional normal with the augmented correlation
    [[1, delta'], [delta, corr]], sign-flip the last D coordinates when
    the first is negative, then divide by sqrt(chi2_nu / nu) and map
    through location and scale.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameter(f"n must be an integer >= 1, got {n!r}")
    g = as_generator(rng)
    n = int(n)
    d = p.dims
    comp = _component_indices(p.weights, n, g)
    out = np.empty((n, d))
    for j in range(p.n_components):
        rows = np.flatnonzero(comp == j)
        if rows.size == 0:
            continue
        omega, corr, delta = _skew_delta(p.scale_chols[j], p.skews[j])
        aug = np.empty((d + 1, d + 1))
        aug[0, 0] = 1.0
        aug[0, 1:] = delta
        aug[1:, 0] = delta
        aug[1:, 1:] = corr
        lower = _chol_with_jitter(aug)
        z = g.standard_normal((rows.size, d + 1)) @ lower.T
        z0 = z[:, 0]
        z1 = np.where(z0[:, None] < 0, -z[:, 1:], z[:, 1:])
        w = g.chisquare(p.dof[j], rows.size) / p.dof[j]
        out[rows] = p.locations[j] + omega * z1 / np.sqrt(w)[:, None]
    return out


def _chol_with_jitter(m: np.ndarray) -> np.ndarray:
    # the augmented matrix is PD in exact arithmetic; the jitter only
    # covers roundoff at extreme skews
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        bump = 1e-12 * max(1.0, float(np.trace(m)) / m.shape[0])
        return np.linalg.cholesky(m + bump * np.eye(m.shape[0]))


def _skewt_component_logpdfs(p: SkewTParams, x: np.ndarray) -> np.ndarray:
    """(K, n) log-densities: 2 t_D(x; loc, scale, nu) T_1(arg; nu + D)."""
    k, d = p.n_components, p.dims
    out = np.empty((k, x.shape[0]))
    for j in range(k):
        lower = p.scale_chols[j]
        nu = float(p.dof[j])
        centered = x - p.locations[j]
        y = solve_triangular(lower, centered.T, lower=True)
        quad = np.sum(y * y, axis=0)
        logdet = float(np.sum(np.log(np.diag(lower))))
        log_t = (
            gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
            - 0.5 * d * math.log(nu * math.pi) - logdet
            - 0.5 * (nu + d) * np.log1p(quad / nu)
        )
        omega = np.sqrt(np.diag(lower @ lower.T))
        std_resid = centered / omega
        arg = (std_resid @ p.skews[j]) * np.sqrt((nu + d) / (nu + quad))
        out[j] = math.log(2.0) + log_t + student_t.logcdf(arg, df=nu + d)
    return out


def skewt_log_density(p: SkewTParams, x) -> float | np.ndarray:
    """Log-density of the skew-t mixture at one point (D,) or a batch (n, D)."""
    pts, single = _as_points(x, p.dims)
    logpdf = _skewt_component_logpdfs(p, pts)
    with np.errstate(divide="ignore"):
        logw = np.log(p.weights)
    total = logsumexp(logpdf + logw[:, None], axis=0)
    return float(total[0]) if single else total


# canonical JSON for head parameters


def gmm_to_dict(p: GmmParams) -> dict:
    return {
        "weights": p.weights.tolist(),
        "means": p.means.tolist(),
        "scale_chols": p.scale_chols.tolist(),
    }


def gmm_from_dict(doc: dict) -> GmmParams:
    try:
        return GmmParams(doc["weights"], doc["means"], doc["scale_chols"])
    except KeyError as exc:
        raise InvalidParameter(f"GMM document is missing field {exc.args[0]!r}") from None


def skewt_to_dict(p: SkewTParams) -> dict:
    return {
        "weights": p.weights.tolist(),
        "dof": p.dof.tolist(),
        "locations": p.locations.tolist(),
        "scale_chols": p.scale_chols.tolist(),
        "skews": p.skews.tolist(),
    }


def skewt_from_dict(doc: dict) -> SkewTParams:
    try:
        return SkewTParams(doc["weights"], doc["dof"], doc["locations"],
                           doc["scale_chols"], doc["skews"])
    except KeyError as exc:
        raise InvalidParameter(f"skew-t document is missing field {exc.args[0]!r}") from None
