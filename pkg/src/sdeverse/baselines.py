"""Classical forecasters fitted to the observed history only.

Both baselines see a PathMatrix and nothing else. They work on first
differences of the path (synthetic states are signed, so log-returns are
not defined) and produce SampleSets shaped like the oracle's branches,
cumulated from the history's terminal state.

The GARCH and correlation stages are Gaussian quasi-MLE with parameter
transforms enforcing the stationarity constraints, Nelder-Mead from a
few standard starts, best likelihood winning among the starts. The
winner is then kept only if it beats the variance-targeted constant
null by the BIC margin for its two extra parameters; on data with no
volatility clustering the likelihood surface is flat in the persistence
direction, and without that gate the fit lands wherever the simplex
stalled on the ridge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import expit, logit

from .errors import (DegenerateHistory, DimensionMismatch, FitFailed,
                     InvalidParameter)
from .linalg import PD_FLOOR, CorrelationMatrix, nearest_pd_repair
from .rng import RngStream, as_generator, derive_stream
from .simulate import PathMatrix, SampleSet

VARIANCE_FLOOR = 1e-12

_GARCH_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.02, 0.95))
_MAX_PERSIST = 1.0 - 1e-6
# candidates within this log-likelihood of the best tie-break toward
# smaller persistence
_TIE_TOL = 1e-7


@dataclass(frozen=True)
class Garch11Params:
    """GARCH(1,1) on increments: h_t = omega + alpha e_{t-1}^2 + beta h_{t-1}."""

    omega: float
    alpha: float
    beta: float
    mean: float

    def __post_init__(self):
        for name in ("omega", "alpha", "beta", "mean"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if not self.omega > 0:
            raise InvalidParameter(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameter("alpha and beta must be >= 0")
        if not self.alpha + self.beta < 1:
            raise InvalidParameter(
                f"alpha + beta must be < 1, got {self.alpha + self.beta}"
            )

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


@dataclass(frozen=True, eq=False)
class DccParams:
    """Two-stage DCC: per-series GARCH plus the (a, b) correlation recursion.

    series_status / corr_status record which stages fell back to the
    constant null after a failed fit ("ok" or "fallback").
    """

    a: float
    b: float
    unconditional_corr: CorrelationMatrix
    per_series: tuple[Garch11Params, ...]
    series_status: tuple[str, ...] = ()
    corr_status: str = "ok"

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise InvalidParameter("a and b must be finite and >= 0")
        if not a + b < 1:
            raise InvalidParameter(f"a + b must be < 1, got {a + b}")
        if not isinstance(self.unconditional_corr, CorrelationMatrix):
            raise InvalidParameter("unconditional_corr must be a CorrelationMatrix")
        per = tuple(self.per_series)
        if len(per) != self.unconditional_corr.dim:
            raise DimensionMismatch(
                f"need {self.unconditional_corr.dim} per-series fits, got {len(per)}"
            )
        if not all(isinstance(p, Garch11Params) for p in per):
            raise InvalidParameter("per_series must hold Garch11Params")
        status = tuple(self.series_status) or ("ok",) * len(per)
        if len(status) != len(per) or any(s not in ("ok", "fallback") for s in status):
            raise InvalidParameter("series_status must be 'ok'/'fallback' per series")
        if self.corr_status not in ("ok", "fallback"):
            raise InvalidParameter("corr_status must be 'ok' or 'fallback'")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "per_series", per)
        object.__setattr__(self, "series_status", status)

    @property
    def dims(self) -> int:
        return self.unconditional_corr.dim

    @property
    def any_fallback(self) -> bool:
        return self.corr_status == "fallback" or "fallback" in self.series_status


def dcc_to_dict(p: DccParams) -> dict:
    """Canonical document with a fit-status flag per series."""
    return {
        "a": p.a,
        "b": p.b,
        "unconditional_corr": p.unconditional_corr.entries.tolist(),
        "per_series": [
            {"omega": g.omega, "alpha": g.alpha, "beta": g.beta, "mean": g.mean,
             "status": s}
            for g, s in zip(p.per_series, p.series_status)
        ],
        "corr_status": p.corr_status,
    }


# ---------------------------------------------------------------------------
# historical simulation


def historical_simulation(history: PathMatrix, n_paths: int, horizon: int,
                          rng: RngStream) -> SampleSet:
    """Joint bootstrap of increment rows, cumulated from the terminal state.

    Each forecast step draws one full row of first differences uniformly
    with replacement, keeping the cross-sectional dependence intact.
    """
    if not isinstance(history, PathMatrix):
        raise InvalidParameter("history must be a PathMatrix")
    if history.n_steps < 2:
        raise DegenerateHistory(
            f"need at least 2 history steps to difference, got {history.n_steps}"
        )
    if not isinstance(n_paths, (int, np.integer)) or n_paths < 1:
        raise InvalidParameter(f"n_paths must be an integer >= 1, got {n_paths!r}")
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise InvalidParameter(f"horizon must be an integer >= 1, got {horizon!r}")
    diffs = np.diff(history.values, axis=0)
    g = as_generator(rng)
    idx = g.integers(0, diffs.shape[0], size=(int(n_paths), int(horizon)))
    steps = diffs[idx]
    values = history.terminal_state + np.cumsum(steps, axis=1)
    return SampleSet(values=values, dt=history.dt)


# ---------------------------------------------------------------------------
# GARCH(1,1)


def _garch_nll(eps2: np.ndarray, var0: float, omega: float, alpha: float,
               beta: float) -> float:
    h = _garch_filter_from_eps2(eps2, var0, omega, alpha, beta)
    if not np.all(np.isfinite(h)):
        return 1e100
    return float(0.5 * np.sum(np.log(h) + eps2 / h))


def _garch_filter_from_eps2(eps2: np.ndarray, var0: float, omega: float,
                            alpha: float, beta: float) -> np.ndarray:
    drive = omega + alpha * eps2[:-1]
    rest, _ = lfilter([1.0], [1.0, -beta], drive, zi=np.array([beta * var0]))
    h = np.concatenate(([var0], rest))
    return np.maximum(h, VARIANCE_FLOOR)


def garch_variance_path(series, params: Garch11Params) -> np.ndarray:
    """Conditional variance at each observation, seeded at the sample variance."""
    eps = np.asarray(series, dtype=float) - params.mean
    var0 = max(float(np.var(eps)), VARIANCE_FLOOR)
    return _garch_filter_from_eps2(eps * eps, var0, params.omega, params.alpha,
                                   params.beta)


def _unpack_garch(theta: np.ndarray) -> tuple[float, float, float]:
    omega = math.exp(theta[0])
    persist = expit(theta[1]) * _MAX_PERSIST
    frac = expit(theta[2])
    return omega, persist * frac, persist * (1.0 - frac)


def fit_garch11(series) -> Garch11Params:
    """Gaussian quasi-MLE of GARCH(1,1) on the series as given.

    Callers hand in first differences of a path; the estimator does not
    difference again. Raises FitFailed on degenerate input or when no
    start produces usable parameters; callers are expected to fall back
    to ``garch_constant_fallback`` and flag it.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.shape[0] < 50:
        raise DegenerateHistory(f"need at least 50 observations, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameter("series has non-finite entries")
    mean = float(x.mean())
    eps = x - mean
    var0 = float(np.var(eps))
    if var0 <= VARIANCE_FLOOR:
        raise FitFailed("series is (numerically) constant")
    eps2 = eps * eps

    def objective(theta):
        omega, alpha, beta = _unpack_garch(theta)
        if not np.all(np.isfinite(theta)):
            return 1e100
        return _garch_nll(eps2, var0, omega, alpha, beta)

    candidates: list[tuple[float, tuple[float, float, float]]] = []
    for alpha0, beta0 in _GARCH_STARTS:
        persist0 = alpha0 + beta0
        omega0 = max(var0 * (1.0 - persist0), VARIANCE_FLOOR)
        theta0 = np.array([
            math.log(omega0),
            logit(min(persist0 / _MAX_PERSIST, 1.0 - 1e-9)),
            logit(alpha0 / persist0),
        ])
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": 2000, "xatol": 1e-8, "fatol": 1e-10})
        if not np.all(np.isfinite(res.x)):
            continue
        omega, alpha, beta = _unpack_garch(res.x)
        nll = objective(res.x)
        if math.isfinite(nll) and nll < 1e99:
            candidates.append((nll, (omega, alpha, beta)))
    null_nll = _garch_nll(eps2, var0, var0, 0.0, 0.0)
    if not candidates:
        if not math.isfinite(null_nll) or null_nll >= 1e99:
            raise FitFailed("no GARCH start produced a finite likelihood")
        return Garch11Params(omega=var0, alpha=0.0, beta=0.0, mean=mean)
    best_nll = min(nll for nll, _ in candidates)
    tied = [p for nll, p in candidates if nll <= best_nll + _TIE_TOL]
    omega, alpha, beta = min(tied, key=lambda p: p[1] + p[2])
    # (alpha, beta) must buy at least their BIC cost over the constant null
    if best_nll > null_nll - math.log(x.shape[0]):
        return Garch11Params(omega=var0, alpha=0.0, beta=0.0, mean=mean)
    if not (omega > 0 and alpha + beta < 1):
        raise FitFailed("optimum violates stationarity constraints")
    return Garch11Params(omega=omega, alpha=alpha, beta=beta, mean=mean)


def garch_constant_fallback(series) -> Garch11Params:
    """Constant-variance Gaussian stand-in used after FitFailed."""
    x = np.asarray(series, dtype=float).ravel()
    mean = float(x.mean()) if x.size else 0.0
    var = float(np.var(x - mean)) if x.size else 0.0
    return Garch11Params(omega=max(var, VARIANCE_FLOOR), alpha=0.0, beta=0.0,
                         mean=mean)


def _fit_garch_or_fallback(series) -> tuple[Garch11Params, str]:
    try:
        return fit_garch11(series), "ok"
    except FitFailed:
        return garch_constant_fallback(series), "fallback"


# ---------------------------------------------------------------------------
# DCC


def _dcc_q_path(z: np.ndarray, qbar: np.ndarray, a: float, b: float) -> np.ndarray:
    """Q_t recursion over all D*D channels at once; Q_0 = Q_bar."""
    t, d = z.shape
    outer = z[:, :, None] * z[:, None, :]
    drive = (1.0 - a - b) * qbar + a * outer[:-1]
    flat = drive.reshape(t - 1, d * d)
    zi = (b * qbar).reshape(1, d * d)
    rest, _ = lfilter([1.0], [1.0, -b], flat, axis=0, zi=zi)
    return np.concatenate((qbar[None], rest.reshape(t - 1, d, d)))


def _dcc_corr_path(q: np.ndarray) -> np.ndarray:
    diag = np.sqrt(np.einsum("tii->ti", q))
    return q / (diag[:, :, None] * diag[:, None, :])


def _dcc_nll(z: np.ndarray, qbar: np.ndarray, a: float, b: float) -> float:
    q = _dcc_q_path(z, qbar, a, b)
    diag = np.einsum("tii->ti", q)
    if np.any(diag <= 0) or not np.all(np.isfinite(q)):
        return 1e100
    r = _dcc_corr_path(q)
    sign, logdet = np.linalg.slogdet(r)
    if np.any(sign <= 0):
        return 1e100
    quad = np.einsum("ti,ti->t", z, np.linalg.solve(r, z[:, :, None])[:, :, 0])
    return float(0.5 * np.sum(logdet + quad - np.einsum("ti,ti->t", z, z)))


def fit_dcc(history: PathMatrix) -> DccParams:
    """Two-stage estimation with correlation targeting.

    Stage one fits GARCH(1,1) per dimension on the first differences
    (falling back per series when needed). Stage two standardizes the
    residuals, targets the unconditional correlation at their repaired
    sample correlation, and fits (a, b) by quasi-MLE, with the constant
    correlation null competing alongside the optimizer results.
    """
    if not isinstance(history, PathMatrix):
        raise InvalidParameter("history must be a PathMatrix")
    if history.dims < 2:
        raise InvalidParameter("DCC needs at least 2 dimensions")
    if history.n_steps < 51:
        raise DegenerateHistory(
            f"need at least 51 history steps (50 increments), got {history.n_steps}"
        )
    diffs = np.diff(history.values, axis=0)
    d = diffs.shape[1]
    fits, statuses = [], []
    for i in range(d):
        params, status = _fit_garch_or_fallback(diffs[:, i])
        fits.append(params)
        statuses.append(status)
    z = np.empty_like(diffs)
    for i, params in enumerate(fits):
        h = garch_variance_path(diffs[:, i], params)
        z[:, i] = (diffs[:, i] - params.mean) / np.sqrt(h)

    with np.errstate(invalid="ignore", divide="ignore"):
        sample_corr = np.corrcoef(z, rowvar=False)
    # a constant column yields NaNs; fall back to identity there
    if not np.all(np.isfinite(sample_corr)):
        sample_corr = np.where(np.isfinite(sample_corr), sample_corr, 0.0)
        np.fill_diagonal(sample_corr, 1.0)
    qbar = nearest_pd_repair(0.5 * (sample_corr + sample_corr.T), PD_FLOOR)
    uncond = CorrelationMatrix(qbar)

    def objective(theta):
        if not np.all(np.isfinite(theta)):
            return 1e100
        persist = expit(theta[0]) * _MAX_PERSIST
        frac = expit(theta[1])
        return _dcc_nll(z, qbar, persist * frac, persist * (1.0 - frac))

    corr_status = "ok"
    null_nll = _dcc_nll(z, qbar, 0.0, 0.0)
    candidates: list[tuple[float, tuple[float, float]]] = []
    for a0, b0 in _GARCH_STARTS:
        persist0 = a0 + b0
        theta0 = np.array([
            logit(min(persist0 / _MAX_PERSIST, 1.0 - 1e-9)),
            logit(a0 / persist0),
        ])
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": 1000, "xatol": 1e-8, "fatol": 1e-10})
        if not np.all(np.isfinite(res.x)):
            continue
        persist = expit(res.x[0]) * _MAX_PERSIST
        frac = expit(res.x[1])
        nll = objective(res.x)
        if math.isfinite(nll) and nll < 1e99:
            candidates.append((nll, (persist * frac, persist * (1.0 - frac))))
    finite = [c for c in candidates if math.isfinite(c[0]) and c[0] < 1e99]
    if not finite:
        a_hat, b_hat = 0.0, 0.0
        if not (math.isfinite(null_nll) and null_nll < 1e99):
            corr_status = "fallback"
    else:
        best_nll = min(nll for nll, _ in finite)
        tied = [p for nll, p in finite if nll <= best_nll + _TIE_TOL]
        a_hat, b_hat = min(tied, key=lambda p: p[0] + p[1])
        # same BIC gate as the univariate stage
        if best_nll > null_nll - math.log(z.shape[0]):
            a_hat, b_hat = 0.0, 0.0
    return DccParams(a=a_hat, b=b_hat, unconditional_corr=uncond,
                     per_series=tuple(fits), series_status=tuple(statuses),
                     corr_status=corr_status)


def dcc_forecast(params: DccParams, history: PathMatrix, n_paths: int,
                 horizon: int, rng: RngStream) -> SampleSet:
    """Simulate joint GARCH + DCC paths forward from the history's end.

    Each path draws from its own derived stream (path index is the
    label), so the result does not depend on evaluation order.
    """
    if not isinstance(params, DccParams):
        raise InvalidParameter("params must be DccParams")
    if not isinstance(history, PathMatrix):
        raise InvalidParameter("history must be a PathMatrix")
    if history.dims != params.dims:
        raise DimensionMismatch(
            f"history is {history.dims}-dimensional, params expect {params.dims}"
        )
    if history.n_steps < 2:
        raise DegenerateHistory("need at least 2 history steps")
    if not isinstance(n_paths, (int, np.integer)) or n_paths < 1:
        raise InvalidParameter(f"n_paths must be an integer >= 1, got {n_paths!r}")
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise InvalidParameter(f"horizon must be an integer >= 1, got {horizon!r}")
    s, h_steps, d = int(n_paths), int(horizon), params.dims

    diffs = np.diff(history.values, axis=0)
    means = np.array([p.mean for p in params.per_series])
    omega = np.array([p.omega for p in params.per_series])
    alpha = np.array([p.alpha for p in params.per_series])
    beta = np.array([p.beta for p in params.per_series])
    qbar = params.unconditional_corr.entries

    z_hist = np.empty_like(diffs)
    h_next = np.empty(d)
    for i, p in enumerate(params.per_series):
        h_path = garch_variance_path(diffs[:, i], p)
        z_hist[:, i] = (diffs[:, i] - p.mean) / np.sqrt(h_path)
        h_next[i] = max(p.omega + p.alpha * (diffs[-1, i] - p.mean) ** 2
                        + p.beta * h_path[-1], VARIANCE_FLOOR)
    q_hist = _dcc_q_path(z_hist, qbar, params.a, params.b)
    q_next = ((1.0 - params.a - params.b) * qbar
              + params.a * np.outer(z_hist[-1], z_hist[-1])
              + params.b * q_hist[-1])

    shocks = np.stack([
        derive_stream(rng, i).generator().standard_normal((h_steps, d))
        for i in range(s)
    ])

    h_cur = np.broadcast_to(h_next, (s, d)).copy()
    q_cur = np.broadcast_to(q_next, (s, d, d)).copy()
    values = np.empty((s, h_steps, d))
    level = np.broadcast_to(history.terminal_state, (s, d)).copy()
    for k in range(h_steps):
        diag = np.sqrt(np.einsum("sii->si", q_cur))
        r_cur = q_cur / (diag[:, :, None] * diag[:, None, :])
        lower = _batched_chol(r_cur)
        e = np.einsum("sij,sj->si", lower, shocks[:, k, :])
        innov = np.sqrt(h_cur) * e
        level = level + means + innov
        values[:, k, :] = level
        h_cur = np.maximum(omega + alpha * innov * innov + beta * h_cur,
                           VARIANCE_FLOOR)
        q_cur = ((1.0 - params.a - params.b) * qbar
                 + params.a * e[:, :, None] * e[:, None, :]
                 + params.b * q_cur)
    return SampleSet(values=values, dt=history.dt)


def _batched_chol(mats: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        # roundoff can push a near-singular R over the edge; nudge and retry
        bump = 1e-10 * np.eye(mats.shape[-1])
        return np.linalg.cholesky(mats + bump)
