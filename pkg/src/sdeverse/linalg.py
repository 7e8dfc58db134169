"""Correlation matrices, Cholesky factors, and the PD repair used everywhere.

Floors and tolerances are fixed here once. PD_FLOOR is the smallest
eigenvalue any repaired or constructed correlation matrix may carry;
CHOL_TOL is the relative Frobenius error a Cholesky factor must meet
when reproducing its source matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NotPositiveDefinite
from .rng import RngStream, as_generator

PD_FLOOR = 1e-8
CHOL_TOL = 1e-10


def _as_square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidParameter(f"{name} must be square and non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParameter(f"{name} has non-finite entries")
    return a


def _check_symmetric(a: np.ndarray, name: str = "matrix", tol: float = 1e-9) -> None:
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > tol * scale:
        raise InvalidParameter(f"{name} is not symmetric")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric, unit-diagonal, positive definite with eigenvalues >= PD_FLOOR."""

    entries: np.ndarray

    def __post_init__(self):
        a = _as_square(self.entries, "correlation")
        _check_symmetric(a, "correlation")
        if float(np.abs(np.diag(a) - 1.0).max()) > 1e-9:
            raise InvalidParameter("correlation diagonal must be 1")
        w = np.linalg.eigvalsh(0.5 * (a + a.T))
        # small slack so a matrix repaired to exactly the floor re-validates
        if float(w[0]) < PD_FLOOR * (1.0 - 1e-6):
            raise NotPositiveDefinite(
                f"correlation min eigenvalue {w[0]:.3e} is below the floor {PD_FLOOR:.0e}"
            )
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @staticmethod
    def identity(dim: int) -> "CorrelationMatrix":
        if dim < 1:
            raise InvalidParameter(f"dim must be >= 1, got {dim}")
        return CorrelationMatrix(np.eye(dim))


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular factor L with strictly positive diagonal."""

    lower: np.ndarray

    def __post_init__(self):
        a = _as_square(self.lower, "cholesky factor")
        if float(np.abs(np.triu(a, 1)).max(initial=0.0)) != 0.0:
            raise InvalidParameter("cholesky factor must be lower-triangular")
        if not np.all(np.diag(a) > 0):
            raise InvalidParameter("cholesky factor diagonal must be strictly positive")
        object.__setattr__(self, "lower", _frozen(a))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(m) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefinite when a pivot fails or the factor cannot
    reproduce the input within CHOL_TOL relative Frobenius error.
    """
    a = _as_square(m)
    _check_symmetric(a)
    sym = 0.5 * (a + a.T)
    try:
        lower = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not positive definite") from None
    ref = float(np.linalg.norm(sym))
    err = float(np.linalg.norm(lower @ lower.T - sym))
    if err > CHOL_TOL * max(ref, 1e-300):
        raise NotPositiveDefinite(
            f"cholesky factor reproduces input to {err / max(ref, 1e-300):.2e} "
            f"relative error, worse than {CHOL_TOL:.0e}"
        )
    return CholeskyFactor(lower=lower)


def nearest_pd_repair(m, floor: float = PD_FLOOR) -> np.ndarray:
    """Clip eigenvalues up to ``floor``; keep unit diagonals unit.

    The unit-diagonal rescale can drag the smallest eigenvalue back under
    the floor, so the clip is iterated with an escalating target until an
    independent eigvalsh check clears it. Already-compliant input is
    returned unchanged (symmetrized only).
    """
    a = _as_square(m)
    _check_symmetric(a)
    if not (floor > 0 and math.isfinite(floor)):
        raise InvalidParameter(f"floor must be positive and finite, got {floor}")
    sym = 0.5 * (a + a.T)
    unit_diag = float(np.abs(np.diag(sym) - 1.0).max()) <= 1e-9
    if float(np.linalg.eigvalsh(sym)[0]) >= floor:
        return sym
    target = floor
    cur = sym
    for _ in range(60):
        w, v = np.linalg.eigh(cur)
        cur = (v * np.maximum(w, target)) @ v.T
        cur = 0.5 * (cur + cur.T)
        if unit_diag:
            d = np.sqrt(np.diag(cur))
            cur = cur / np.outer(d, d)
            np.fill_diagonal(cur, 1.0)
            cur = 0.5 * (cur + cur.T)
        if float(np.linalg.eigvalsh(cur)[0]) >= floor:
            return cur
        target *= 8.0
    raise NotPositiveDefinite("PD repair failed to reach the eigenvalue floor")


def sample_correlation(dim: int, strength: float, rng: RngStream) -> CorrelationMatrix:
    """Random correlation matrix with a dependence knob.

    Low-rank Gaussian loadings (rank max(1, ceil(dim/2))) plus diagonal
    noise give the raw dependence; the result is normalized to unit
    diagonal, blended toward the identity by (1 - strength), and repaired
    to the eigenvalue floor. strength near 0 is near independence,
    strength 1 keeps the raw structure.
    """
    if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool) or dim < 1:
        raise InvalidParameter(f"dim must be a positive integer, got {dim!r}")
    if not (0.0 < strength <= 1.0):
        raise InvalidParameter(f"strength must lie in (0, 1], got {strength}")
    dim = int(dim)
    if dim == 1:
        return CorrelationMatrix(np.ones((1, 1)))
    g = as_generator(rng)
    k = max(1, math.ceil(dim / 2))
    loadings = g.standard_normal((dim, k))
    noise = g.uniform(0.1, 1.0, size=dim)
    raw = loadings @ loadings.T + np.diag(noise)
    d = np.sqrt(np.diag(raw))
    raw = raw / np.outer(d, d)
    blended = strength * raw + (1.0 - strength) * np.eye(dim)
    np.fill_diagonal(blended, 1.0)
    blended = 0.5 * (blended + blended.T)
    return CorrelationMatrix(nearest_pd_repair(blended, PD_FLOOR))
