"""Covariance estimation, SPD solves and band transforms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels
from .cube import HyperspectralCube

RIDGE_START = 1e-8
RIDGE_STOP = 1e-2
# smallest acceptable squared Cholesky pivot of the unit-diagonal matrix;
# below this the band is numerically a combination of earlier bands
PIVOT_FLOOR = 1e-12


class RidgeExhaustedError(ArithmeticError):
    """Covariance stayed singular at the largest allowed ridge."""


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Covariance ``K`` with a Cholesky factorization of ``K + ridge*I``.

    The factorization is kept in equilibrated form: ``K + ridge*I =
    D C D`` with ``D`` the diagonal of standard deviations and ``C = chol
    chol^T`` unit-diagonal. Solving through ``C`` makes results insensitive
    to per-band scale, which is the property the band-significance score
    relies on.
    """

    K: np.ndarray
    scale: np.ndarray
    chol: np.ndarray
    ridge_applied: float
    n: int
    degenerate: bool = False

    @property
    def bands(self) -> int:
        return self.K.shape[0]

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular ``F`` with ``F F^T = K + ridge_applied * I``."""
        return self.scale[:, None] * self.chol


def _try_cholesky(M: np.ndarray) -> Optional[tuple]:
    d = np.diag(M)
    if not np.all(d > 0):
        return None
    s = np.sqrt(d)
    C = M / s[:, None] / s[None, :]
    np.fill_diagonal(C, 1.0)
    try:
        Lc = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(Lc)) ** 2 < PIVOT_FLOOR:
        return None
    return s, Lc


def factorize(K: np.ndarray, n: int = 0) -> CovarianceModel:
    """Factor ``K``, adding a ridge only if the plain factorization fails.

    Ridge schedule: ``1e-8 * trace(K)/L``, times 10 per retry, up to
    ``1e-2 * trace(K)/L``. An all-zero ``K`` gets the largest ridge with
    unit scale and is marked degenerate.
    """
    K = np.asarray(K, dtype=np.float64)
    L = K.shape[0]
    got = _try_cholesky(K)
    if got is not None:
        return CovarianceModel(K, got[0], got[1], 0.0, n)
    tr = float(np.trace(K))
    degenerate = tr <= 0.0
    base = tr / L if not degenerate else 1.0
    k = 0 if not degenerate else 6
    eye = np.eye(L)
    while k <= 6:
        ridge = RIDGE_START * 10.0**k * base
        got = _try_cholesky(K + ridge * eye)
        if got is not None:
            return CovarianceModel(K, got[0], got[1], ridge, n, degenerate)
        k += 1
    raise RidgeExhaustedError(
        f"covariance not factorizable with ridge up to {RIDGE_STOP:g} * trace/L"
    )


def is_centered(cube: HyperspectralCube, rtol: float = 1e-8) -> bool:
    x = cube.data
    n = x.shape[1]
    means = x.sum(axis=1) / n
    norms = np.sqrt((x * x).sum(axis=1))
    return bool(np.all(np.abs(means) * np.sqrt(n) <= rtol * norms + 1e-300))


def covariance(centered: HyperspectralCube) -> CovarianceModel:
    """``K = R R^T / N`` of a mean-removed cube, factorized.

    Divides by N, not N - 1. The pixel sum runs over a block partition
    fixed by N, so the result does not depend on thread count.
    """
    if not is_centered(centered):
        raise ValueError("covariance() needs a centered cube; call centralize() first")
    n = centered.n_pixels
    K = _kernels.covariance_sum(centered.data) / n
    return factorize(K, n)


def spd_solve(model: CovarianceModel, b) -> np.ndarray:
    """Solve ``(K + ridge*I) x = b``; ``b`` may be a vector or an (L, k) block."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != model.bands:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, model has {model.bands} bands")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite values")
    s = model.scale if b.ndim == 1 else model.scale[:, None]
    z = cho_solve((model.chol, True), b / s, check_finite=False)
    return z / s


@dataclass(frozen=True, eq=False)
class BandTransform:
    """Linear band transform: a positive diagonal, or a full invertible matrix."""

    diagonal: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.diagonal is None) == (self.matrix is None):
            raise ValueError("give exactly one of diagonal= or matrix=")
        if self.diagonal is not None:
            d = np.asarray(self.diagonal, dtype=np.float64).ravel()
            if not np.all(np.isfinite(d)) or not np.all(d > 0):
                raise ValueError("diagonal transform entries must be finite and > 0")
            object.__setattr__(self, "diagonal", d)
        else:
            A = np.asarray(self.matrix, dtype=np.float64)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError("transform matrix must be square")
            cond = np.linalg.cond(A)
            if not np.isfinite(cond) or cond * np.finfo(float).eps >= 1.0:
                raise ValueError(f"transform matrix is singular (condition {cond:.3g})")
            object.__setattr__(self, "matrix", A)

    @property
    def size(self) -> int:
        return self.diagonal.size if self.diagonal is not None else self.matrix.shape[0]

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diagonal) if self.diagonal is not None else self.matrix


def apply_band_transform(cube: HyperspectralCube, t: BandTransform) -> HyperspectralCube:
    if t.size != cube.bands:
        raise ValueError(f"transform of size {t.size} for a {cube.bands}-band cube")
    if t.diagonal is not None:
        return cube.with_data(cube.data * t.diagonal[:, None])
    return cube.with_data(t.matrix @ cube.data)
