"""Matched-filter detector and per-band significance of its weights.

For background mean ``m``, covariance ``K`` and target signature ``d`` the
detector is ``w = kappa * K^-1 (d - m)`` with
``kappa = 1 / ((d - m)^T K^-1 (d - m))``, so that ``w . (d - m) = 1``.

Raw weights scale inversely with their band: doubling band ``j`` halves
``w[j]``. The significance score therefore multiplies ``|w[j]|`` by the
norm of the mean-removed band ("norm-weighted", the default), which makes
it invariant to any per-band rescaling. ``|w[j]| / norm[j]`` is available
as "paper-literal" for comparison; it is not scale invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cube import BandStats, HyperspectralCube
from .linalg import CovarianceModel, spd_solve

NORM_WEIGHTED = "norm-weighted"
PAPER_LITERAL = "paper-literal"
CONVENTIONS = (NORM_WEIGHTED, PAPER_LITERAL)

DEGENERATE_RTOL = 1e-12


class DegenerateTargetError(ValueError):
    """Target signature coincides with the background mean."""


@dataclass(frozen=True, eq=False)
class MfDetector:
    weights: np.ndarray
    kappa: float
    target: np.ndarray
    mean: np.ndarray

    @property
    def bands(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class MfOutput:
    values: np.ndarray
    detector: MfDetector


@dataclass(frozen=True, eq=False)
class NmfSignificance:
    values: np.ndarray
    convention: str


def check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; choose from {', '.join(CONVENTIONS)}")
    return convention


def degenerate_columns(diffs: np.ndarray, mean: np.ndarray, spread: float = 0.0) -> np.ndarray:
    """Mask of columns of ``d - m`` too small to define a detector.

    ``spread`` is the data scale, e.g. sqrt(trace K); with it, pixels that
    sit at the mean up to summation rounding count as degenerate even
    when the mean itself is near zero.
    """
    size = np.sqrt((diffs * diffs).sum(axis=0))
    return (size == 0.0) | (size <= DEGENERATE_RTOL * (np.linalg.norm(mean) + spread))


def mf_weights(model: CovarianceModel, diffs: np.ndarray):
    """Detector weights for each column of ``diffs = d - m``.

    Returns ``(W, kappa)`` with ``W`` of shape (L, k). Columns must be
    non-degenerate; see :func:`degenerate_columns`.
    """
    X = spd_solve(model, diffs)
    q = (diffs * X).sum(axis=0)
    kappa = 1.0 / q
    return X * kappa, kappa


def mf_detector(model: CovarianceModel, m, d) -> MfDetector:
    m = np.asarray(m, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if m.shape != (model.bands,) or d.shape != (model.bands,):
        raise ValueError(f"mean and target must have length {model.bands}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(d))):
        raise ValueError("mean and target must be finite")
    diff = (d - m)[:, None]
    if degenerate_columns(diff, m, np.sqrt(np.trace(model.K)))[0]:
        raise DegenerateTargetError("target equals the background mean")
    W, kappa = mf_weights(model, diff)
    return MfDetector(W[:, 0], float(kappa[0]), d.copy(), m.copy())


def mf_apply(det: MfDetector, cube: HyperspectralCube, path: str = "pixel") -> MfOutput:
    """Detector output ``y_k = w . r_k`` for every pixel.

    ``path="pixel"`` takes one dot product per pixel; ``path="band"`` forms
    the same plane as the weighted sum of band images. They agree to
    rounding. The cube must be in the centering state the detector was
    built for.
    """
    if cube.bands != det.bands:
        raise ValueError(f"detector has {det.bands} bands, cube has {cube.bands}")
    if path == "pixel":
        y = _kernels.apply_pixels(det.weights, cube.data)
    elif path == "band":
        y = np.zeros(cube.n_pixels)
        for wj, plane in zip(det.weights, cube.data):
            y += wj * plane
    else:
        raise ValueError(f"unknown path {path!r}")
    return MfOutput(y, det)


def significance(W: np.ndarray, norms: np.ndarray, convention: str = NORM_WEIGHTED) -> np.ndarray:
    """Per-band significance of weight columns ``W`` (shape (L,) or (L, k))."""
    check_convention(convention)
    norms = np.asarray(norms, dtype=np.float64)
    if W.ndim == 2:
        norms = norms[:, None]
    a = np.abs(W)
    if convention == NORM_WEIGHTED:
        return a * norms
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, a / safe, 0.0)


def nmf_significance(det: MfDetector, stats: BandStats, convention: str = NORM_WEIGHTED) -> NmfSignificance:
    if stats.bands != det.bands:
        raise ValueError(f"stats for {stats.bands} bands, detector has {det.bands}")
    return NmfSignificance(significance(det.weights, stats.centered_norms, convention), convention)


def normalized_weights(det: MfDetector, stats: BandStats) -> np.ndarray:
    """Signed weights of the same detector on data rescaled to unit-norm bands.

    Rescaling band ``j`` by ``1/norm[j]`` multiplies its weight by
    ``norm[j]``; the magnitudes are the norm-weighted significance.
    """
    return det.weights * stats.centered_norms
