"""Bad-band detection from averaged matched-filter significance.

Pipeline: flag constant bands and refill them with noise, remove band
means, estimate and factor the covariance, draw M distinct target pixels,
build one matched filter per target, average the absolute per-band
significance over the targets (the MAV spectrum), then report every band
whose MAV is no larger than the threshold. Constant bands are always
reported. The threshold is never estimated here; callers supply it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import rng
from .cube import BandStats, HyperspectralCube, centralize, compute_band_stats
from .linalg import CovarianceModel, covariance
from .mf import NORM_WEIGHTED, check_convention, degenerate_columns, mf_weights, significance

DEFAULT_SEED = 271828
DEFAULT_TARGETS = 1000
DEFAULT_REPEATS = 20
# stream keys for derive_seed
NOISE_KEY = 0x4E4F495345
SOLVE_CHUNK = 4096


def default_grid() -> list:
    """1..10, 20..100 by 10, 200..1000 by 100, 2000..10000 by 1000."""
    return (
        list(range(1, 11))
        + list(range(20, 101, 10))
        + list(range(200, 1001, 100))
        + list(range(2000, 10001, 1000))
    )


@dataclass(frozen=True, eq=False)
class TargetSample:
    indices: np.ndarray
    seed: int
    M: int


@dataclass(frozen=True, eq=False)
class MavSpectrum:
    values: np.ndarray
    M: int
    skipped_targets: int
    seed: int
    convention: str
    ridge_applied: float = 0.0
    indices: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class BadBandReport:
    threshold: float
    selected_bands: list
    ranges: list
    mav: MavSpectrum
    ridge_applied: float
    constant_bands: list = field(default_factory=list)
    noise_injection_seed: Optional[int] = None
    degenerate: bool = False

    @property
    def n_selected(self) -> int:
        return len(self.selected_bands)


def format_ranges(bands: Iterable[int]) -> list:
    """Collapse sorted band numbers into maximal runs: [1,2,3,7] -> ['1-3', '7']."""
    out = []
    run = []
    for b in sorted(set(int(b) for b in bands)):
        if run and b == run[-1] + 1:
            run.append(b)
            continue
        if run:
            out.append(f"{run[0]}-{run[-1]}" if len(run) > 1 else str(run[0]))
        run = [b]
    if run:
        out.append(f"{run[0]}-{run[-1]}" if len(run) > 1 else str(run[0]))
    return out


def parse_ranges(text: str) -> list:
    """Inverse of :func:`format_ranges` for strings like '1-2, 61-62, 76'."""
    bands = []
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ValueError(f"descending range {part!r}")
            bands.extend(range(a, b + 1))
        else:
            bands.append(int(part))
    return sorted(set(bands))


def preflight_constant_bands(cube: HyperspectralCube, stats: BandStats, seed: int):
    """Replace constant bands by standard-normal noise.

    Returns ``(cube', flagged)`` with ``flagged`` the 0-based constant bands.
    Band ``j`` is refilled from stream ``derive_seed(seed, j)`` so the noise
    does not depend on which other bands are constant. Only the covariance
    needs this; the flagged bands are reported as bad unconditionally.
    """
    flagged = stats.constant_bands
    if not flagged:
        return cube, []
    data = np.array(cube.data)
    for j in flagged:
        data[j] = rng.normal(rng.derive_seed(seed, j), cube.n_pixels)
    return cube.with_data(data), flagged


def sample_targets(N: int, M: int, seed: int) -> TargetSample:
    """M distinct pixel indices drawn uniformly from range(N)."""
    N, M = int(N), int(M)
    if M < 1:
        raise ValueError("need at least one target")
    if M > N:
        raise ValueError(f"cannot draw {M} distinct targets from {N} pixels")
    return TargetSample(rng.permutation_prefix(N, M, seed), int(seed), M)


class PreparedCube:
    """Band statistics, centered data and covariance, shared across target draws."""

    def __init__(self, cube: HyperspectralCube):
        self.cube = cube
        self.stats = compute_band_stats(cube)
        self.centered = centralize(cube, self.stats)
        self.model: CovarianceModel = covariance(self.centered)
        self.spread = float(np.sqrt(np.sum(self.stats.variances)))

    @property
    def n_pixels(self) -> int:
        return self.cube.n_pixels

    def draw_targets(self, M: int, seed: int):
        """Sample M usable targets, resampling degenerate ones.

        Replacements continue the same seeded shuffle, so the final set is
        still distinct. Returns ``(indices, skipped)``.
        """
        N = self.n_pixels
        sample = sample_targets(N, M, seed)
        k = M
        while True:
            idx = sample.indices if k == M else rng.permutation_prefix(N, k, seed)
            bad = degenerate_columns(self.centered.data[:, idx], self.stats.means, self.spread)
            n_bad = int(bad.sum())
            if k - n_bad >= M:
                return idx[~bad][:M], k - M
            if k == N:
                raise ValueError(f"only {k - n_bad} of {N} pixels differ from the mean; need {M}")
            k = min(N, k + (M - (k - n_bad)))

    def mav(self, M: int, seed: int, convention: str = NORM_WEIGHTED) -> MavSpectrum:
        check_convention(convention)
        idx, skipped = self.draw_targets(M, seed)
        total = np.zeros(self.cube.bands)
        norms = self.stats.centered_norms
        for lo in range(0, M, SOLVE_CHUNK):
            diffs = self.centered.data[:, idx[lo:lo + SOLVE_CHUNK]]
            W, _ = mf_weights(self.model, diffs)
            total += significance(W, norms, convention).sum(axis=1)
        return MavSpectrum(
            values=total / M,
            M=int(M),
            skipped_targets=skipped,
            seed=int(seed),
            convention=convention,
            ridge_applied=self.model.ridge_applied,
            indices=idx,
        )


def mav_spectrum(cube: HyperspectralCube, M: int, seed: int, convention: str = NORM_WEIGHTED) -> MavSpectrum:
    """Mean absolute significance over M sampled targets (no preflight)."""
    if M < 1:
        raise ValueError("need at least one target")
    if M > cube.n_pixels:
        raise ValueError(f"cannot draw {M} distinct targets from {cube.n_pixels} pixels")
    return PreparedCube(cube).mav(M, seed, convention)


def threshold_bands(mav: MavSpectrum, thres: float, constant_bands: Sequence[int] = (),
                    noise_injection_seed: Optional[int] = None,
                    degenerate: bool = False) -> BadBandReport:
    """Select bands with MAV <= thres; ``constant_bands`` (0-based) are always selected.

    Reported band numbers are 1-based.
    """
    thres = float(thres)
    if not math.isfinite(thres) or thres < 0:
        raise ValueError(f"threshold must be finite and >= 0, got {thres}")
    chosen = set(np.flatnonzero(mav.values <= thres).tolist()) | {int(j) for j in constant_bands}
    selected = [j + 1 for j in sorted(chosen)]
    return BadBandReport(
        threshold=thres,
        selected_bands=selected,
        ranges=format_ranges(selected),
        mav=mav,
        ridge_applied=mav.ridge_applied,
        constant_bands=sorted(int(j) + 1 for j in constant_bands),
        noise_injection_seed=noise_injection_seed,
        degenerate=degenerate,
    )


class Detector:
    """Preflighted, factorized cube ready for repeated MAV runs."""

    def __init__(self, cube: HyperspectralCube, noise_seed: int):
        stats = compute_band_stats(cube)
        filled, flagged = preflight_constant_bands(cube, stats, noise_seed)
        self.constant_bands = flagged
        self.noise_seed = int(noise_seed) if flagged else None
        self.degenerate = len(flagged) == cube.bands
        self.prepared = PreparedCube(filled)

    def run(self, thres: float, M: int, seed: int, convention: str = NORM_WEIGHTED) -> BadBandReport:
        mav = self.prepared.mav(M, seed, convention)
        return threshold_bands(mav, thres, self.constant_bands, self.noise_seed, self.degenerate)


def noise_seed_for(seed: int) -> int:
    return rng.derive_seed(seed, NOISE_KEY)


def detect(cube: HyperspectralCube, thres: float, M: int = DEFAULT_TARGETS, seed: int = DEFAULT_SEED,
           convention: str = NORM_WEIGHTED, noise_seed: Optional[int] = None) -> BadBandReport:
    """Run the whole detection on one cube."""
    if M < 1 or M > cube.n_pixels:
        raise ValueError(f"targets must be in [1, {cube.n_pixels}], got {M}")
    if noise_seed is None:
        noise_seed = noise_seed_for(seed)
    return Detector(cube, noise_seed).run(thres, M, seed, convention)


def cell_seed(seed: int, M: int, thres_index: int, repeat: int) -> int:
    return rng.derive_seed(seed, M, thres_index, repeat)


@dataclass
class SweepResult:
    rows: list          # (M, thres, repeat, n_selected or None when skipped)
    summary: list       # (M, thres, mean, std, runs)
    seed: int
    noise_seed: int
    convention: str
    skipped_M: list


def sensitivity_sweep(cube: HyperspectralCube, M_grid: Optional[Sequence[int]], thres_list: Sequence[float],
                      repeats: int = DEFAULT_REPEATS, seed: int = DEFAULT_SEED,
                      convention: str = NORM_WEIGHTED, noise_seed: Optional[int] = None) -> SweepResult:
    """Selected-band count over a grid of target counts and thresholds.

    Cell ``(M, t, r)`` samples with ``cell_seed(seed, M, t, r)`` so each cell
    can be rerun alone with :func:`detect`. Grid points above the pixel
    count are recorded as skipped.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if not thres_list:
        raise ValueError("need at least one threshold")
    grid = default_grid() if M_grid is None else [int(m) for m in M_grid]
    if any(m < 1 for m in grid):
        raise ValueError("grid values must be >= 1")
    if noise_seed is None:
        noise_seed = noise_seed_for(seed)
    det = Detector(cube, noise_seed)
    rows, summary, skipped = [], [], []
    for M in grid:
        if M > cube.n_pixels:
            skipped.append(M)
            rows.extend((M, float(t), r, None) for t in thres_list for r in range(repeats))
            continue
        for ti, t in enumerate(thres_list):
            counts = []
            for r in range(repeats):
                rep = det.run(t, M, cell_seed(seed, M, ti, r), convention)
                counts.append(rep.n_selected)
                rows.append((M, float(t), r, rep.n_selected))
            arr = np.array(counts, dtype=float)
            std = float(arr.std(ddof=1)) if repeats > 1 else 0.0
            summary.append((M, float(t), float(arr.mean()), std, repeats))
    return SweepResult(rows, summary, int(seed), int(noise_seed), convention, skipped)
