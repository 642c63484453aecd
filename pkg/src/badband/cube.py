"""In-memory hyperspectral cube and its first-order band statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HyperspectralCube:
    """An L-band image cube stored band-major in float64.

    ``data`` has shape ``(bands, lines * samples)``; row ``j`` is band ``j``
    flattened line by line, so pixel ``k`` sits at line ``k // samples``,
    sample ``k % samples``. The array is read-only.
    """

    lines: int
    samples: int
    data: np.ndarray
    wavelengths: Optional[np.ndarray] = None
    band_names: Optional[tuple] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lines < 1 or self.samples < 1:
            raise ValueError(f"empty cube geometry {self.lines}x{self.samples}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 3:
            data = data.reshape(data.shape[0], -1)
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError("cube data must be (bands, pixels) with at least one band")
        if data.shape[1] != self.lines * self.samples:
            raise ValueError(
                f"each plane must hold {self.lines * self.samples} values, got {data.shape[1]}"
            )
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise ValueError(f"non-finite value in band {bad[0] + 1}, pixel {bad[1]}")
        object.__setattr__(self, "data", _frozen(data))
        if self.wavelengths is not None:
            wl = _frozen(self.wavelengths).ravel()
            if wl.size != data.shape[0]:
                raise ValueError(f"{wl.size} wavelengths for {data.shape[0]} bands")
            object.__setattr__(self, "wavelengths", wl)
        if self.band_names is not None:
            names = tuple(str(s) for s in self.band_names)
            if len(names) != data.shape[0]:
                raise ValueError(f"{len(names)} band names for {data.shape[0]} bands")
            object.__setattr__(self, "band_names", names)

    @classmethod
    def from_planes(cls, planes, wavelengths=None, band_names=None, **kw) -> "HyperspectralCube":
        """Build from a ``(bands, lines, samples)`` array."""
        planes = np.asarray(planes, dtype=np.float64)
        if planes.ndim != 3:
            raise ValueError("expected a (bands, lines, samples) array")
        L, lines, samples = planes.shape
        return cls(lines, samples, planes.reshape(L, -1), wavelengths, band_names, **kw)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return (self.lines, self.samples, self.bands)

    def planes(self) -> np.ndarray:
        return self.data.reshape(self.bands, self.lines, self.samples)

    def with_data(self, data) -> "HyperspectralCube":
        """Same geometry and metadata, new band-major values."""
        return HyperspectralCube(
            self.lines, self.samples, data, self.wavelengths, self.band_names, dict(self.metadata)
        )


@dataclass(frozen=True, eq=False)
class BandStats:
    means: np.ndarray
    centered_norms: np.ndarray
    variances: np.ndarray
    constant_band_flags: np.ndarray
    n_pixels: int

    @property
    def bands(self) -> int:
        return self.means.shape[0]

    @property
    def constant_bands(self) -> list:
        """0-based indices of constant bands."""
        return [int(j) for j in np.flatnonzero(self.constant_band_flags)]


def compute_band_stats(cube: HyperspectralCube) -> BandStats:
    """Band means and the Euclidean norms of the mean-removed bands.

    Sums are compensated (numba path) or pairwise (numpy path), in a fixed
    order. Constancy is decided exactly, by comparing band minimum and
    maximum, so a constant band always gets norm 0 and its own value as mean
    even when that value is not representable as a sum / N quotient.
    """
    x = cube.data
    means, norms = _kernels.band_stats(x)
    flags = x.max(axis=1) == x.min(axis=1)
    means = np.where(flags, x[:, 0], means)
    norms = np.where(flags, 0.0, norms)
    for j in np.flatnonzero((norms == 0) & ~flags):
        # squares underflowed; rescale before summing
        c = x[j] - means[j]
        top = np.abs(c).max()
        norms[j] = top * np.sqrt(np.sum((c / top) ** 2))
    n = cube.n_pixels
    return BandStats(
        means=_frozen(means),
        centered_norms=_frozen(norms),
        variances=_frozen(norms * norms / n),
        constant_band_flags=np.array(flags, dtype=bool),
        n_pixels=n,
    )


def centralize(cube: HyperspectralCube, stats: BandStats) -> HyperspectralCube:
    """Subtract each band's mean from that band."""
    if stats.bands != cube.bands or stats.n_pixels != cube.n_pixels:
        raise ValueError(
            f"stats for {stats.bands} bands x {stats.n_pixels} pixels do not match "
            f"cube with {cube.bands} bands x {cube.n_pixels} pixels"
        )
    return cube.with_data(cube.data - stats.means[:, None])


def pixel_spectrum(cube: HyperspectralCube, index: int) -> np.ndarray:
    """The L band values of pixel ``index`` (0-based, line-major)."""
    index = int(index)
    if not 0 <= index < cube.n_pixels:
        raise IndexError(f"pixel index {index} outside [0, {cube.n_pixels})")
    return cube.data[:, index].copy()

