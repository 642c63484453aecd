"""Bad-band detection for hyperspectral cubes from matched-filter weights."""

from .cube import BandStats, HyperspectralCube, centralize, compute_band_stats, pixel_spectrum
from .detector import (
    BadBandReport,
    MavSpectrum,
    TargetSample,
    detect,
    mav_spectrum,
    preflight_constant_bands,
    sample_targets,
    sensitivity_sweep,
    threshold_bands,
)
from .envi import EnviHeader, parse_envi_header, read_cube, read_envi, write_cube, write_envi
from .linalg import BandTransform, CovarianceModel, apply_band_transform, covariance, spd_solve
from .mf import MfDetector, mf_apply, mf_detector, nmf_significance

__version__ = "0.1.0"
