"""Synthetic cubes with known bad bands, and detection scoring.

Clean band ``j`` of pixel ``k`` is ``base[j] * abundance[k] + clean_noise * z``
with a smooth base spectrum in [0.5, 1.5], abundance uniform in [0.2, 1.8]
and ``z`` standard normal. Fault kinds replace whole bands:

* ``dead``: constant ``value``
* ``low_snr``: ``signal_scale * base[j] * abundance[k] + noise_scale * z``
* ``pure_noise``: ``noise_scale * z``

All draws come from :mod:`badband.rng` streams keyed off the spec seed, so
a spec reproduces bit for bit. Fault parameters are this harness's own
choices, not measured sensor noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from . import rng
from .cube import HyperspectralCube

FAULT_KINDS = ("dead", "low_snr", "pure_noise")
_BASE_KEY, _ABUND_KEY, _NOISE_KEY = 1, 2, 3

FIGURE1_SIZE = 51
FIGURE1_TARGET_VALUE = 255.0


@dataclass(frozen=True)
class Fault:
    first: int
    last: int
    kind: str
    value: float = 0.0
    signal_scale: float = 0.0
    noise_scale: float = 1.0

    def bands(self) -> range:
        return range(self.first, self.last + 1)


@dataclass(frozen=True)
class SyntheticSpec:
    lines: int
    samples: int
    bands: int
    seed: int = 0
    faults: tuple = ()
    clean_noise: float = 0.01

    def __post_init__(self):
        if min(self.lines, self.samples, self.bands) < 1:
            raise ValueError("lines, samples and bands must be >= 1")
        if not self.clean_noise > 0:
            raise ValueError("clean_noise must be > 0")
        owner = {}
        for f in self.faults:
            if f.kind not in FAULT_KINDS:
                raise ValueError(f"unknown fault kind {f.kind!r}")
            if not 1 <= f.first <= f.last <= self.bands:
                raise ValueError(f"fault range {f.first}-{f.last} outside 1-{self.bands}")
            if f.kind != "dead" and not f.noise_scale > 0:
                raise ValueError("noise_scale must be > 0")
            if f.kind == "low_snr" and not f.signal_scale > 0:
                raise ValueError("low_snr signal_scale must be > 0")
            for b in f.bands():
                if b in owner and owner[b] != f:
                    raise ValueError(f"band {b} has contradictory faults")
                owner[b] = f

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        known = {"lines", "samples", "bands", "seed", "faults", "clean_noise"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown spec keys: {', '.join(sorted(unknown))}")
        faults = []
        for f in doc.get("faults", []):
            f = dict(f)
            rng_ = f.pop("bands")
            first, last = (rng_, rng_) if isinstance(rng_, int) else rng_
            faults.append(Fault(int(first), int(last), **f))
        return cls(
            lines=int(doc["lines"]),
            samples=int(doc["samples"]),
            bands=int(doc["bands"]),
            seed=int(doc.get("seed", 0)),
            faults=tuple(faults),
            clean_noise=float(doc.get("clean_noise", 0.01)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        faults = []
        for f in self.faults:
            d = asdict(f)
            d["bands"] = [d.pop("first"), d.pop("last")]
            faults.append(d)
        return {"lines": self.lines, "samples": self.samples, "bands": self.bands,
                "seed": self.seed, "clean_noise": self.clean_noise, "faults": faults}

    def truth(self) -> set:
        return {b for f in self.faults for b in f.bands()}


# The reference benchmark: six pure-noise bands, one dead band and a
# low-SNR pair in a 60-band cube whose clean bands have SNR >= 20.
BENCH60 = {
    "lines": 50,
    "samples": 50,
    "bands": 60,
    "seed": 7,
    "clean_noise": 0.01,
    "faults": [
        {"bands": [20, 25], "kind": "pure_noise", "noise_scale": 1.0},
        {"bands": [45, 45], "kind": "dead", "value": 0.0},
        {"bands": [58, 59], "kind": "low_snr", "signal_scale": 0.01, "noise_scale": 0.5},
    ],
}


def base_spectrum(bands: int, seed: int) -> np.ndarray:
    phase = 2 * math.pi * rng.uniform(rng.derive_seed(seed, _BASE_KEY), 1)[0]
    t = np.arange(bands) / max(bands - 1, 1)
    return 1.0 + 0.5 * np.sin(2 * math.pi * 1.3 * t + phase)


def abundance(n: int, seed: int) -> np.ndarray:
    return 0.2 + 1.6 * rng.uniform(rng.derive_seed(seed, _ABUND_KEY), n)


def clean_snr(spec: SyntheticSpec) -> float:
    """Smallest signal-std / noise-std ratio over clean bands (population std)."""
    s = base_spectrum(spec.bands, spec.seed)
    a = abundance(spec.lines * spec.samples, spec.seed)
    clean = [j for j in range(spec.bands) if j + 1 not in spec.truth()]
    if not clean:
        return float("nan")
    return float(s[clean].min() * a.std() / spec.clean_noise)


def gen_injected_cube(spec: SyntheticSpec):
    """Build the cube described by ``spec``; returns ``(cube, truth)`` with 1-based truth bands."""
    n = spec.lines * spec.samples
    s = base_spectrum(spec.bands, spec.seed)
    a = abundance(n, spec.seed)
    by_band = {b: f for f in spec.faults for b in f.bands()}
    data = np.empty((spec.bands, n))
    for j in range(spec.bands):
        z = rng.normal(rng.derive_seed(spec.seed, _NOISE_KEY, j), n)
        f = by_band.get(j + 1)
        if f is None:
            data[j] = s[j] * a + spec.clean_noise * z
        elif f.kind == "dead":
            data[j] = f.value
        elif f.kind == "low_snr":
            data[j] = f.signal_scale * s[j] * a + f.noise_scale * z
        else:
            data[j] = f.noise_scale * z
    meta = {"synthetic_spec": spec.to_dict()}
    return HyperspectralCube(spec.lines, spec.samples, data, metadata=meta), spec.truth()


def gen_figure1_cube(seed: int):
    """51x51x3 standard-normal cube with a central 3x3 target at 255 in bands 1 and 3.

    Band 2 stays pure noise everywhere. Returns ``(cube, target_indices)``.
    """
    n = FIGURE1_SIZE
    planes = np.stack([rng.normal(rng.derive_seed(seed, j), n * n).reshape(n, n) for j in range(3)])
    c = n // 2
    planes[0, c - 1:c + 2, c - 1:c + 2] = FIGURE1_TARGET_VALUE
    planes[2, c - 1:c + 2, c - 1:c + 2] = FIGURE1_TARGET_VALUE
    targets = [int(r * n + col) for r in range(c - 1, c + 2) for col in range(c - 1, c + 2)]
    return HyperspectralCube.from_planes(planes), targets


@dataclass(frozen=True)
class DetectionScore:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    no_predictions: bool = False
    no_truth: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def score_detection(selected: Iterable[int], truth: Iterable[int], bands: int) -> DetectionScore:
    """Precision/recall/F1 of predicted bad bands against truth (both 1-based).

    No predictions gives precision 1.0 with ``no_predictions`` set; empty
    truth gives recall 1.0 with ``no_truth`` set.
    """
    pred = set(int(b) for b in getattr(selected, "selected_bands", selected))
    true = set(int(b) for b in truth)
    universe = set(range(1, bands + 1))
    if not (pred <= universe and true <= universe):
        raise ValueError(f"band numbers must lie in 1..{bands}")
    tp = len(pred & true)
    fp = len(pred - true)
    fn = len(true - pred)
    tn = bands - tp - fp - fn
    precision = tp / (tp + fp) if pred else 1.0
    recall = tp / (tp + fn) if true else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return DetectionScore(precision, recall, f1, tp, fp, fn, tn, not pred, not true)


def gap_threshold(values) -> float:
    """Threshold at the largest ratio between consecutive sorted MAV values.

    Benchmark heuristic only: returns the value just below the widest
    relative gap, so an inclusive threshold keeps the low group.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size < 2:
        raise ValueError("need at least two values")
    lo, hi = v[:-1], v[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.where(hi > 0, np.inf, 1.0))
    return float(lo[int(np.argmax(ratio))])


def mav_gap(values, truth: Iterable[int]) -> float:
    """min clean MAV / max faulty MAV (truth 1-based)."""
    values = np.asarray(values)
    bad = np.zeros(values.size, dtype=bool)
    bad[[b - 1 for b in truth]] = True
    return float(values[~bad].min() / values[bad].max())
