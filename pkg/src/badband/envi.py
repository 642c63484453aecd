"""ENVI header + raw binary cube reading and writing.

Supported data types: 1 (u8), 2 (i16), 3 (i32), 4 (f32), 5 (f64),
12 (u16), 13 (u32). Interleaves: bsq, bil, bip. Byte order 0 is little
endian, 1 is big endian.

Writing to an integer type rounds half away from zero (2.5 -> 3,
-2.5 -> -3) and refuses values outside the type's range instead of
clipping.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cube import HyperspectralCube

DATA_TYPES = {
    1: np.dtype(np.uint8),
    2: np.dtype(np.int16),
    3: np.dtype(np.int32),
    4: np.dtype(np.float32),
    5: np.dtype(np.float64),
    12: np.dtype(np.uint16),
    13: np.dtype(np.uint32),
}
DTYPE_CODES = {v: k for k, v in DATA_TYPES.items()}
INTERLEAVES = ("bsq", "bil", "bip")
MANDATORY = ("samples", "lines", "bands", "data type", "interleave", "byte order")
DATA_SUFFIXES = ("", ".img", ".dat", ".raw", ".bsq", ".bil", ".bip")


class EnviError(ValueError):
    """Malformed header, or payload inconsistent with its header."""


@dataclass
class EnviHeader:
    samples: int
    lines: int
    bands: int
    data_type: int = 5
    interleave: str = "bsq"
    byte_order: int = 0
    header_offset: int = 0
    wavelengths: Optional[list] = None
    band_names: Optional[list] = None
    bbl: Optional[list] = None
    wavelength_units: Optional[str] = None
    description: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("samples", "lines", "bands"):
            if getattr(self, name) < 1:
                raise EnviError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.data_type not in DATA_TYPES:
            raise EnviError(f"unsupported data type {self.data_type}")
        self.interleave = self.interleave.lower()
        if self.interleave not in INTERLEAVES:
            raise EnviError(f"unsupported interleave {self.interleave!r}")
        if self.byte_order not in (0, 1):
            raise EnviError(f"byte order must be 0 or 1, got {self.byte_order}")
        if self.header_offset < 0:
            raise EnviError("header offset must be >= 0")
        for name in ("wavelengths", "band_names", "bbl"):
            v = getattr(self, name)
            if v is not None and len(v) != self.bands:
                raise EnviError(f"{name} has {len(v)} entries for {self.bands} bands")

    @property
    def dtype(self) -> np.dtype:
        return DATA_TYPES[self.data_type].newbyteorder("<" if self.byte_order == 0 else ">")

    @property
    def payload_size(self) -> int:
        return self.header_offset + self.samples * self.lines * self.bands * self.dtype.itemsize


def _split_list(body: str) -> list:
    return [s.strip() for s in body.split(",") if s.strip() != ""]


def _iter_entries(text: str):
    """Yield (line_number, key, raw_value, is_list) from header text."""
    lines = text.splitlines()
    i = 0
    while i < len(lines) and not lines[i].strip():
        i += 1
    if i == len(lines) or lines[i].strip() != "ENVI":
        raise EnviError("line 1: header must start with the ENVI magic line")
    i += 1
    while i < len(lines):
        lineno = i + 1
        line = lines[i]
        i += 1
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        if "=" not in stripped:
            raise EnviError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = re.sub(r"\s+", " ", key.strip().lower())
        value = value.strip()
        if value.startswith("{"):
            body = value[1:]
            while "}" not in body:
                if i >= len(lines):
                    raise EnviError(f"line {lineno}: unterminated '{{' list for key {key!r}")
                body += "\n" + lines[i]
                i += 1
            inner, tail = body.split("}", 1)
            if tail.strip():
                raise EnviError(f"line {lineno}: trailing text after list for key {key!r}")
            yield lineno, key, inner, True
        else:
            if "}" in value:
                raise EnviError(f"line {lineno}: stray '}}' in value for key {key!r}")
            yield lineno, key, value, False


def parse_envi_header(text: str) -> EnviHeader:
    """Parse ENVI header text. Keys are case-insensitive; unknown keys are kept in ``extra``."""
    raw = {}
    where = {}
    for lineno, key, value, is_list in _iter_entries(text):
        raw[key] = (value, is_list)
        where[key] = lineno

    missing = [k for k in MANDATORY if k not in raw]
    if missing:
        raise EnviError(f"missing mandatory key(s): {', '.join(missing)}")

    def as_int(key):
        value, is_list = raw[key]
        try:
            if is_list:
                raise ValueError
            return int(value)
        except ValueError:
            raise EnviError(f"line {where[key]}: {key!r} must be an integer, got {value!r}") from None

    def as_list(key, conv):
        if key not in raw:
            return None
        value, is_list = raw[key]
        items = _split_list(value) if is_list else [value]
        try:
            return [conv(s) for s in items]
        except ValueError:
            raise EnviError(f"line {where[key]}: bad entry in {key!r} list") from None

    dt = as_int("data type")
    if dt not in DATA_TYPES:
        raise EnviError(f"line {where['data type']}: unsupported data type {dt}")
    interleave = raw["interleave"][0].strip().lower()
    if interleave not in INTERLEAVES:
        raise EnviError(f"line {where['interleave']}: unsupported interleave {interleave!r}")
    known = set(MANDATORY) | {
        "header offset", "wavelength", "band names", "bbl", "wavelength units", "description",
    }
    extra = {k: v[0] for k, v in raw.items() if k not in known}
    try:
        return EnviHeader(
            samples=as_int("samples"),
            lines=as_int("lines"),
            bands=as_int("bands"),
            data_type=dt,
            interleave=interleave,
            byte_order=as_int("byte order"),
            header_offset=as_int("header offset") if "header offset" in raw else 0,
            wavelengths=as_list("wavelength", float),
            band_names=as_list("band names", str),
            bbl=as_list("bbl", lambda s: int(float(s))),
            wavelength_units=raw["wavelength units"][0].strip() if "wavelength units" in raw else None,
            description=raw["description"][0].strip() if "description" in raw else None,
            extra=extra,
        )
    except EnviError as exc:
        raise EnviError(f"header: {exc}") from None


def _to_band_major(arr: np.ndarray, h: EnviHeader) -> np.ndarray:
    if h.interleave == "bsq":
        cube = arr.reshape(h.bands, h.lines, h.samples)
    elif h.interleave == "bil":
        cube = arr.reshape(h.lines, h.bands, h.samples).transpose(1, 0, 2)
    else:
        cube = arr.reshape(h.lines, h.samples, h.bands).transpose(2, 0, 1)
    return np.ascontiguousarray(cube, dtype=np.float64).reshape(h.bands, -1)


def read_cube(header: EnviHeader, payload: bytes) -> HyperspectralCube:
    """Decode a raw payload into a float64 band-major cube."""
    if len(payload) != header.payload_size:
        raise EnviError(
            f"payload is {len(payload)} bytes, header expects {header.payload_size}"
        )
    n = header.samples * header.lines * header.bands
    arr = np.frombuffer(payload, dtype=header.dtype, count=n, offset=header.header_offset)
    data = _to_band_major(arr, header)
    if header.dtype.kind == "f" and not np.all(np.isfinite(data)):
        j, k = np.argwhere(~np.isfinite(data))[0]
        raise EnviError(f"non-finite value in band {j + 1} at pixel {k}")
    meta = {"bbl": list(header.bbl) if header.bbl is not None else None,
            "wavelength_units": header.wavelength_units}
    return HyperspectralCube(header.lines, header.samples, data,
                             header.wavelengths, header.band_names, meta)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    fl = np.floor(a)
    return np.copysign(fl + (a - fl >= 0.5), x)


def _encode(data: np.ndarray, data_type: int) -> np.ndarray:
    dt = DATA_TYPES[data_type]
    if dt.kind == "f":
        if dt.itemsize == 4:
            big = np.abs(data) > np.finfo(np.float32).max
            if big.any():
                raise EnviError(f"value {data[big][0]!r} overflows float32")
        return data.astype(dt)
    r = _round_half_away(data)
    info = np.iinfo(dt)
    bad = (r < info.min) | (r > info.max)
    if bad.any():
        raise EnviError(f"value {data[bad][0]!r} not representable as {dt.name}")
    return r.astype(dt)


def write_cube(cube: HyperspectralCube, interleave: str = "bsq", data_type: int = 5,
               byte_order: int = 0, description: Optional[str] = None):
    """Serialize a cube; returns ``(header_text, payload_bytes)``."""
    interleave = interleave.lower()
    if data_type not in DATA_TYPES:
        raise EnviError(f"unsupported data type {data_type}")
    if interleave not in INTERLEAVES:
        raise EnviError(f"unsupported interleave {interleave!r}")
    planes = _encode(cube.planes(), data_type)
    if interleave == "bil":
        planes = planes.transpose(1, 0, 2)
    elif interleave == "bip":
        planes = planes.transpose(1, 2, 0)
    order = "<" if byte_order == 0 else ">"
    payload = np.ascontiguousarray(planes).astype(planes.dtype.newbyteorder(order)).tobytes()

    bbl = cube.metadata.get("bbl")
    units = cube.metadata.get("wavelength_units")
    out = ["ENVI"]
    if description:
        out.append(f"description = {{{description}}}")
    out += [
        f"samples = {cube.samples}",
        f"lines = {cube.lines}",
        f"bands = {cube.bands}",
        "header offset = 0",
        "file type = ENVI Standard",
        f"data type = {data_type}",
        f"interleave = {interleave}",
        f"byte order = {byte_order}",
    ]
    if units:
        out.append(f"wavelength units = {units}")
    if cube.wavelengths is not None:
        out.append("wavelength = {" + ", ".join(repr(float(w)) for w in cube.wavelengths) + "}")
    if cube.band_names is not None:
        out.append("band names = {" + ", ".join(cube.band_names) + "}")
    if bbl is not None:
        out.append("bbl = {" + ", ".join(str(int(b)) for b in bbl) + "}")
    return "\n".join(out) + "\n", payload


def header_path_for(path) -> Path:
    p = Path(path)
    if p.suffix.lower() == ".hdr":
        return p
    if p.with_name(p.name + ".hdr").exists():
        return p.with_name(p.name + ".hdr")
    return p.with_suffix(".hdr")


def data_path_for(hdr: Path) -> Path:
    base = hdr.with_suffix("")
    for suffix in DATA_SUFFIXES:
        cand = base.with_name(base.name + suffix)
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"no data file next to header {hdr}")


def read_envi(path) -> HyperspectralCube:
    """Load a cube from ``<name>.hdr`` (or the data file next to it)."""
    hdr = header_path_for(path)
    if not hdr.is_file():
        raise FileNotFoundError(f"header not found: {hdr}")
    header = parse_envi_header(hdr.read_text(encoding="utf-8", errors="replace"))
    return read_cube(header, data_path_for(hdr).read_bytes())


def write_envi(base, cube: HyperspectralCube, interleave: str = "bsq", data_type: int = 5,
               byte_order: int = 0, description: Optional[str] = None):
    """Write ``<base>.hdr`` and ``<base>.img``; returns both paths."""
    base = Path(base)
    if base.suffix.lower() in (".hdr", ".img"):
        base = base.with_suffix("")
    text, payload = write_cube(cube, interleave, data_type, byte_order, description)
    os.makedirs(base.parent or ".", exist_ok=True)
    hdr = base.with_name(base.name + ".hdr")
    img = base.with_name(base.name + ".img")
    hdr.write_text(text, encoding="utf-8")
    img.write_bytes(payload)
    return hdr, img
