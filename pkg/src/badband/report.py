"""Report serialization: JSON, CSV, SVG line plots and PGM band images.

JSON floats are written with 17 significant digits so every double
round-trips; CSV always uses '.' as decimal separator.
"""

from __future__ import annotations

import json
import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

REPORT_KEYS = (
    "tool_version", "input_sha256", "seed", "targets", "convention", "ridge_applied",
    "constant_bands", "threshold", "selected_bands", "ranges", "mav", "skipped_targets",
)


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats; dict key order is kept."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_dict(report, tool_version: str, input_sha256: Optional[str], backend: str) -> dict:
    mav = report.mav
    return {
        "tool_version": tool_version,
        "input_sha256": input_sha256,
        "seed": mav.seed,
        "targets": mav.M,
        "convention": mav.convention,
        "ridge_applied": float(report.ridge_applied),
        "constant_bands": list(report.constant_bands),
        "threshold": report.threshold,
        "selected_bands": list(report.selected_bands),
        "ranges": list(report.ranges),
        "mav": [float(v) for v in mav.values],
        "skipped_targets": mav.skipped_targets,
        "n_selected": report.n_selected,
        "noise_injection_seed": report.noise_injection_seed,
        "degenerate": report.degenerate,
        "backend": backend,
    }


def report_csv(report, wavelengths=None) -> str:
    selected = set(report.selected_bands)
    lines = ["band,wavelength,mav,selected"]
    for j, v in enumerate(report.mav.values):
        wl = "" if wavelengths is None else fmt_float(wavelengths[j])
        lines.append(f"{j + 1},{wl},{fmt_float(v)},{int(j + 1 in selected)}")
    return "\n".join(lines) + "\n"


def sweep_csv(result) -> str:
    lines = ["M,thres,repeat,n_selected"]
    for M, t, r, n in result.rows:
        lines.append(f"{M},{fmt_float(t)},{r},{'skipped' if n is None else n}")
    return "\n".join(lines) + "\n"


def sweep_summary_csv(result) -> str:
    lines = ["M,thres,mean,std,runs"]
    for M, t, mean, std, runs in result.summary:
        lines.append(f"{M},{fmt_float(t)},{fmt_float(mean)},{fmt_float(std)},{runs}")
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def svg_plot(series: Sequence[tuple], title: str, xlabel: str, ylabel: str, log_y: bool = False,
             log_x: bool = False, shade: Sequence[tuple] = (), hlines: Sequence[tuple] = (),
             width: int = 800, height: int = 420) -> str:
    """Static line plot as SVG text.

    ``series`` holds ``(label, xs, ys)``; ``shade`` holds ``(x0, x1)`` spans
    drawn behind the data; ``hlines`` holds ``(label, y)`` reference lines.
    Non-positive values on a log axis are clamped to the smallest positive one.
    """
    ml, mr, mt, mb = 70, 20, 36, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series] +
                            [np.asarray([h[1] for h in hlines], float)])

    def floor_of(v):
        pos = v[v > 0]
        return pos.min() if pos.size else 1.0

    xfloor, yfloor = floor_of(xs_all), floor_of(ys_all)

    def tx(v):
        v = np.asarray(v, float)
        return np.log10(np.maximum(v, xfloor)) if log_x else v

    def ty(v):
        v = np.asarray(v, float)
        return np.log10(np.maximum(v, yfloor)) if log_y else v

    xt = tx(xs_all)
    yt = ty(ys_all)
    x0, x1 = float(xt.min()), float(xt.max())
    y0, y1 = float(yt.min()), float(yt.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for a, b in shade:
        a_, b_ = tx([a])[0], tx([b])[0]
        out.append(f'<rect x="{px(a_):.2f}" y="{mt}" width="{max(px(b_) - px(a_), 1):.2f}" '
                   f'height="{ph}" fill="#cccccc" fill-opacity="0.5"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _nice_ticks(y0, y1):
        label = f"{10 ** t:.3g}" if log_y else f"{t:.4g}"
        out.append(f'<line x1="{ml - 4}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{label}</text>')
    for t in _nice_ticks(x0, x1):
        label = f"{10 ** t:.3g}" if log_x else f"{t:.4g}"
        out.append(f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{mt + ph + 18}" text-anchor="middle">{label}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for label, y in hlines:
        yv = ty([y])[0]
        out.append(f'<line x1="{ml}" y1="{py(yv):.2f}" x2="{ml + pw}" y2="{py(yv):.2f}" '
                   f'stroke="#555555" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{py(yv) - 4:.2f}" text-anchor="end">{escape(label)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx(xs), ty(ys)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if len(series) > 1 or label:
            out.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * i}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bad_spans(bbl) -> list:
    """(x0, x1) band spans, 1-based, where a header bbl marks bands unusable."""
    spans = []
    for j, flag in enumerate(bbl or []):
        if int(flag) == 0:
            spans.append((j + 0.5, j + 1.5))
    return spans


def mav_svg(report, bbl=None, log_y: bool = True) -> str:
    values = np.asarray(report.mav.values)
    bands = np.arange(1, values.size + 1)
    return svg_plot(
        [("MAV", bands, values)],
        title=f"MAV spectrum (M={report.mav.M}, {report.mav.convention})",
        xlabel="band", ylabel="mean absolute weight",
        log_y=log_y, shade=bad_spans(bbl),
        hlines=[(f"thres = {report.threshold:g}", report.threshold)],
    )


def sweep_svg(result) -> str:
    series = []
    for t in sorted({row[1] for row in result.summary}):
        pts = [(M, mean) for M, tt, mean, _, _ in result.summary if tt == t]
        if pts:
            series.append((f"thres = {t:g}", [p[0] for p in pts], [p[1] for p in pts]))
    if not series:
        series = [("", [0], [0])]
    return svg_plot(series, "Selected bands vs. number of targets", "targets M",
                    "mean selected bands", log_x=True)


def stretch_to_u8(plane: np.ndarray) -> np.ndarray:
    """Min-max stretch to 0..255; a constant plane maps to 128."""
    plane = np.asarray(plane, dtype=np.float64)
    lo, hi = plane.min(), plane.max()
    if hi == lo:
        return np.full(plane.shape, 128, dtype=np.uint8)
    v = (plane - lo) / (hi - lo) * 255.0
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


def pgm_bytes(plane: np.ndarray) -> bytes:
    img = stretch_to_u8(plane)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
