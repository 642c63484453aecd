"""Command-line front end.

Exit codes: 0 success, 2 input or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, _kernels
from . import report as rpt
from .detector import (
    DEFAULT_REPEATS,
    DEFAULT_SEED,
    DEFAULT_TARGETS,
    detect,
    parse_ranges,
    sensitivity_sweep,
    threshold_bands,
)
from .envi import EnviError, data_path_for, header_path_for, read_envi, write_envi
from .linalg import RidgeExhaustedError
from .mf import CONVENTIONS, NORM_WEIGHTED
from .synth import BENCH60, SyntheticSpec, gap_threshold, gen_figure1_cube, gen_injected_cube, score_detection

log = logging.getLogger("badband")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
FORMATS = ("json", "csv", "svg")


class InputError(Exception):
    pass


def input_sha256(path) -> str:
    """Hash of the header text followed by the raw payload."""
    hdr = header_path_for(path)
    h = hashlib.sha256()
    h.update(hdr.read_bytes())
    h.update(data_path_for(hdr).read_bytes())
    return h.hexdigest()


def _load(path):
    hdr = header_path_for(path)
    if not hdr.is_file():
        raise InputError(f"header not found: {hdr}")
    return read_envi(hdr), input_sha256(hdr)


def _formats(text: str) -> list:
    fmts = [f.strip().lower() for f in text.split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if not fmts or bad:
        raise InputError(f"--formats must be a non-empty subset of {','.join(FORMATS)}")
    return fmts


def _float_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"not a comma-separated number list: {text!r}") from None
    if not vals:
        raise InputError("empty number list")
    return vals


def parse_grid(text: str):
    """'default' or comma-separated items, each N or start:stop:step (inclusive)."""
    if text == "default":
        return None
    grid = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ":" in item:
                a, b, step = (int(v) for v in item.split(":"))
                if step < 1:
                    raise ValueError
                grid.extend(range(a, b + 1, step))
            else:
                grid.append(int(item))
        except ValueError:
            raise InputError(f"bad grid item {item!r}") from None
    if not grid or min(grid) < 1:
        raise InputError("grid must hold positive target counts")
    return sorted(set(grid))


def _provenance(args, sha, **extra) -> dict:
    doc = {
        "tool_version": __version__,
        "command_line": [Path(sys.argv[0]).name] + list(sys.argv[1:]),
        "command": args.command,
        "input_sha256": sha,
        "backend": _kernels.BACKEND,
    }
    doc.update(extra)
    return doc


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8", newline="\n")
    log.info("wrote %s", out / name)


def _emit_report(rep, cube, sha, out: Path, formats, log_y=True):
    if "json" in formats:
        _write(out, "report.json", rpt.dumps(rpt.report_dict(rep, __version__, sha, _kernels.BACKEND)) + "\n")
    if "csv" in formats:
        _write(out, "report.csv", rpt.report_csv(rep, cube.wavelengths))
    if "svg" in formats:
        _write(out, "mav.svg", rpt.mav_svg(rep, cube.metadata.get("bbl"), log_y=log_y))


def cmd_detect(args) -> int:
    formats = _formats(args.formats)
    cube, sha = _load(args.input)
    rep = detect(cube, args.thres, M=args.targets, seed=args.seed,
                 convention=args.convention, noise_seed=args.noise_seed)
    out = Path(args.out)
    _emit_report(rep, cube, sha, out, formats, log_y=not args.linear_y)
    _write(out, "provenance.json", rpt.dumps(_provenance(args, sha, seed=args.seed, targets=args.targets,
                                                         threads=args.threads)) + "\n")
    print(f"{rep.n_selected} bad bands at thres={args.thres:g}: {', '.join(rep.ranges) or '(none)'}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    thres = _float_list(args.thres_list)
    grid = parse_grid(args.grid)
    cube, sha = _load(args.input)
    result = sensitivity_sweep(cube, grid, thres, repeats=args.repeats, seed=args.seed,
                               convention=args.convention, noise_seed=args.noise_seed)
    out = Path(args.out)
    _write(out, "sweep.csv", rpt.sweep_csv(result))
    _write(out, "sweep_summary.csv", rpt.sweep_summary_csv(result))
    _write(out, "sweep.svg", rpt.sweep_svg(result))
    _write(out, "provenance.json", rpt.dumps(_provenance(
        args, sha, seed=args.seed, noise_seed=result.noise_seed, repeats=args.repeats,
        skipped_M=result.skipped_M, threads=args.threads)) + "\n")
    for M in result.skipped_M:
        print(f"skipped M={M}: exceeds {cube.n_pixels} pixels", file=sys.stderr)
    print(f"{len(result.rows)} sweep cells written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    if args.figure1:
        cube, targets = gen_figure1_cube(args.seed)
        truth = {2}
        meta = {"kind": "figure1", "seed": args.seed, "targets": targets, "bad_bands": [2]}
    else:
        if args.spec == "bench60":
            spec = SyntheticSpec.from_dict(BENCH60)
        else:
            try:
                spec = SyntheticSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"invalid spec {args.spec}: {exc}") from None
        cube, truth = gen_injected_cube(spec)
        meta = {"kind": "injected", "spec": spec.to_dict(), "bad_bands": sorted(truth),
                "note": "fault parameters are synthetic harness choices"}
    hdr, _ = write_envi(out / args.name, cube, description="badband synthetic cube")
    _write(out, "truth.json", rpt.dumps(meta) + "\n")
    print(f"wrote {hdr}")
    if args.score:
        sha = input_sha256(hdr)
        M = min(args.targets, cube.n_pixels)
        rep = detect(cube, 0.0, M=M, seed=args.seed, convention=args.convention)
        thres = args.thres if args.thres is not None else gap_threshold(rep.mav.values)
        rep = threshold_bands(rep.mav, thres, [b - 1 for b in rep.constant_bands],
                              rep.noise_injection_seed, rep.degenerate)
        score = score_detection(rep, truth, cube.bands)
        doc = dict(score.to_dict(), threshold=thres,
                   threshold_source="user" if args.thres is not None else "gap-heuristic",
                   selected_bands=rep.selected_bands, truth=sorted(truth))
        _write(out, "score.json", rpt.dumps(doc) + "\n")
        _emit_report(rep, cube, sha, out, FORMATS)
        print(f"precision={score.precision:.3f} recall={score.recall:.3f} f1={score.f1:.3f}")
    return EXIT_OK


def parse_band_list(text: str, bands: int) -> list:
    try:
        chosen = parse_ranges(text)
    except ValueError:
        raise InputError(f"bad band list {text!r}") from None
    bad = [b for b in chosen if not 1 <= b <= bands]
    if not chosen or bad:
        raise InputError(f"band(s) {bad or text} outside 1-{bands}")
    return chosen


def cmd_inspect(args) -> int:
    cube, _ = _load(args.input)
    chosen = parse_band_list(args.bands, cube.bands)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    planes = cube.planes()
    for b in chosen:
        (out / f"band_{b}.pgm").write_bytes(rpt.pgm_bytes(planes[b - 1]))
    print(f"wrote {len(chosen)} band image(s) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="badband", description="Matched-filter bad-band detection.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=0, help="worker threads (0 = all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("--input", required=True, help="ENVI header (or data file next to it)")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--convention", choices=CONVENTIONS, default=NORM_WEIGHTED)
        sp.add_argument("--out", default=".", help="output directory")

    d = sub.add_parser("detect", help="find bad bands in one cube")
    common(d)
    d.add_argument("--thres", type=float, required=True)
    d.add_argument("--targets", type=int, default=DEFAULT_TARGETS)
    d.add_argument("--noise-seed", type=int, default=None,
                   help="seed for refilling constant bands (default: derived from --seed)")
    d.add_argument("--formats", default="json,csv,svg")
    d.add_argument("--linear-y", action="store_true", help="linear MAV axis in mav.svg")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("sensitivity", help="selected-band count versus number of targets")
    common(s)
    s.add_argument("--thres-list", required=True)
    s.add_argument("--grid", default="default", help="'default' or items like 1:10:1,20,50")
    s.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    s.add_argument("--noise-seed", type=int, default=None)
    s.set_defaults(func=cmd_sensitivity)

    m = sub.add_parser("simulate", help="write a synthetic cube with known bad bands")
    common(m, needs_input=False)
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="SyntheticSpec JSON file, or 'bench60'")
    src.add_argument("--figure1", action="store_true", help="51x51x3 matched-filter demo cube")
    m.add_argument("--name", default="cube")
    m.add_argument("--score", action="store_true", help="run detect and score against truth")
    m.add_argument("--thres", type=float, default=None,
                   help="threshold for --score (default: largest-gap heuristic)")
    m.add_argument("--targets", type=int, default=DEFAULT_TARGETS)
    m.set_defaults(func=cmd_simulate)

    i = sub.add_parser("inspect", help="export bands as 8-bit PGM images")
    i.add_argument("--input", required=True)
    i.add_argument("--bands", required=True, help="e.g. 1,61,75 or 103-109")
    i.add_argument("--out", default=".")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(format="%(message)s", level=logging.INFO if args.verbose else logging.WARNING)
    _kernels.set_threads(args.threads)
    try:
        if getattr(args, "targets", 1) < 1:
            raise InputError("--targets must be >= 1")
        if getattr(args, "repeats", 1) < 1:
            raise InputError("--repeats must be >= 1")
        return args.func(args)
    except RidgeExhaustedError as exc:
        print(f"badband: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, EnviError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"badband: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
