"""Command-line front end.

Exit codes: 0 success, 1 I/O error, 2 invalid flags or config,
3 a non-empty record produced no detections.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .detect import DetectionConfig, delineate
from .errors import PqrstError
from .evaluation import DEFAULT_TOL_MS, aggregate, evaluate, format_table
from .signal_io import load_annotations, load_record, write_annotations, write_record
from .synth import SynthConfig, synth_ecg
from .wavelet import DEFAULT_GRID_N, DEFAULT_ORDER, default_qrs_pattern, fit_adaptive_wavelet, load_pattern, write_kernel_csv

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_EMPTY = 3


def _kernel(pattern_path, order=DEFAULT_ORDER, grid_n=DEFAULT_GRID_N):
    pattern = load_pattern(pattern_path) if pattern_path else default_qrs_pattern(grid_n)
    return fit_adaptive_wavelet(pattern, order, grid_n)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PqrstError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})") from None


def _detect_one(record_path, out_path, column, cfg, kernel):
    signal = load_record(record_path, column)
    ann = delineate(signal, kernel, cfg, record_id=Path(record_path).stem)
    write_annotations(ann, out_path)
    return len(ann)


def cmd_detect(args) -> int:
    cfg = DetectionConfig.from_dict(_read_json(args.config)) if args.config else DetectionConfig()
    kernel = _kernel(args.pattern)
    src = Path(args.record)
    if src.is_dir():
        records = sorted(src.glob("*.csv"))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(r, out_dir / (r.stem + ".json")) for r in records]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [pool.submit(_detect_one, r, o, args.column, cfg, kernel) for r, o in jobs]
                counts = [f.result() for f in futures]
        else:
            counts = [_detect_one(r, o, args.column, cfg, kernel) for r, o in jobs]
        empty = [r.name for (r, _), c in zip(jobs, counts) if c == 0]
        for (r, _), c in zip(jobs, counts):
            print(f"{r.name}\t{c} beats")
    else:
        count = _detect_one(src, args.out, args.column, cfg, kernel)
        print(f"{src.name}\t{count} beats")
        empty = [src.name] if count == 0 else []
    if empty:
        print(f"warning: no beats detected in {', '.join(empty)}", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _pairs(detected, reference):
    det, ref = Path(detected), Path(reference)
    if det.is_dir() != ref.is_dir():
        raise PqrstError("--detected and --reference must both be files or both be directories")
    if not det.is_dir():
        return [(det, ref)]
    pairs = []
    for rfile in sorted(ref.glob("*.json")):
        dfile = det / rfile.name
        if not dfile.exists():
            raise FileNotFoundError(f"no detection file for reference {rfile.name} in {det}")
        pairs.append((dfile, rfile))
    return pairs


def cmd_eval(args) -> int:
    reports = []
    for dfile, rfile in _pairs(args.detected, args.reference):
        reports.append(evaluate(load_annotations(dfile), load_annotations(rfile), args.tol_ms))
    if len(reports) == 1:
        print(format_table(reports))
        payload = reports[0].to_dict()
    else:
        total = aggregate(reports)
        print(format_table(reports, fiducial_breakdown=False))
        print()
        print(format_table([total]))
        payload = {"records": [r.to_dict() for r in reports], "total": total.to_dict()}
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if args.figure:
        from .plotting import plot_report, save_figure

        save_figure(plot_report(reports, title=f"tolerance {args.tol_ms:g} ms"), args.figure)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig.from_dict(_read_json(args.config)) if args.config else SynthConfig()
    signal, truth = synth_ecg(cfg)
    write_record(signal, args.out)
    write_annotations(truth, args.truth)
    print(f"{len(signal)} samples, {len(truth)} beats")
    return EXIT_OK


def cmd_wavelet(args) -> int:
    kernel = _kernel(args.pattern, args.order, args.grid_n)
    write_kernel_csv(kernel, args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_delineation, save_figure

    signal = load_record(args.record, args.column)
    ann = load_annotations(args.ann)
    fig = plot_delineation(signal, ann, start_s=args.start, stop_s=args.stop)
    save_figure(fig, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqrst", description="Adaptive-wavelet ECG delineation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="delineate a record CSV (or a directory of them)")
    p.add_argument("record")
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--config", help="DetectionConfig JSON")
    p.add_argument("--pattern", help="pattern CSV to adapt the wavelet to")
    p.add_argument("--out", required=True, help="annotation JSON (a directory when RECORD is one)")
    p.add_argument("--jobs", type=int, default=1, help="parallel records in directory mode")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against reference annotations")
    p.add_argument("--detected", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--tol-ms", type=float, default=DEFAULT_TOL_MS)
    p.add_argument("--json", help="write the report as JSON")
    p.add_argument("--figure", help="write a Se/PPV bar chart (svg/png/pdf)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic record and its ground truth")
    p.add_argument("--config", help="SynthConfig JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("wavelet", help="wavelet utilities")
    wsub = p.add_subparsers(dest="action", required=True)
    d = wsub.add_parser("dump", help="write the fitted kernel as (t, psi) CSV")
    d.add_argument("--pattern")
    d.add_argument("--order", type=int, default=DEFAULT_ORDER)
    d.add_argument("--grid-n", type=int, default=DEFAULT_GRID_N)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_wavelet)

    p = sub.add_parser("plot", help="render a record with its fiducial markers")
    p.add_argument("record")
    p.add_argument("--ann", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--start", type=float, default=0.0, help="seconds")
    p.add_argument("--stop", type=float, default=None, help="seconds")
    p.set_defaults(func=cmd_plot)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PqrstError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
