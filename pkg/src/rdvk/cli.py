"""Command-line entry point: encode, decode, compete, metrics, bdrate, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from fractions import Fraction

from . import competition as comp
from .codec import decode_bytes, encode_sequence
from .errors import (
    BitstreamError,
    BudgetError,
    CodecError,
    ConfigError,
    IoError,
    ParseError,
)
from .media import load_sequence, store_sequence
from .metrics import bd_rate, ms_ssim, ms_ssim_db, psnr
from .report import render_markdown, report_from_result

log = logging.getLogger("rdvk")

EXIT_OK, EXIT_CONFIG, EXIT_STREAM, EXIT_BUDGET = 0, 2, 3, 4


def _read_file(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _write_file(path, data):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _load(args, path):
    return load_sequence(path, args.format, args.width, args.height, fps=Fraction(args.fps))


def _quality_stats(ref, dist):
    """MS-SSIM needs at least 64x64; smaller inputs report null."""
    out = {"psnr": round(psnr(ref, dist), 6)}
    try:
        s = ms_ssim(ref, dist)
        out["ms_ssim"] = round(s, 10)
        out["ms_ssim_db"] = round(ms_ssim_db(min(max(s, 0.0), 1.0)), 6)
    except CodecError:
        out["ms_ssim"] = out["ms_ssim_db"] = None
    return out


def cmd_encode(args):
    choice = comp.CodingChoice(args.intra_period, args.gop, args.quality, args.downsample)
    seq = _load(args, args.input)
    es = encode_sequence(seq, choice.intra_period, choice.gop_size, choice.quality,
                         choice.downsample)
    _write_file(args.output, es.data)
    if args.dump_schedule:
        _write_file(args.dump_schedule, es.schedule.dump_jsonl().encode())
    if args.dump_motion:
        lines = []
        for entry, st in zip(es.schedule, es.stats):
            if st.motion is not None:
                rec = {"display_index": entry.display_index, "coding_order": entry.coding_order}
                rec.update(st.motion.to_json())
                lines.append(json.dumps(rec, sort_keys=True))
        _write_file(args.dump_motion, ("\n".join(lines) + "\n" if lines else "").encode())
    stats = {"bits": es.bits, "bps": es.bits / float(seq.duration)}
    stats.update(_quality_stats(seq, es.reconstruction))
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def cmd_decode(args):
    data = _read_file(args.input)
    t0 = time.perf_counter()
    seq = decode_bytes(data, os.path.splitext(os.path.basename(args.input))[0])
    elapsed = time.perf_counter() - t0
    if not seq.frames:
        raise BitstreamError("stream contains no frames")
    store_sequence(seq, args.output)
    print(json.dumps({"frames": len(seq), "decode_seconds": round(elapsed, 6)}))
    return EXIT_OK


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def parse_grid(text):
    """``ip=32,64 gop=2,8 q=1,4 ds=0,1``; omitted keys keep the full range."""
    opts = {"ip": comp.INTRA_PERIODS, "gop": comp.GOP_SIZES, "q": comp.QUALITIES, "ds": (0, 1)}
    for part in (text or "").replace(";", " ").split():
        key, sep, vals = part.partition("=")
        if not sep or key not in opts:
            raise ConfigError(f"bad grid term {part!r} (keys: ip, gop, q, ds)")
        opts[key] = _int_list(vals)
    return comp.candidate_grid(opts["ip"], opts["gop"], opts["q"],
                               sorted({bool(v) for v in opts["ds"]}))


def _budget_bits(args, seqs):
    given = [b for b in (args.budget_bits, args.budget_mbytes, args.budget_bps) if b is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of --budget-bits, --budget-mbytes, --budget-bps")
    if args.budget_bits is not None:
        return int(args.budget_bits)
    if args.budget_mbytes is not None:
        return int(args.budget_mbytes * 8e6)
    return int(args.budget_bps * sum(float(s.duration) for s in seqs))


def _time_decodes(paths):
    times = {}
    for name, path in paths.items():
        data = _read_file(path)
        t0 = time.perf_counter()
        decode_bytes(data, name)
        times[name] = time.perf_counter() - t0
    return times


def cmd_compete(args):
    try:
        names = sorted(f for f in os.listdir(args.input) if f.endswith(".y4m"))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not names:
        raise ConfigError(f"no .y4m files in {args.input}")
    seqs = [load_sequence(os.path.join(args.input, n)) for n in names]
    grid = parse_grid(args.grid)
    budget = _budget_bits(args, seqs)
    table = comp.evaluate_grid(seqs, grid, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    comp.write_candidates(table, os.path.join(args.out, "candidates.csv"))
    try:
        result = comp.fit_budget(table, budget)
    except BudgetError as exc:
        print(json.dumps({"error": str(exc), "min_total_bits": exc.min_total}), file=sys.stderr)
        raise
    comp.write_result(result, os.path.join(args.out, "result.json"))
    paths = {}
    for name, cand in result.selected.items():
        paths[name] = os.path.join(args.out, f"{name}.rdv")
        _write_file(paths[name], cand.data)
    report = report_from_result(result.to_json(), _time_decodes(paths))
    _write_file(os.path.join(args.out, "report.md"), render_markdown(report).encode())
    print(json.dumps({"total_bits": result.total_bits, "budget_bits": budget,
                      "lambda": result.lam, "out": args.out}))
    return EXIT_OK


def cmd_metrics(args):
    ref = _load(args, args.ref)
    dist = _load(args, args.dist)
    print(json.dumps(_quality_stats(ref, dist), sort_keys=True))
    return EXIT_OK


def _read_curve(path):
    """CSV with ``rate`` and ``quality`` columns (any extra columns ignored)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    try:
        return [(float(r["rate"]), float(r["quality"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: need numeric rate and quality columns ({exc})") from None


def cmd_bdrate(args):
    value = bd_rate(_read_curve(args.anchor), _read_curve(args.test), args.min_overlap)
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_report(args):
    try:
        with open(os.path.join(args.dir, "result.json")) as fh:
            result = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read result.json in {args.dir}: {exc}") from None
    paths = {}
    for s in result["sequences"]:
        p = os.path.join(args.dir, f"{s['sequence']}.rdv")
        if os.path.exists(p):
            paths[s["sequence"]] = p
    text = render_markdown(report_from_result(result, _time_decodes(paths)))
    if args.output:
        _write_file(args.output, text.encode())
    else:
        print(text)
    return EXIT_OK


def _add_input_flags(p):
    p.add_argument("--format", choices=["y4m", "raw"], default=None)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--fps", default="25", help="frame rate for raw input, e.g. 30000/1001")


def build_parser():
    ap = argparse.ArgumentParser(prog="rdvk", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a video to .rdv")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--intra-period", type=int, default=32)
    p.add_argument("--gop", type=int, default=8)
    p.add_argument("--quality", type=int, default=5)
    p.add_argument("--downsample", action="store_true")
    p.add_argument("--dump-schedule", metavar="PATH", help="write the frame schedule as JSON lines")
    p.add_argument("--dump-motion", metavar="PATH", help="write motion fields as JSON lines")
    _add_input_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode .rdv to Y4M")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("compete", help="per-sequence configuration competition under a budget")
    p.add_argument("--in", dest="input", required=True, help="directory of .y4m files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--budget-bits", type=int)
    p.add_argument("--budget-mbytes", type=float)
    p.add_argument("--budget-bps", type=float, help="mean bits per second per sequence")
    p.add_argument("--grid", default="", help="subset, e.g. 'ip=32,64 gop=2,8 q=2,4,6,8 ds=0,1'")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compete)

    p = sub.add_parser("metrics", help="MS-SSIM and PSNR between two videos")
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    _add_input_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bdrate", help="BD-rate in percent of test against anchor")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--min-overlap", type=float, default=1.0)
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("report", help="render report.md from a compete output directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", dest="output")
    p.set_defaults(func=cmd_report)
    return ap


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, BudgetError):
        return EXIT_BUDGET
    if isinstance(exc, (ParseError, BitstreamError)):
        return EXIT_STREAM
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CodecError, ValueError, OSError) as exc:
        print(f"rdvk {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
