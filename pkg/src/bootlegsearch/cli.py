"""Command-line front end: extract-midi, extract-sheet, build-index, query, evaluate.

Machine-readable results go to stdout as JSON lines; diagnostics go to stderr.
Exit status is 0 on success, 1 for bad input and 2 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import cv2

from .bootleg import BootlegScore, InvalidFingerprintError, Variant
from .evaluate import EmptySourceError, load_corpus, load_eval_config, run_simulation
from .fileio import (BootlegFileError, ConfigError, ManifestError, atomic_write_bytes, atomic_write_text,
                     load_bootleg, read_database_manifest, save_bootleg)
from .index import DEFAULT_THRESHOLD, IndexBuildError, IndexFormatError, build_index, load_index, save_index
from .midi import DEFAULT_TOLERANCE, MidiParseError, PitchRangeError, extract_midi_features
from .search import EmptyQueryError, QueryBootlegPair, combine_rankings, search
from .sheet import DEFAULTS, EmptyPieceError, ImageDecodeError, analyze_piece, draw_overlay, load_params

log = logging.getLogger("bootlegsearch")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class InputError(Exception):
    pass


INPUT_ERRORS = (InputError, OSError, MidiParseError, PitchRangeError, BootlegFileError, ManifestError, ConfigError,
                IndexFormatError, IndexBuildError, ImageDecodeError, EmptyPieceError, EmptyQueryError,
                EmptySourceError, InvalidFingerprintError)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _threshold(text: str):
    if text.lower() in ("none", "off", "inf"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be an integer or 'none', got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("threshold must be >= 1")
    return value


def cmd_extract_midi(args) -> int:
    feats = extract_midi_features(Path(args.midi).read_bytes(), args.tolerance)
    if feats.width == 0:
        log.warning("%s: no note events; writing width-0 bootleg scores", args.midi)
    if feats.dropped_pitches:
        log.warning("%s: %d pitches outside the piano range were dropped", args.midi, feats.dropped_pitches)
    save_bootleg(args.sharp_out, feats.sharp, str(args.midi))
    try:
        save_bootleg(args.flat_out, feats.flat, str(args.midi))
    except BaseException:
        Path(args.sharp_out).unlink(missing_ok=True)
        raise
    _emit({"midi": str(args.midi), "sharp": str(args.sharp_out), "flat": str(args.flat_out), **feats.stats()})
    return EXIT_OK


def cmd_extract_sheet(args) -> int:
    params = load_params(args.config) if args.config else DEFAULTS
    results, errors = analyze_piece([Path(p) for p in args.images], params, args.jobs)
    fragments = []
    for i, (path, res, err) in enumerate(zip(args.images, results, errors), 1):
        if res is None:
            log.warning("page %d (%s) skipped: %s", i, path, err)
            continue
        print(f"page {i} ({path}): width {res.score.width}, {res.stats}", file=sys.stderr)
        fragments.append(res.score)
        if args.debug_overlays:
            out_dir = Path(args.debug_overlays)
            out_dir.mkdir(parents=True, exist_ok=True)
            ok, png = cv2.imencode(".png", cv2.cvtColor(draw_overlay(res), cv2.COLOR_RGB2BGR))
            if ok:
                atomic_write_bytes(out_dir / f"page{i:03d}_{Path(path).stem}.png", png.tobytes())
    if not fragments:
        raise EmptyPieceError(f"all {len(args.images)} pages failed")
    score = BootlegScore.concatenate(fragments, Variant.SHEET)
    save_bootleg(args.output, score, ",".join(str(p) for p in args.images))
    _emit({"output": str(args.output), "width": score.width, "pages": len(args.images),
           "failed_pages": sum(r is None for r in results)})
    return EXIT_OK


def cmd_build_index(args) -> int:
    rows = read_database_manifest(args.manifest)
    if not rows:
        raise InputError(f"manifest {args.manifest} lists no pieces")
    db = [(pid, load_bootleg(path)) for pid, path in rows]
    index = build_index(db, args.threshold)
    save_index(args.output, index)
    stats = index.stats.to_dict()
    print(f"{len(db)} pieces, {stats['total_columns']} columns; "
          f"{stats['distinct_fingerprints']} distinct fingerprints -> {index.stats.unique_keys} keys "
          f"after escalating {stats['escalated_count']}", file=sys.stderr)
    _emit({"index": str(args.output), "pieces": len(db), **stats})
    return EXIT_OK


def split_segments(query: QueryBootlegPair, length: int) -> list[tuple[int, QueryBootlegPair]]:
    """Consecutive segments of ``length`` columns (0 or >= width: one segment)."""
    if length <= 0 or length >= query.width:
        return [(0, query)]
    return [(s, query.slice(s, min(s + length, query.width))) for s in range(0, query.width, length)]


def cmd_query(args) -> int:
    index = load_index(args.index)
    feats = extract_midi_features(Path(args.midi).read_bytes(), args.tolerance)
    if feats.width == 0:
        raise InputError(f"{args.midi}: MIDI yields a width-0 bootleg score; nothing to query")
    query = QueryBootlegPair(feats.sharp, feats.flat)
    segments = split_segments(query, args.segment_length)
    results = [search(index, q, args.smear) for _, q in segments]
    if args.per_segment:
        for seg, ((start, q), res) in enumerate(zip(segments, results)):
            for rank, (pid, score) in enumerate(res.top(args.top_k), 1):
                _emit({"segment": seg, "start": start, "width": q.width, "rank": rank, "piece_id": pid, "score": score})
    combined = combine_rankings(results)
    per_seg = [r.scores for r in results]
    for rank, (pid, score) in enumerate(combined.top(args.top_k), 1):
        _emit({"rank": rank, "piece_id": pid, "score": score,
               "segment_scores": [s.get(pid, 0) for s in per_seg]})
    print(f"query width {query.width} in {len(segments)} segment(s) against {index.n_pieces} pieces",
          file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    setup = load_eval_config(args.config)
    corpus = load_corpus(setup.database, setup.ground_truth, setup.tolerance)
    report = run_simulation(corpus, setup.config, args.jobs)
    prefix = setup.output_prefix
    prefix.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(prefix.with_name(prefix.name + ".json"), report.to_json())
    atomic_write_text(prefix.with_name(prefix.name + ".csv"), report.to_csv())
    atomic_write_text(prefix.with_name(prefix.name + ".bars.csv"), report.bars_csv())
    for row in report.to_dict(timing=False)["mrr"]:
        _emit(row)
    print(f"mean query time {report.mean_query_seconds * 1000:.2f} ms; reports at {prefix}.*", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bootlegsearch", description="Cross-modal MIDI / sheet music retrieval.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract-midi", help="MIDI file -> sharp and flat bootleg scores")
    s.add_argument("midi")
    s.add_argument("sharp_out")
    s.add_argument("flat_out")
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help="onset grouping window in seconds (default %(default)s)")
    s.set_defaults(func=cmd_extract_midi)

    s = sub.add_parser("extract-sheet", help="page images of one piece -> sheet bootleg score")
    s.add_argument("images", nargs="+")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--config", help="hyperparameter file (all keys required); built-in defaults if omitted")
    s.add_argument("--debug-overlays", metavar="DIR", help="write annotated page images here")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_extract_sheet)

    s = sub.add_parser("build-index", help="database manifest -> reverse index file")
    s.add_argument("manifest")
    s.add_argument("output")
    s.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD,
                   help="escalate fingerprints seen more often than this ('none' disables)")
    s.set_defaults(func=cmd_build_index)

    s = sub.add_parser("query", help="rank indexed pieces for a MIDI file")
    s.add_argument("index")
    s.add_argument("midi")
    s.add_argument("--top-k", type=int, default=10)
    s.add_argument("--segment-length", type=int, default=500, help="0 = query as a single segment")
    s.add_argument("--per-segment", action="store_true", help="also print each segment's ranking")
    s.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    s.add_argument("--smear", type=int, default=0, help="also count +-SMEAR neighbouring offset bins")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("evaluate", help="run an MRR simulation described by a config file")
    s.add_argument("config")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
