"""Retrieval evaluation: query sampling, mean reciprocal rank and database-size sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fileio import ConfigError, load_bootleg, parse_key_values, read_database_manifest, read_manifest, resolve
from .index import DEFAULT_THRESHOLD, build_index
from .midi import DEFAULT_TOLERANCE, extract_midi_features
from .search import QueryBootlegPair, search
from .synthetic import CLEAN, NoiseModel, make_piece

log = logging.getLogger(__name__)

FULL = None  # query length sentinel: use the whole MIDI bootleg


class EvalConfigError(ConfigError):
    pass


class EmptySourceError(ValueError):
    pass


def sample_query(pair: QueryBootlegPair, length: int | None, rng: np.random.Generator) -> QueryBootlegPair:
    """Random contiguous excerpt of ``length`` columns (both spellings cut identically).

    ``length=None`` means the full query. Sources shorter than ``length`` are
    returned whole.
    """
    if pair.width == 0:
        raise EmptySourceError("cannot sample from a width-0 bootleg score")
    if length is None or pair.width <= length:
        return pair
    if length < 1:
        raise ValueError(f"query length must be >= 1, got {length}")
    start = int(rng.integers(0, pair.width - length + 1))
    return pair.slice(start, start + length)


def mrr(ranks: Sequence[int]) -> float:
    ranks = list(ranks)
    if not ranks:
        raise ValueError("MRR of an empty rank list is undefined")
    if min(ranks) < 1:
        raise ValueError("ranks must be >= 1")
    return float(np.mean([1.0 / r for r in ranks]))


def rank_of_true(piece_ids: Sequence, scores: Sequence[int], true_id) -> int:
    """1 + pieces scoring strictly higher + equal-scoring pieces with a smaller id."""
    lookup = dict(zip(piece_ids, scores))
    s = lookup[true_id]
    return 1 + sum(1 for p, v in lookup.items() if v > s or (v == s and p < true_id))


def length_label(length: int | None) -> str:
    return "full" if length is None else str(length)


@dataclass
class Corpus:
    """Sheet bootlegs of the database plus MIDI queries with their true piece."""

    pieces: dict
    queries: dict
    truth: dict

    def __post_init__(self):
        for mid, pid in self.truth.items():
            if mid not in self.queries:
                raise EvalConfigError(f"ground truth names unknown MIDI {mid!r}")
            if pid not in self.pieces:
                raise EvalConfigError(f"ground truth pairs {mid!r} with unknown piece {pid!r}")
        missing = [m for m in self.queries if m not in self.truth]
        if missing:
            raise EvalConfigError(f"no ground-truth piece for MIDI {missing[0]!r}")


def synthetic_corpus(n_pieces: int, width: int, seed: int = 0, noise: NoiseModel = CLEAN) -> Corpus:
    """``n_pieces`` synthetic pieces of ``width`` events, one MIDI query each."""
    rng = np.random.default_rng(seed)
    pieces, queries, truth = {}, {}, {}
    digits = len(str(n_pieces - 1))
    for i in range(n_pieces):
        p = make_piece(width, rng, noise)
        pid = f"piece{i:0{digits}d}"
        mid = f"midi{i:0{digits}d}"
        pieces[pid] = p.sheet
        queries[mid] = p.midi
        truth[mid] = pid
    return Corpus(pieces, queries, truth)


@dataclass(frozen=True)
class SimulationConfig:
    db_sizes: tuple = (100,)
    query_lengths: tuple = (FULL,)
    trials: int = 10
    samples_per_midi: int = 10
    seed: int = 0
    threshold: int | None = DEFAULT_THRESHOLD
    max_query_midis: int | None = None
    smear: int = 0
    keep_scores: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise EvalConfigError("trials must be >= 1")
        if self.samples_per_midi < 1:
            raise EvalConfigError("samples_per_midi must be >= 1")
        if not self.db_sizes or min(self.db_sizes) < 1:
            raise EvalConfigError("db_sizes must be non-empty and positive")
        for length in self.query_lengths:
            if length is not None and length < 1:
                raise EvalConfigError(f"query length {length} must be >= 1 or full")


@dataclass
class EvalReport:
    mrr: dict = field(default_factory=dict)
    trial_mrr: dict = field(default_factory=dict)
    queries: list = field(default_factory=list)
    index_stats: dict = field(default_factory=dict)
    mean_query_seconds: float = 0.0
    truncated_queries: int = 0

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "mrr": [{"N": n, "L": length_label(l), "mrr": v} for (n, l), v in sorted(self.mrr.items(), key=_cell_key)],
            "trial_mrr": [{"N": n, "L": length_label(l), "trial": t, "mrr": v}
                          for (n, l, t), v in sorted(self.trial_mrr.items(), key=_cell_key)],
            "queries": [{k: v for k, v in q.items() if timing or k != "seconds"} for q in self.queries],
            "index_stats": {str(k): v for k, v in self.index_stats.items()},
            "truncated_queries": self.truncated_queries,
        }
        if timing:
            d["mean_query_seconds"] = self.mean_query_seconds
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "L", "trial", "MRR"])
        for (n, l, t), v in sorted(self.trial_mrr.items(), key=_cell_key):
            w.writerow([n, length_label(l), t, f"{v:.6f}"])
        return buf.getvalue()

    def bars_csv(self) -> str:
        """Mean MRR laid out as grouped bars: one row per N, one column per L."""
        sizes = sorted({n for n, _ in self.mrr})
        lengths = sorted({l for _, l in self.mrr}, key=lambda l: (l is None, l or 0))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N"] + [f"L={length_label(l)}" for l in lengths])
        for n in sizes:
            w.writerow([n] + [f"{self.mrr[(n, l)]:.6f}" if (n, l) in self.mrr else "" for l in lengths])
        return buf.getvalue()


def _cell_key(item):
    key = item[0]
    return (key[0], key[1] is None, key[1] or 0) + tuple(key[2:])


def _run_trial(corpus: Corpus, config: SimulationConfig, n: int, trial: int):
    rng = np.random.default_rng([config.seed, n, trial])
    midi_ids = sorted(corpus.queries)
    piece_ids = sorted(corpus.pieces)
    n_query = min(len(midi_ids), n, config.max_query_midis or len(midi_ids))
    chosen = sorted(rng.choice(len(midi_ids), size=n_query, replace=False).tolist())
    query_midis = [midi_ids[i] for i in chosen]
    required = sorted({corpus.truth[m] for m in query_midis})
    if len(required) > n:
        raise EvalConfigError(f"{len(required)} true pieces do not fit in a database of size {n}")
    required_set = set(required)
    others = [p for p in piece_ids if p not in required_set]
    fill = rng.choice(len(others), size=n - len(required), replace=False) if n > len(required) else []
    db_ids = sorted(required + [others[i] for i in fill])
    index = build_index([(p, corpus.pieces[p]) for p in db_ids], config.threshold)

    records = []
    for mid in query_midis:
        source = corpus.queries[mid]
        true_id = corpus.truth[mid]
        for length in config.query_lengths:
            for s in range(config.samples_per_midi):
                q = sample_query(source, length, rng)
                t0 = time.perf_counter()
                scores = search(index, q, config.smear).scores
                elapsed = time.perf_counter() - t0
                table = [scores[p] for p in db_ids]
                rec = {
                    "N": n, "L": length_label(length), "trial": trial, "midi": mid, "sample": s,
                    "piece": true_id, "rank": rank_of_true(db_ids, table, true_id),
                    "score": scores[true_id], "width": q.width,
                    "truncated": length is not None and source.width < length,
                    "seconds": elapsed,
                }
                if config.keep_scores:
                    rec["db"] = db_ids
                    rec["scores"] = table
                records.append(rec)
    return records, index.stats.to_dict()


def run_simulation(corpus: Corpus, config: SimulationConfig, jobs: int = 1) -> EvalReport:
    """Run the database-size / query-length sweep described by ``config``.

    Each trial draws a database of size N that contains the true piece of every
    query MIDI in the trial, builds a fresh index and ranks every sampled query.
    MRR per (N, L) is the mean over trials.
    """
    if not corpus.truth:
        raise EvalConfigError("corpus has no ground-truth MIDI/piece pairs")
    for n in config.db_sizes:
        if n > len(corpus.pieces):
            raise EvalConfigError(f"database size {n} exceeds corpus size {len(corpus.pieces)}")
    tasks = [(n, t) for n in config.db_sizes for t in range(config.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outputs = list(ex.map(_run_trial, [corpus] * len(tasks), [config] * len(tasks),
                                  [n for n, _ in tasks], [t for _, t in tasks]))
    else:
        outputs = [_run_trial(corpus, config, n, t) for n, t in tasks]

    report = EvalReport()
    for (n, t), (records, stats) in zip(tasks, outputs):
        report.queries.extend(records)
        report.index_stats[n] = stats
        log.info("N=%d trial=%d: %d queries", n, t, len(records))
    for n, t in tasks:
        for length in config.query_lengths:
            ranks = [q["rank"] for q in report.queries
                     if q["N"] == n and q["trial"] == t and q["L"] == length_label(length)]
            report.trial_mrr[(n, length, t)] = mrr(ranks)
    for n in config.db_sizes:
        for length in config.query_lengths:
            report.mrr[(n, length)] = float(np.mean([report.trial_mrr[(n, length, t)] for t in range(config.trials)]))
    report.mean_query_seconds = float(np.mean([q["seconds"] for q in report.queries]))
    report.truncated_queries = sum(q["truncated"] for q in report.queries)
    return report


def load_corpus(database_manifest: str | Path, ground_truth: str | Path,
                tolerance: float = DEFAULT_TOLERANCE) -> Corpus:
    """Sheet bootlegs from a database manifest and MIDI queries from a ground-truth file.

    MIDI ids are the MIDI paths as written in the ground-truth file.
    """
    pieces = {pid: load_bootleg(path) for pid, path in read_database_manifest(database_manifest)}
    queries, truth = {}, {}
    for raw, pid in read_manifest(ground_truth):
        if raw in truth:
            raise EvalConfigError(f"MIDI {raw!r} listed twice in {ground_truth}")
        feats = extract_midi_features(resolve(ground_truth, raw).read_bytes(), tolerance)
        queries[raw] = QueryBootlegPair(feats.sharp, feats.flat)
        truth[raw] = pid
    return Corpus(pieces, queries, truth)


@dataclass(frozen=True)
class EvalSetup:
    database: Path
    ground_truth: Path
    config: SimulationConfig
    tolerance: float
    output_prefix: Path


_REQUIRED = ("database", "ground_truth", "db_sizes")


def _optional_int(raw: str, key: str):
    if raw.lower() in ("none", "off", "inf"):
        return None
    return _int(raw, key)


def _int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise EvalConfigError(f"bad integer {raw!r} for {key}") from None


def _length(raw: str):
    if raw.lower() == "full":
        return FULL
    return _int(raw, "query_lengths")


def parse_eval_config(text: str, path: str | Path = "<config>") -> EvalSetup:
    """Evaluation config: ``key = value`` lines, relative paths resolve next to the config.

    Keys: database, ground_truth, db_sizes (comma list), query_lengths (comma
    list, ``full`` allowed), trials, samples_per_midi, seed, threshold
    (``none`` disables escalation), max_query_midis, smear, tolerance, output.
    """
    raw = parse_key_values(text, str(path))
    known = {"database", "ground_truth", "db_sizes", "query_lengths", "trials", "samples_per_midi", "seed",
             "threshold", "max_query_midis", "smear", "tolerance", "output"}
    for key, (_, lineno) in raw.items():
        if key not in known:
            raise EvalConfigError(f"{path}:{lineno}: unknown key {key!r}")
    for key in _REQUIRED:
        if key not in raw:
            raise EvalConfigError(f"{path}: missing required key {key!r}")
    get = lambda k, d=None: raw[k][0] if k in raw else d  # noqa: E731
    kw = {
        "db_sizes": tuple(_int(v.strip(), "db_sizes") for v in get("db_sizes").split(",") if v.strip()),
        "query_lengths": tuple(_length(v.strip()) for v in get("query_lengths", "full").split(",") if v.strip()),
        "trials": _int(get("trials", "10"), "trials"),
        "samples_per_midi": _int(get("samples_per_midi", "10"), "samples_per_midi"),
        "seed": _int(get("seed", "0"), "seed"),
        "threshold": _optional_int(get("threshold", str(DEFAULT_THRESHOLD)), "threshold"),
        "max_query_midis": _optional_int(get("max_query_midis", "none"), "max_query_midis"),
        "smear": _int(get("smear", "0"), "smear"),
    }
    try:
        tolerance = float(get("tolerance", str(DEFAULT_TOLERANCE)))
    except ValueError:
        raise EvalConfigError(f"bad number {get('tolerance')!r} for tolerance") from None
    base = Path(path)
    output = get("output", base.with_suffix("").name + ".report")
    return EvalSetup(resolve(base, get("database")), resolve(base, get("ground_truth")),
                     SimulationConfig(**kw), tolerance, resolve(base, output))


def load_eval_config(path: str | Path) -> EvalSetup:
    return parse_eval_config(Path(path).read_text(encoding="utf-8"), path)
