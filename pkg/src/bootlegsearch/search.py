"""Offset-histogram search over the reverse index.

Every matching (t_ref, t_query) pair votes for bin ``t_ref - t_query`` of its
piece; the tallest bin is the piece's score. Both spellings of the MIDI query
are searched and a piece keeps the larger of its two scores.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .bootleg import BootlegScore, Variant
from .index import IndexKey, ReverseIndex


class EmptyQueryError(ValueError):
    pass


class MatchHit(NamedTuple):
    piece_id: Hashable
    t_ref: int
    t_query: int


@dataclass(frozen=True)
class QueryBootlegPair:
    sharp: BootlegScore
    flat: BootlegScore

    def __post_init__(self):
        if self.sharp.width != self.flat.width:
            raise ValueError(f"sharp/flat widths differ: {self.sharp.width} != {self.flat.width}")

    @classmethod
    def from_score(cls, score: BootlegScore) -> "QueryBootlegPair":
        """Use one score for both variants (e.g. a sheet-derived query)."""
        return cls(BootlegScore(score.fingerprints, Variant.SHARP), BootlegScore(score.fingerprints, Variant.FLAT))

    @property
    def width(self) -> int:
        return self.sharp.width

    def variants(self) -> tuple[BootlegScore, BootlegScore]:
        return self.sharp, self.flat

    def slice(self, start: int, stop: int) -> "QueryBootlegPair":
        return QueryBootlegPair(self.sharp.slice(start, stop), self.flat.slice(start, stop))


@dataclass
class RankedResult:
    """Pieces ordered by score (descending), ties by piece id ascending."""

    entries: list
    variant_scores: dict = field(default_factory=dict)
    best_offsets: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def scores(self) -> dict:
        return dict(self.entries)

    def top(self, k: int) -> list:
        return self.entries[:k]

    def rank_of(self, piece_id) -> int:
        for i, (pid, _) in enumerate(self.entries):
            if pid == piece_id:
                return i + 1
        raise KeyError(piece_id)

    def to_jsonl(self, k: int | None = None) -> str:
        rows = self.entries if k is None else self.entries[:k]
        return "".join(json.dumps({"rank": i + 1, "piece_id": pid, "score": int(s)}) + "\n"
                       for i, (pid, s) in enumerate(rows))


def rank_entries(piece_ids: Sequence, scores: Sequence[int]) -> list:
    """Sort (piece_id, score) pairs by score descending, then piece id."""
    return sorted(zip(piece_ids, (int(s) for s in scores)), key=lambda e: (-e[1], e[0]))


def _query_arrays(fps: np.ndarray, escalated: np.ndarray):
    fps = np.asarray(fps, dtype=np.uint64)
    n = fps.size
    if escalated.size:
        pos = np.minimum(np.searchsorted(escalated, fps), escalated.size - 1)
        esc = escalated[pos] == fps
    else:
        esc = np.zeros(n, dtype=bool)
    single_t = np.flatnonzero(~esc)
    trip_t = np.flatnonzero(esc)
    trip_t = trip_t[trip_t + 2 < n]
    trip_keys = np.stack([fps[trip_t], fps[trip_t + 1], fps[trip_t + 2]], axis=1) if trip_t.size else np.zeros((0, 3), np.uint64)
    return single_t, fps[single_t], trip_t, trip_keys


def query_keys(query: BootlegScore, escalated: Iterable[int]) -> list[tuple[IndexKey, int]]:
    """Keys a query emits, mirroring the escalation applied to the database."""
    esc = np.array(sorted(int(e) for e in escalated), dtype=np.uint64)
    single_t, single_fp, trip_t, trip_keys = _query_arrays(query.fingerprints, esc)
    out = [(IndexKey.single(f), int(t)) for t, f in zip(single_t, single_fp)]
    out += [(IndexKey.triplet(*k), int(t)) for t, k in zip(trip_t, trip_keys)]
    out.sort(key=lambda kt: kt[1])
    return out


def histogram_score(hits: Iterable[MatchHit], piece_id=None) -> int:
    """Largest bin of the (t_ref - t_query) histogram; 0 without hits."""
    diffs = Counter(h.t_ref - h.t_query for h in hits if piece_id is None or h.piece_id == piece_id)
    return max(diffs.values(), default=0)


def gather_hits(index: ReverseIndex, query: BootlegScore):
    """All (piece, t_ref, t_query) hits for one query variant as int64 arrays.

    Hits are unique by construction: each database column sits in exactly one
    key's postings and each query offset emits at most one key, so no
    (piece, t_ref, t_query) triple can be produced twice.
    """
    single_t, single_fp, trip_t, trip_keys = _query_arrays(query.fingerprints, index.escalated)
    qi, p1, r1 = index.gather_singles(single_fp)
    qj, p2, r2 = index.gather_triplets(trip_keys)
    piece = np.concatenate([p1, p2])
    t_ref = np.concatenate([r1, r2])
    t_query = np.concatenate([single_t[qi], trip_t[qj]]).astype(np.int64)
    return piece, t_ref, t_query


_DENSE_LIMIT = 1 << 26


def _bin_counts(bins: np.ndarray, n_bins: int):
    """Sorted occupied bins and their counts."""
    if n_bins <= _DENSE_LIMIT:
        counts = np.bincount(bins, minlength=n_bins)
        occupied = np.flatnonzero(counts)
        return occupied, counts[occupied]
    return np.unique(bins, return_counts=True)


def _score_variant(index: ReverseIndex, query: BootlegScore, smear: int = 0):
    n = index.n_pieces
    scores = np.zeros(n, dtype=np.int64)
    best = np.zeros(n, dtype=np.int64)
    piece, t_ref, t_query = gather_hits(index, query)
    if piece.size == 0:
        return scores, best
    # bin layout: piece-major, offset difference shifted to be >= smear
    shift = query.width + smear
    stride = int(index.widths.max()) + shift + smear + 1
    bins = piece * stride + (t_ref - t_query + shift)
    ub, counts = _bin_counts(bins, n * stride)
    if smear:
        total = counts.copy()
        for d in range(1, smear + 1):
            for sign in (-1, 1):
                nb = ub + sign * d
                pos = np.minimum(np.searchsorted(ub, nb), ub.size - 1)
                total += np.where(ub[pos] == nb, counts[pos], 0)
        counts = total
    # ub is sorted, so each piece owns one contiguous run of bins
    owner = ub // stride
    starts = np.flatnonzero(np.concatenate([[True], owner[1:] != owner[:-1]]))
    seg_max = np.maximum.reduceat(counts, starts)
    run = np.repeat(np.arange(starts.size), np.diff(np.append(starts, ub.size)))
    at_max = np.flatnonzero(counts == seg_max[run])
    # among equal counts the smallest offset (first bin of the run) wins
    first = at_max[np.concatenate([[True], run[at_max][1:] != run[at_max][:-1]])]
    scores[owner[first]] = counts[first]
    best[owner[first]] = ub[first] % stride - shift
    return scores, best


def search(index: ReverseIndex, query: QueryBootlegPair, smear: int = 0) -> RankedResult:
    """Rank every database piece for a MIDI query.

    ``smear`` adds the counts of the +-smear neighbouring bins (0 = exact bins).
    """
    if query.width == 0:
        raise EmptyQueryError("query bootleg score has width 0")
    per_variant = {}
    offsets = {}
    for score in query.variants():
        s, b = _score_variant(index, score, smear)
        per_variant[score.variant] = s
        offsets[score.variant] = b
    sharp, flat = per_variant[Variant.SHARP], per_variant[Variant.FLAT]
    final = np.maximum(sharp, flat)
    best = np.where(sharp >= flat, offsets[Variant.SHARP], offsets[Variant.FLAT])
    # piece_ids are stored sorted, so a stable sort on -score gives the tie order
    order = np.argsort(-final, kind="stable")
    ids = index.piece_ids
    return RankedResult(
        entries=[(ids[i], int(final[i])) for i in order],
        variant_scores={v.value: {ids[i]: int(s[i]) for i in range(len(ids))} for v, s in per_variant.items()},
        best_offsets={ids[i]: int(best[i]) for i in range(len(ids)) if final[i] > 0},
    )


def linear_scan_oracle(db: Sequence[tuple[Hashable, BootlegScore]], query: QueryBootlegPair) -> RankedResult:
    """Index-free reference scorer: enumerate every equal-fingerprint pair per piece."""
    if query.width == 0:
        raise EmptyQueryError("query bootleg score has width 0")
    variant_scores = {}
    for variant in query.variants():
        where = defaultdict(list)
        for t, f in enumerate(variant.fingerprints.tolist()):
            where[f].append(t)
        per_piece = {}
        for pid, ref in db:
            diffs = Counter()
            for t_ref, f in enumerate(ref.fingerprints.tolist()):
                for t_q in where.get(f, ()):
                    diffs[t_ref - t_q] += 1
            per_piece[pid] = max(diffs.values(), default=0)
        variant_scores[variant.variant.value] = per_piece
    ids = [pid for pid, _ in db]
    final = [max(variant_scores["sharp"][p], variant_scores["flat"][p]) for p in ids]
    return RankedResult(entries=rank_entries(ids, final), variant_scores=variant_scores)


def combine_rankings(results: Sequence[RankedResult]) -> RankedResult:
    """Max score per piece across several rankings (e.g. query segments)."""
    best: dict = {}
    for r in results:
        for pid, s in r.entries:
            best[pid] = max(best.get(pid, 0), s)
    ids = list(best)
    return RankedResult(entries=rank_entries(ids, [best[p] for p in ids]))
