"""Reverse index over bootleg fingerprints with triplet escalation.

Postings are held in CSR form: sorted key arrays, an ``indptr`` array and
parallel (piece, offset) arrays, which keeps build and lookup vectorised and
makes the on-disk format a straight dump of the arrays.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .bootleg import BootlegScore, pack_column, unpack_fingerprint  # noqa: F401  (re-exported)
from .fileio import atomic_write_bytes

DEFAULT_THRESHOLD = 8000
INDEX_MAGIC = b"BLIX"
INDEX_VERSION = 1
_NO_THRESHOLD = 0xFFFFFFFFFFFFFFFF


class IndexBuildError(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


class KeyKind(Enum):
    SINGLE = 1
    TRIPLET = 3


class IndexKey(NamedTuple):
    kind: KeyKind
    fingerprints: tuple

    @classmethod
    def single(cls, fp: int) -> "IndexKey":
        return cls(KeyKind.SINGLE, (int(fp),))

    @classmethod
    def triplet(cls, a: int, b: int, c: int) -> "IndexKey":
        return cls(KeyKind.TRIPLET, (int(a), int(b), int(c)))


class Posting(NamedTuple):
    piece_id: Hashable
    offset: int


@dataclass(frozen=True)
class IndexStats:
    total_columns: int = 0
    distinct_fingerprints: int = 0
    singleton_count: int = 0
    max_frequency: int = 0
    threshold: int | None = None
    escalated_count: int = 0
    unique_single_keys: int = 0
    unique_triplet_keys: int = 0
    single_postings: int = 0
    triplet_postings: int = 0
    dropped_tail: int = 0
    frequency_histogram: dict = field(default_factory=dict)

    @property
    def unique_keys(self) -> int:
        return self.unique_single_keys + self.unique_triplet_keys

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frequency_histogram"] = {str(k): v for k, v in sorted(self.frequency_histogram.items())}
        d["unique_keys"] = self.unique_keys
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IndexStats":
        d = dict(d)
        d.pop("unique_keys", None)
        d["frequency_histogram"] = {int(k): v for k, v in d.get("frequency_histogram", {}).items()}
        return cls(**d)


def triplet_view(keys: np.ndarray) -> np.ndarray:
    """View (K, 3) fingerprints as 24-byte records that sort lexicographically."""
    k = np.ascontiguousarray(np.asarray(keys, dtype=np.uint64).reshape(-1, 3).astype(">u8"))
    return k.view("V24").reshape(-1)


def _gather(keys_found: np.ndarray, starts: np.ndarray, stops: np.ndarray,
            pieces: np.ndarray, offsets: np.ndarray):
    counts = stops - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    owner = np.repeat(keys_found, counts)
    base = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    idx = base + np.arange(total)
    return owner, pieces[idx].astype(np.int64), offsets[idx].astype(np.int64)


@dataclass(frozen=True, eq=False)
class ReverseIndex:
    """Immutable fingerprint -> postings map. Build with :func:`build_index`."""

    piece_ids: tuple
    widths: np.ndarray
    threshold: int | None
    escalated: np.ndarray
    single_keys: np.ndarray
    single_indptr: np.ndarray
    single_pieces: np.ndarray
    single_offsets: np.ndarray
    triplet_keys: np.ndarray
    triplet_indptr: np.ndarray
    triplet_pieces: np.ndarray
    triplet_offsets: np.ndarray
    stats: IndexStats

    @property
    def n_pieces(self) -> int:
        return len(self.piece_ids)

    @property
    def escalated_set(self) -> frozenset:
        return frozenset(int(v) for v in self.escalated)

    def is_escalated(self, fps: np.ndarray) -> np.ndarray:
        fps = np.asarray(fps, dtype=np.uint64)
        if self.escalated.size == 0:
            return np.zeros(fps.shape, dtype=bool)
        pos = np.searchsorted(self.escalated, fps)
        pos = np.minimum(pos, self.escalated.size - 1)
        return self.escalated[pos] == fps

    def gather_singles(self, fps: np.ndarray):
        """Postings for every query fingerprint.

        Returns parallel arrays ``(query_index, piece, offset)`` where
        ``query_index`` points back into ``fps``.
        """
        fps = np.asarray(fps, dtype=np.uint64)
        if self.single_keys.size == 0 or fps.size == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e
        pos = np.searchsorted(self.single_keys, fps)
        hit = pos < self.single_keys.size
        hit[hit] = self.single_keys[pos[hit]] == fps[hit]
        q = np.flatnonzero(hit)
        k = pos[q]
        return _gather(q, self.single_indptr[k], self.single_indptr[k + 1], self.single_pieces, self.single_offsets)

    def gather_triplets(self, keys: np.ndarray):
        keys = np.asarray(keys, dtype=np.uint64).reshape(-1, 3)
        if self.triplet_keys.shape[0] == 0 or keys.shape[0] == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e
        table = triplet_view(self.triplet_keys)
        probe = triplet_view(keys)
        pos = np.searchsorted(table, probe)
        hit = pos < table.size
        hit[hit] = table[pos[hit]] == probe[hit]
        q = np.flatnonzero(hit)
        k = pos[q]
        return _gather(q, self.triplet_indptr[k], self.triplet_indptr[k + 1], self.triplet_pieces, self.triplet_offsets)

    def lookup(self, key: IndexKey) -> list[Posting]:
        return lookup(self, key)

    def single_frequencies(self) -> dict:
        """Postings length per single key (for invariant checks)."""
        return dict(zip((int(k) for k in self.single_keys), np.diff(self.single_indptr).tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReverseIndex):
            return NotImplemented
        arrays = ("widths", "escalated", "single_keys", "single_indptr", "single_pieces", "single_offsets",
                  "triplet_keys", "triplet_indptr", "triplet_pieces", "triplet_offsets")
        return (self.piece_ids == other.piece_ids and self.threshold == other.threshold
                and self.stats == other.stats
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays))


def _csr(sorted_keys_eq_prev: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Group boundaries of a sorted key sequence: returns (first index per group, indptr)."""
    starts = np.flatnonzero(~sorted_keys_eq_prev[:n])
    indptr = np.concatenate([starts, [n]]).astype(np.int64)
    return starts, indptr


def _normalise_threshold(threshold) -> int | None:
    if threshold is None or (isinstance(threshold, float) and math.isinf(threshold)):
        return None
    threshold = int(threshold)
    if threshold < 1:
        raise IndexBuildError(f"escalation threshold must be >= 1, got {threshold}")
    return threshold


def build_index(db: Sequence[tuple[Hashable, BootlegScore]], threshold: int | float | None = DEFAULT_THRESHOLD) -> ReverseIndex:
    """Build the reverse index over ``(piece_id, bootleg)`` pairs.

    Fingerprints that occur more than ``threshold`` times in the whole
    database are escalated: their single postings are removed and each
    occurrence at offset t is re-keyed by the triplet (f_t, f_t+1, f_t+2),
    keeping offset t. Occurrences without two following columns are dropped.
    ``threshold=None`` (or ``math.inf``) disables escalation.
    """
    threshold = _normalise_threshold(threshold)
    ids = [pid for pid, _ in db]
    if len(set(ids)) != len(ids):
        seen, dup = set(), None
        for pid in ids:
            if pid in seen:
                dup = pid
                break
            seen.add(pid)
        raise IndexBuildError(f"duplicate piece id {dup!r}")
    try:
        order = sorted(range(len(ids)), key=lambda i: ids[i])
    except TypeError as exc:
        raise IndexBuildError("piece ids must be mutually orderable") from exc
    piece_ids = tuple(ids[i] for i in order)
    scores = [db[i][1] for i in order]
    widths = np.array([s.width for s in scores], dtype=np.int64)

    n = int(widths.sum())
    fps = np.concatenate([s.fingerprints for s in scores]) if scores else np.zeros(0, dtype=np.uint64)
    fps = fps.astype(np.uint64)
    pieces = np.repeat(np.arange(len(scores), dtype=np.int64), widths)
    piece_start = (np.cumsum(widths) - widths).astype(np.int64)
    offsets = np.arange(n, dtype=np.int64) - np.repeat(piece_start, widths)

    uniq, counts = np.unique(fps, return_counts=True)
    escalated = uniq[counts > threshold] if threshold is not None else np.zeros(0, dtype=np.uint64)
    if escalated.size:
        pos = np.minimum(np.searchsorted(escalated, fps), escalated.size - 1)
        is_esc = escalated[pos] == fps
    else:
        is_esc = np.zeros(n, dtype=bool)

    # single keys: stable sort on fingerprint keeps (piece, offset) order inside each key
    sel = np.flatnonzero(~is_esc)
    o = np.argsort(fps[sel], kind="stable")
    s_fp = fps[sel][o]
    s_starts, s_indptr = _csr(np.concatenate([[False], s_fp[1:] == s_fp[:-1]]), s_fp.size)
    single_keys = s_fp[s_starts]
    single_pieces = pieces[sel][o].astype(np.uint32)
    single_offsets = offsets[sel][o].astype(np.uint32)

    # triplet keys for escalated occurrences with two following columns
    esc_idx = np.flatnonzero(is_esc)
    has_tail = offsets[esc_idx] + 2 < widths[pieces[esc_idx]]
    dropped = int((~has_tail).sum())
    t_idx = esc_idx[has_tail]
    t_keys = np.stack([fps[t_idx], fps[t_idx + 1], fps[t_idx + 2]], axis=1) if t_idx.size else np.zeros((0, 3), np.uint64)
    o = np.lexsort((offsets[t_idx], pieces[t_idx], t_keys[:, 2], t_keys[:, 1], t_keys[:, 0])) if t_idx.size else np.zeros(0, np.int64)
    t_keys = t_keys[o]
    tv = triplet_view(t_keys)
    t_starts, t_indptr = _csr(np.concatenate([[False], tv[1:] == tv[:-1]]) if tv.size else np.zeros(0, bool), tv.size)
    triplet_keys = t_keys[t_starts].reshape(-1, 3)
    triplet_pieces = pieces[t_idx][o].astype(np.uint32)
    triplet_offsets = offsets[t_idx][o].astype(np.uint32)

    freq_values, freq_counts = np.unique(counts, return_counts=True)
    stats = IndexStats(
        total_columns=n,
        distinct_fingerprints=int(uniq.size),
        singleton_count=int((counts == 1).sum()),
        max_frequency=int(counts.max()) if counts.size else 0,
        threshold=threshold,
        escalated_count=int(escalated.size),
        unique_single_keys=int(single_keys.size),
        unique_triplet_keys=int(triplet_keys.shape[0]),
        single_postings=int(s_fp.size),
        triplet_postings=int(t_keys.shape[0]),
        dropped_tail=dropped,
        frequency_histogram={int(f): int(c) for f, c in zip(freq_values, freq_counts)},
    )
    return ReverseIndex(
        piece_ids=piece_ids,
        widths=widths,
        threshold=threshold,
        escalated=escalated.astype(np.uint64),
        single_keys=single_keys.astype(np.uint64),
        single_indptr=s_indptr,
        single_pieces=single_pieces,
        single_offsets=single_offsets,
        triplet_keys=triplet_keys.astype(np.uint64),
        triplet_indptr=t_indptr,
        triplet_pieces=triplet_pieces,
        triplet_offsets=triplet_offsets,
        stats=stats,
    )


def lookup(index: ReverseIndex, key: IndexKey) -> list[Posting]:
    """Stored postings for ``key``; unseen keys give an empty list."""
    if key.kind is KeyKind.SINGLE:
        _, p, o = index.gather_singles(np.array(key.fingerprints, dtype=np.uint64))
    else:
        _, p, o = index.gather_triplets(np.array([key.fingerprints], dtype=np.uint64))
    return [Posting(index.piece_ids[i], int(t)) for i, t in zip(p, o)]


# -- serialisation -----------------------------------------------------------

def _u64(x: int) -> bytes:
    return struct.pack("<Q", x)


def _json_block(obj) -> bytes:
    raw = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _postings_block(keys: np.ndarray, indptr: np.ndarray, pieces: np.ndarray, offsets: np.ndarray) -> bytes:
    k = keys.shape[0]
    m = pieces.shape[0]
    return b"".join([
        _u64(k), _u64(m),
        keys.astype("<u8").tobytes(),
        indptr.astype("<u8").tobytes(),
        pieces.astype("<u4").tobytes(),
        offsets.astype("<u4").tobytes(),
    ])


def encode_index(index: ReverseIndex) -> bytes:
    body = b"".join([
        _json_block(list(index.piece_ids)),
        _u64(index.n_pieces), index.widths.astype("<u8").tobytes(),
        _u64(_NO_THRESHOLD if index.threshold is None else index.threshold),
        _u64(index.escalated.size), index.escalated.astype("<u8").tobytes(),
        _postings_block(index.single_keys, index.single_indptr, index.single_pieces, index.single_offsets),
        _postings_block(index.triplet_keys, index.triplet_indptr, index.triplet_pieces, index.triplet_offsets),
        _json_block(index.stats.to_dict()),
    ])
    head = INDEX_MAGIC + struct.pack("<IQ", INDEX_VERSION, len(body))
    payload = head + body
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, data: bytes, pos: int, end: int):
        self.data, self.pos, self.end = data, pos, end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise IndexFormatError("truncated index body")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(size), dtype=dtype).copy()

    def json(self):
        (n,) = struct.unpack("<I", self.take(4))
        return json.loads(self.take(n).decode("utf-8"))

    def postings(self, width: int):
        k, m = self.u64(), self.u64()
        keys = self.array("<u8", k * width).astype(np.uint64)
        indptr = self.array("<u8", k + 1).astype(np.int64)
        pieces = self.array("<u4", m).astype(np.uint32)
        offsets = self.array("<u4", m).astype(np.uint32)
        if width == 3:
            keys = keys.reshape(-1, 3)
        return keys, indptr, pieces, offsets


def decode_index(data: bytes) -> ReverseIndex:
    if len(data) < 4 or data[:4] != INDEX_MAGIC:
        raise IndexFormatError("bad magic bytes: not a bootleg index file")
    if len(data) < 16:
        raise IndexFormatError("truncated index header")
    version, body_len = struct.unpack_from("<IQ", data, 4)
    if version != INDEX_VERSION:
        raise IndexFormatError(f"index format version mismatch: file has {version}, expected {INDEX_VERSION}")
    end = 16 + body_len
    if len(data) < end + 4:
        raise IndexFormatError(f"truncated index file: expected {end + 4} bytes, got {len(data)}")
    if len(data) > end + 4:
        raise IndexFormatError("trailing bytes after index checksum")
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(data[:end]) & 0xFFFFFFFF != crc:
        raise IndexFormatError("checksum failure: index file is corrupted")
    r = _Reader(data, 16, end)
    piece_ids = tuple(r.json())
    widths = r.array("<u8", r.u64()).astype(np.int64)
    th = r.u64()
    escalated = r.array("<u8", r.u64()).astype(np.uint64)
    singles = r.postings(1)
    triplets = r.postings(3)
    stats = IndexStats.from_dict(r.json())
    if r.pos != end:
        raise IndexFormatError("index body has unexpected trailing data")
    return ReverseIndex(piece_ids, widths, None if th == _NO_THRESHOLD else int(th), escalated,
                        *singles, *triplets, stats)


def save_index(path: str | Path, index: ReverseIndex) -> None:
    atomic_write_bytes(path, encode_index(index))


def load_index(path: str | Path) -> ReverseIndex:
    return decode_index(Path(path).read_bytes())
