"""Project detected noteheads onto grand staves and collapse them into bootleg columns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..bootleg import LH_SIZE, N_POSITIONS, RH_OFFSET, BootlegScore, Variant, mirror_position
from .noteheads import NoteheadBlob
from .params import DEFAULTS, SheetHyperparams
from .preprocess import NoStaffDetected, PageError
from .staff import BarlineFeatures, Staff, StaffLineFeatures, local_staff, locate_staves

# row of the middle staff line within each hand block
RH_MIDDLE_ROW = RH_OFFSET + 11
LH_MIDDLE_ROW = 17


class StaffPairingError(PageError):
    pass


@dataclass
class PlacedNote:
    blob: NoteheadBlob
    staff: int
    position: int
    row: int
    clamped: bool


@dataclass
class PageProjection:
    score: BootlegScore
    staves: list
    systems: list
    notes: list
    columns: list
    stats: dict = field(default_factory=dict)


def staff_position(y: float, center: float, spacing: float) -> int:
    """Half-spaces above the middle line, rounded to nearest with ties toward the line."""
    v = (center - y) / (spacing / 2)
    return int(np.sign(v) * np.ceil(abs(v) - 0.5))


def position_row(position: int, upper: bool) -> tuple[int, bool]:
    """Bootleg row for a staff position, clamped into the hand's block."""
    if upper:
        row, lo, hi = RH_MIDDLE_ROW + position, RH_OFFSET, N_POSITIONS - 1
    else:
        row, lo, hi = LH_MIDDLE_ROW + position, 0, LH_SIZE - 1
    clamped = min(max(row, lo), hi)
    return clamped, clamped != row


def pair_staves(staves: list[Staff], barlines: BarlineFeatures, params: SheetHyperparams = DEFAULTS) -> list[tuple[int, int, bool]]:
    """Pair consecutive staves into grand staves.

    Returns (upper, lower, confirmed) triples; a pair is confirmed when barline
    rows cover most of the span between the two staves.
    """
    if len(staves) % 2:
        rows = ", ".join(f"{s.center:.1f}" for s in staves)
        raise StaffPairingError(f"odd number of staves ({len(staves)}) at rows {rows}")
    rs = barlines.row_sums
    peak = rs.max() if rs.size else 0.0
    pairs = []
    for i in range(0, len(staves), 2):
        top, bot = staves[i], staves[i + 1]
        lo, hi = int(round(top.top)), int(round(bot.bottom)) + 1
        span = rs[max(lo, 0):min(hi, rs.size)]
        ok = bool(peak > 0 and span.size and
                  np.mean(span >= params.barline_min_row_mass * peak) >= params.barline_span_fraction)
        pairs.append((i, i + 1, ok))
    return pairs


def merge_columns(xs: np.ndarray, width: float) -> list[np.ndarray]:
    """Group x-sorted indices; a group spans at most ``width`` from its first member."""
    order = np.argsort(xs, kind="stable")
    groups, cur, anchor = [], [], None
    for i in order:
        if cur and xs[i] - anchor <= width:
            cur.append(i)
        else:
            if cur:
                groups.append(np.array(cur))
            cur, anchor = [i], xs[i]
    if cur:
        groups.append(np.array(cur))
    return groups


def _column_bits(rows) -> int:
    bits = 0
    for r in rows:
        bits |= 1 << r
        m = mirror_position(r)
        if m is not None:
            bits |= 1 << m
    return bits


def project_page_details(blobs: list[NoteheadBlob], staff_features: StaffLineFeatures,
                         barline_features: BarlineFeatures,
                         params: SheetHyperparams = DEFAULTS) -> PageProjection:
    staves = locate_staves(staff_features, params)
    if not blobs:
        return PageProjection(BootlegScore.empty(Variant.SHEET), staves, [], [], [],
                              {"blobs": 0, "staves": len(staves), "systems": 0, "columns": 0})
    if len(staves) < params.min_staves:
        raise NoStaffDetected(f"found {len(staves)} staves, need at least {params.min_staves}")
    pairs = pair_staves(staves, barline_features, params)
    systems = [(u, l) for u, l, ok in pairs if ok]
    system_of = {}
    for k, (u, l) in enumerate(systems):
        system_of[u] = (k, True)
        system_of[l] = (k, False)

    centers = np.array([s.center for s in staves])
    placed = [[] for _ in systems]
    notes = []
    unpaired = clamped = 0
    for blob in blobs:
        si = int(np.argmin(np.abs(centers - blob.center_y)))
        if si not in system_of:
            unpaired += 1
            continue
        k, upper = system_of[si]
        c, s = local_staff(staff_features, staves[si], blob.center_x, params)
        pos = staff_position(blob.center_y, c, s)
        row, was_clamped = position_row(pos, upper)
        clamped += was_clamped
        note = PlacedNote(blob, si, pos, row, was_clamped)
        notes.append(note)
        placed[k].append(note)

    columns, fps = [], []
    width = params.column_merge_factor * params.canonical_spacing
    for k, sys_notes in enumerate(placed):
        if not sys_notes:
            continue
        xs = np.array([n.blob.center_x for n in sys_notes])
        for group in merge_columns(xs, width):
            members = [sys_notes[i] for i in group]
            columns.append((k, members))
            fps.append(_column_bits(n.row for n in members))
    score = BootlegScore(np.array(fps, dtype=np.uint64), Variant.SHEET)
    stats = {"blobs": len(blobs), "staves": len(staves), "systems": len(systems),
             "unconfirmed_pairs": len(pairs) - len(systems), "unpaired_blobs": unpaired,
             "clamped": clamped, "columns": len(fps)}
    return PageProjection(score, staves, systems, notes, columns, stats)


def project_page(blobs: list[NoteheadBlob], staff_features: StaffLineFeatures,
                 barline_features: BarlineFeatures, params: SheetHyperparams = DEFAULTS) -> BootlegScore:
    """Bootleg fragment for one page: systems top to bottom, columns left to right.

    Raises :class:`NoStaffDetected` with too few staves and
    :class:`StaffPairingError` when staves cannot be paired.
    """
    return project_page_details(blobs, staff_features, barline_features, params).score
