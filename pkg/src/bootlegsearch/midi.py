"""MIDI ingestion and projection of note events onto sharp/flat bootleg scores."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bootleg import LETTERS, BootlegScore, Variant, lh_position, rh_position

DEFAULT_TOLERANCE = 0.05
DEFAULT_TEMPO = 500_000  # microseconds per quarter note (120 BPM)
PERCUSSION_CHANNEL = 9
PIANO_LOW, PIANO_HIGH = 21, 108

# white-key pitch class -> letter index into LETTERS
_WHITE = {0: 0, 2: 1, 4: 2, 5: 3, 7: 4, 9: 5, 11: 6}
_DATA_LENGTH = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


class AccidentalMode(Enum):
    SHARP = "sharp"
    FLAT = "flat"

    @property
    def variant(self) -> Variant:
        return Variant.SHARP if self is AccidentalMode.SHARP else Variant.FLAT


class MidiParseError(ValueError):
    """Malformed MIDI data; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedMidiFormat(MidiParseError):
    pass


class PitchRangeError(ValueError):
    pass


class NoteOnset(NamedTuple):
    pitch: int
    onset_time: float


class NoteEvent(NamedTuple):
    event_time: float
    pitches: frozenset


def _read_varlen(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for i in range(4):
        if pos >= end:
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos)


def _parse_track(data: bytes, pos: int, end: int, onsets: list, tempos: list, track_no: int) -> None:
    tick = 0
    running = None
    seq = 0
    while pos < end:
        delta, pos = _read_varlen(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiParseError("truncated event", pos)
        status = data[pos]
        if status == 0xFF:
            if pos + 1 >= end:
                raise MidiParseError("truncated meta event", pos)
            meta_type = data[pos + 1]
            length, body = _read_varlen(data, pos + 2, end)
            if body + length > end:
                raise MidiParseError("meta event runs past end of track", pos)
            if meta_type == 0x51:
                if length != 3:
                    raise MidiParseError("set-tempo event with length != 3", pos)
                usec = int.from_bytes(data[body:body + 3], "big")
                if usec == 0:
                    raise MidiParseError("zero tempo", pos)
                tempos.append((tick, track_no, seq, usec))
                seq += 1
            pos = body + length
            if meta_type == 0x2F:
                return
            continue
        if status in (0xF0, 0xF7):
            length, body = _read_varlen(data, pos + 1, end)
            if body + length > end:
                raise MidiParseError("sysex event runs past end of track", pos)
            pos = body + length
            continue
        if status & 0x80:
            if status >= 0xF0:
                raise MidiParseError(f"unexpected status byte 0x{status:02X}", pos)
            running = status
            pos += 1
        elif running is None:
            raise MidiParseError("data byte without running status", pos)
        n = _DATA_LENGTH[running & 0xF0]
        if pos + n > end:
            raise MidiParseError("truncated channel message", pos)
        args = data[pos:pos + n]
        if any(b & 0x80 for b in args):
            raise MidiParseError("status byte inside channel message data", pos)
        if (running & 0xF0) == 0x90 and args[1] > 0 and (running & 0x0F) != PERCUSSION_CHANNEL:
            onsets.append((tick, args[0]))
        pos += n


def _ticks_to_seconds(ticks: np.ndarray, division: int, tempos: list) -> np.ndarray:
    if division & 0x8000:
        fps = 256 - (division >> 8)
        ticks_per_frame = division & 0xFF
        return ticks / float(fps * ticks_per_frame)
    if division == 0:
        raise MidiParseError("zero ticks per quarter note", 12)
    # tempo changes in time order; later events at the same tick win
    tempos = sorted(tempos)
    change_ticks = [0]
    usecs = [DEFAULT_TEMPO]
    for tick, _, _, usec in tempos:
        if tick == change_ticks[-1]:
            usecs[-1] = usec
        else:
            change_ticks.append(tick)
            usecs.append(usec)
    change_ticks = np.asarray(change_ticks, dtype=np.float64)
    sec_per_tick = np.asarray(usecs, dtype=np.float64) / 1e6 / division
    seg_start = np.concatenate([[0.0], np.cumsum(np.diff(change_ticks) * sec_per_tick[:-1])])
    seg = np.searchsorted(change_ticks, ticks, side="right") - 1
    return seg_start[seg] + (ticks - change_ticks[seg]) * sec_per_tick[seg]


def parse_midi(data: bytes) -> list[NoteOnset]:
    """Extract every note-on (velocity > 0) from a format 0/1 standard MIDI file.

    Ticks are converted to seconds with the piecewise tempo map built from all
    set-tempo meta events (120 BPM before the first one). Channel 10 is
    treated as percussion and skipped. The result is sorted by onset time,
    then pitch.
    """
    data = bytes(data)
    if data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    if len(data) < 14:
        raise MidiParseError("truncated MThd header", len(data))
    (header_len,) = struct.unpack(">I", data[4:8])
    if header_len < 6 or 8 + header_len > len(data):
        raise MidiParseError("bad header length", 4)
    fmt, ntracks, division = struct.unpack(">HHH", data[8:14])
    if fmt == 2:
        raise UnsupportedMidiFormat("MIDI format 2 is not supported", 8)
    if fmt > 2:
        raise MidiParseError(f"unknown MIDI format {fmt}", 8)

    onsets: list = []
    tempos: list = []
    pos = 8 + header_len
    found = 0
    while found < ntracks:
        if pos + 8 > len(data):
            raise MidiParseError(f"truncated file: expected {ntracks} tracks, found {found}", pos)
        chunk_type = data[pos:pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = pos + 8
        if body + length > len(data):
            raise MidiParseError("chunk runs past end of file", pos)
        if chunk_type == b"MTrk":
            _parse_track(data, body, body + length, onsets, tempos, found)
            found += 1
        pos = body + length

    if not onsets:
        return []
    ticks = np.array([t for t, _ in onsets], dtype=np.float64)
    times = _ticks_to_seconds(ticks, division, tempos)
    result = [NoteOnset(int(p), float(t)) for (_, p), t in zip(onsets, times)]
    result.sort(key=lambda o: (o.onset_time, o.pitch))
    return result


def read_midi(path: str | Path) -> list[NoteOnset]:
    return parse_midi(Path(path).read_bytes())


def group_note_events(onsets: Sequence[NoteOnset], tolerance: float = DEFAULT_TOLERANCE) -> list[NoteEvent]:
    """Greedily group time-sorted onsets into note events.

    An onset joins the open event when it lies within ``tolerance`` seconds of
    that event's *first* onset; otherwise it opens a new event.
    """
    events = []
    anchor = None
    pitches: set = set()
    for onset in onsets:
        if anchor is not None and onset.onset_time - anchor <= tolerance + 1e-9:
            pitches.add(onset.pitch)
            continue
        if anchor is not None:
            events.append(NoteEvent(anchor, frozenset(pitches)))
        anchor = onset.onset_time
        pitches = {onset.pitch}
    if anchor is not None:
        events.append(NoteEvent(anchor, frozenset(pitches)))
    return events


def spell_pitch(pitch: int, mode: AccidentalMode) -> int:
    """Diatonic step (octave * 7 + letter) of the notehead used for ``pitch``."""
    octave, pc = divmod(pitch, 12)
    octave -= 1
    if pc not in _WHITE:
        pc = pc - 1 if mode is AccidentalMode.SHARP else pc + 1
    return octave * 7 + _WHITE[pc]


def project_pitch(pitch: int, mode: AccidentalMode) -> frozenset:
    """Staff positions at which ``pitch`` is drawn under the given spelling.

    Notes in the middle register (E3..G4) land in both hands.
    """
    if not PIANO_LOW <= pitch <= PIANO_HIGH:
        raise PitchRangeError(f"pitch {pitch} outside piano range {PIANO_LOW}..{PIANO_HIGH}")
    step = spell_pitch(pitch, mode)
    return frozenset(p for p in (lh_position(step), rh_position(step)) if p is not None)


def _mask_table(mode: AccidentalMode) -> list[int]:
    table = [0] * 128
    for pitch in range(PIANO_LOW, PIANO_HIGH + 1):
        for pos in project_pitch(pitch, mode):
            table[pitch] |= 1 << pos
    return table


_MASKS = {mode: _mask_table(mode) for mode in AccidentalMode}


def midi_to_bootleg(events: Iterable[NoteEvent], mode: AccidentalMode) -> BootlegScore:
    """One column per note event; events with no piano-range pitch are dropped."""
    table = _MASKS[mode]
    cols = []
    for event in events:
        value = 0
        for p in event.pitches:
            value |= table[p] if 0 <= p < 128 else 0
        if value:
            cols.append(value)
    return BootlegScore(np.array(cols, dtype=np.uint64), mode.variant)


def count_out_of_range(events: Iterable[NoteEvent]) -> int:
    return sum(1 for e in events for p in e.pitches if not PIANO_LOW <= p <= PIANO_HIGH)


@dataclass(frozen=True)
class MidiFeatures:
    sharp: BootlegScore
    flat: BootlegScore
    n_onsets: int
    n_events: int
    dropped_pitches: int

    @property
    def width(self) -> int:
        return self.sharp.width

    def stats(self) -> dict:
        return {
            "width": self.width,
            "onsets": self.n_onsets,
            "events": self.n_events,
            "dropped_pitches": self.dropped_pitches,
        }


def extract_midi_features(data: bytes, tolerance: float = DEFAULT_TOLERANCE) -> MidiFeatures:
    """Full MIDI side of the pipeline: parse, group, project both spellings."""
    onsets = parse_midi(data)
    events = group_note_events(onsets, tolerance)
    return MidiFeatures(
        sharp=midi_to_bootleg(events, AccidentalMode.SHARP),
        flat=midi_to_bootleg(events, AccidentalMode.FLAT),
        n_onsets=len(onsets),
        n_events=len(events),
        dropped_pitches=count_out_of_range(events),
    )


def spelled_name(pitch: int, mode: AccidentalMode) -> str:
    step = spell_pitch(pitch, mode)
    return f"{LETTERS[step % 7]}{step // 7}"
