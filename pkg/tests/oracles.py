"""Independent reference implementations used to check the library.

These are written from the definitions, deliberately naive, and share no code
with the package beyond its public data types.
"""

from __future__ import annotations

from collections import Counter, defaultdict

import mido

SHARP_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
FLAT_NAMES = ["C", "Db", "D", "Eb", "E", "F", "Gb", "G", "Ab", "A", "Bb", "B"]
LETTER_ORDER = "CDEFGAB"


def _walk(start: tuple[str, int], stop: tuple[str, int]) -> list[tuple[str, int]]:
    """All letter-octave names from start to stop inclusive, stepping one letter at a time."""
    names = []
    letter, octave = start
    while True:
        names.append((letter, octave))
        if (letter, octave) == stop:
            return names
        i = LETTER_ORDER.index(letter) + 1
        if i == 7:
            i, octave = 0, octave + 1
        letter = LETTER_ORDER[i]


# staff position index -> letter-octave, built by walking each hand's range
POSITION_NAMES = _walk(("A", 0), ("G", 4)) + _walk(("E", 3), ("C", 8))


def enumerate_positions(pitch: int, mode: str) -> set[int]:
    """Staff positions for a MIDI pitch by spelling it and scanning every position name."""
    name = (SHARP_NAMES if mode == "sharp" else FLAT_NAMES)[pitch % 12]
    target = (name[0], pitch // 12 - 1)
    return {i for i, n in enumerate(POSITION_NAMES) if n == target}


def dict_index(db, threshold):
    """Two-pass escalating index over python dicts.

    Returns (singles, triplets, escalated, dropped) where singles maps a
    fingerprint and triplets a 3-tuple to sorted (piece, offset) lists.
    """
    freq = Counter()
    for _, score in db:
        freq.update(int(f) for f in score.fingerprints)
    escalated = {f for f, c in freq.items() if threshold is not None and c > threshold}
    singles, triplets, dropped = defaultdict(list), defaultdict(list), 0
    for pid, score in db:
        cols = [int(f) for f in score.fingerprints]
        for t, f in enumerate(cols):
            if f not in escalated:
                singles[f].append((pid, t))
            elif t + 2 < len(cols):
                triplets[(f, cols[t + 1], cols[t + 2])].append((pid, t))
            else:
                dropped += 1
    return ({k: sorted(v) for k, v in singles.items()}, {k: sorted(v) for k, v in triplets.items()},
            escalated, dropped)


def brute_rank(ids, scores, true_id) -> int:
    """Position of true_id after sorting by (score desc, id asc)."""
    order = sorted(zip(ids, scores), key=lambda e: (-e[1], e[0]))
    return [i for i, _ in order].index(true_id) + 1


def offset_histogram_scores(db, query_fps) -> dict:
    """Max bin of the offset-difference histogram per piece, by double loop."""
    out = {}
    for pid, score in db:
        ref = [int(f) for f in score.fingerprints]
        hist = Counter()
        for tr, fr in enumerate(ref):
            for tq, fq in enumerate(query_fps):
                if fr == fq:
                    hist[tr - tq] += 1
        out[pid] = max(hist.values(), default=0)
    return out


def mido_onsets(path) -> list[tuple[int, float]]:
    """(pitch, seconds) note-ons read with mido, skipping channel 10."""
    mf = mido.MidiFile(path)
    out, now = [], 0.0
    for msg in mf:  # iteration yields delta times in seconds with tempo applied
        now += msg.time
        if msg.type == "note_on" and msg.velocity > 0 and msg.channel != 9:
            out.append((msg.note, now))
    return sorted(out, key=lambda e: (e[1], e[0]))


def write_midi(path, notes, ticks_per_beat=480, tempos=(), fmt=1, channel=0):
    """Write a MIDI file: notes are (pitch, start_tick[, channel]); tempos are (tick, us_per_beat)."""
    mf = mido.MidiFile(type=fmt, ticks_per_beat=ticks_per_beat)
    events = []
    for tick, tempo in tempos:
        events.append((tick, 0, mido.MetaMessage("set_tempo", tempo=tempo, time=0)))
    for n in notes:
        pitch, start = n[0], n[1]
        ch = n[2] if len(n) > 2 else channel
        events.append((start, 2, mido.Message("note_on", note=pitch, velocity=80, channel=ch, time=0)))
        events.append((start + 120, 1, mido.Message("note_off", note=pitch, velocity=0, channel=ch, time=0)))
    events.sort(key=lambda e: (e[0], e[1]))
    track = mido.MidiTrack()
    last = 0
    for tick, _, msg in events:
        track.append(msg.copy(time=tick - last))
        last = tick
    mf.tracks.append(track)
    mf.save(path)
    return path
