"""Synthetic piano-like corpora for exercising search and evaluation.

Pieces are generated as note-event sequences, so the MIDI side carries real
sharp/flat ambiguity. The "sheet" side of a piece is its MIDI bootleg in the
spelling of the piece's key, optionally degraded by a noise model that
imitates missed and spurious notehead detections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bootleg import N_POSITIONS, BootlegScore, Variant
from .midi import AccidentalMode, NoteEvent, midi_to_bootleg
from .search import QueryBootlegPair

_MAJOR = np.array([0, 2, 4, 5, 7, 9, 11])
_SHARP_KEYS = [0, 7, 2, 9, 4, 11]  # C G D A E B
_FLAT_KEYS = [5, 10, 3, 8, 1]  # F Bb Eb Ab Db


@dataclass(frozen=True)
class NoiseModel:
    """Column deletion with probability ``p_del``; surviving columns are
    corrupted with probability ``p_flip`` by flipping ``k`` random bits."""

    p_del: float = 0.1
    p_flip: float = 0.1
    k: int = 1

    def apply(self, score: BootlegScore, rng: np.random.Generator) -> BootlegScore:
        fps = score.fingerprints.copy()
        keep = rng.random(fps.size) >= self.p_del
        flip = rng.random(fps.size) < self.p_flip
        for i in np.flatnonzero(flip & keep):
            bits = rng.choice(N_POSITIONS, size=self.k, replace=False)
            mask = 0
            for b in bits:
                mask |= 1 << int(b)
            fps[i] = np.uint64(int(fps[i]) ^ mask)
        fps = fps[keep]
        return BootlegScore(fps[fps != 0], score.variant)


CLEAN = NoiseModel(0.0, 0.0, 0)


def _scale_pitches(tonic: int) -> np.ndarray:
    return np.array(sorted(p for p in range(21, 109) if (p - tonic) % 12 in _MAJOR))


def random_events(n_events: int, rng: np.random.Generator, tonic: int = 0, chromatic: float = 0.05) -> list[NoteEvent]:
    """Random two-hand texture: a melodic right hand over a sparser left hand."""
    scale = _scale_pitches(tonic)
    rh_idx = int(np.searchsorted(scale, 72))
    lh_idx = int(np.searchsorted(scale, 48))
    events = []
    t = 0.0
    for _ in range(n_events):
        pitches = set()
        kind = rng.random()
        if kind < 0.8:  # right hand
            rh_idx = int(np.clip(rh_idx + rng.integers(-3, 4), np.searchsorted(scale, 57), np.searchsorted(scale, 93)))
            n = rng.choice([1, 1, 1, 2, 3])
            for j in range(n):
                pitches.add(int(scale[min(rh_idx + 2 * j, len(scale) - 1)]))
        if kind > 0.5 or not pitches:  # left hand
            lh_idx = int(np.clip(lh_idx + rng.integers(-3, 4), np.searchsorted(scale, 28), np.searchsorted(scale, 64)))
            n = rng.choice([1, 1, 2, 3])
            for j in range(n):
                pitches.add(int(scale[min(lh_idx + 2 * j, len(scale) - 1)]))
        if rng.random() < chromatic:
            p = max(pitches)
            pitches.discard(p)
            pitches.add(min(p + 1, 108))
        events.append(NoteEvent(t, frozenset(pitches)))
        t += float(rng.choice([0.125, 0.25, 0.25, 0.5]))
    return events


@dataclass(frozen=True)
class SyntheticPiece:
    midi: QueryBootlegPair
    sheet: BootlegScore
    mode: AccidentalMode


def make_piece(n_events: int, rng: np.random.Generator, noise: NoiseModel = CLEAN) -> SyntheticPiece:
    if rng.random() < 0.5:
        tonic, mode = int(rng.choice(_SHARP_KEYS)), AccidentalMode.SHARP
    else:
        tonic, mode = int(rng.choice(_FLAT_KEYS)), AccidentalMode.FLAT
    events = random_events(n_events, rng, tonic)
    pair = QueryBootlegPair(midi_to_bootleg(events, AccidentalMode.SHARP), midi_to_bootleg(events, AccidentalMode.FLAT))
    engraved = pair.sharp if mode is AccidentalMode.SHARP else pair.flat
    sheet = noise.apply(BootlegScore(engraved.fingerprints, Variant.SHEET), rng)
    return SyntheticPiece(pair, sheet, mode)


def random_column_scores(n: int, width_range: tuple[int, int], rng: np.random.Generator,
                         alphabet: int | None = None) -> list[BootlegScore]:
    """Unstructured random scores with random per-piece bit density.

    ``alphabet`` restricts columns to that many distinct fingerprints so that
    collisions (and escalation) actually happen.
    """
    out = []
    for _ in range(n):
        w = int(rng.integers(width_range[0], width_range[1] + 1))
        if alphabet:
            pool = _random_columns(alphabet, rng, float(rng.uniform(0.02, 0.2)))
            fps = pool[rng.integers(0, alphabet, size=w)]
        else:
            fps = _random_columns(w, rng, float(rng.uniform(0.02, 0.2)))
        out.append(BootlegScore(fps))
    return out


def _random_columns(n: int, rng: np.random.Generator, density: float) -> np.ndarray:
    bits = rng.random((n, N_POSITIONS)) < density
    empty = ~bits.any(axis=1)
    bits[empty, rng.integers(0, N_POSITIONS, size=int(empty.sum()))] = True
    weights = np.uint64(1) << np.arange(N_POSITIONS, dtype=np.uint64)
    return (bits.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
