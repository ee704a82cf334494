"""Bootleg score container, grand-staff position axis and 64-bit column packing.

A bootleg score is a 62 x N binary matrix. Rows 0-27 are left-hand staff
positions A0..G4, rows 28-61 are right-hand positions E3..C8. Internally each
column is kept packed as an unsigned 64-bit integer (bit i = row i), which is
also the fingerprint used by the reverse index.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

N_POSITIONS = 62
LH_SIZE = 28
RH_SIZE = 34
RH_OFFSET = LH_SIZE

LETTERS = "CDEFGAB"
# diatonic step index (octave * 7 + letter) of the lowest position in each hand
LH_LOWEST = 0 * 7 + 5  # A0
RH_LOWEST = 3 * 7 + 2  # E3
# middle register shared by both hands: E3..G4
MIDDLE_LOW = RH_LOWEST
MIDDLE_HIGH = LH_LOWEST + LH_SIZE - 1  # G4

MAX_FINGERPRINT = 1 << N_POSITIONS
_BIT_WEIGHTS = (np.uint64(1) << np.arange(N_POSITIONS, dtype=np.uint64))


class Variant(Enum):
    SHARP = "sharp"
    FLAT = "flat"
    SHEET = "sheet"


class ZeroColumnError(ValueError):
    pass


class InvalidFingerprintError(ValueError):
    pass


def lh_position(step: int) -> int | None:
    """Row of diatonic step ``step`` in the left-hand block, or None if outside A0..G4."""
    row = step - LH_LOWEST
    return row if 0 <= row < LH_SIZE else None


def rh_position(step: int) -> int | None:
    row = step - RH_LOWEST
    return RH_OFFSET + row if 0 <= row < RH_SIZE else None


def position_step(index: int) -> int:
    """Diatonic step (octave * 7 + letter index) engraved at staff position ``index``."""
    if not 0 <= index < N_POSITIONS:
        raise ValueError(f"staff position {index} outside 0..{N_POSITIONS - 1}")
    if index < RH_OFFSET:
        return LH_LOWEST + index
    return RH_LOWEST + index - RH_OFFSET


def position_name(index: int) -> str:
    """Human readable name such as ``'RH C4'``."""
    step = position_step(index)
    hand = "LH" if index < RH_OFFSET else "RH"
    return f"{hand} {LETTERS[step % 7]}{step // 7}"


def mirror_position(index: int) -> int | None:
    """Position with the same letter-octave in the other hand, if one exists."""
    step = position_step(index)
    if index < RH_OFFSET:
        return rh_position(step)
    return lh_position(step)


def pack_column(column: Sequence[bool] | np.ndarray) -> int:
    """Pack a 62-element binary column into an integer fingerprint.

    Bit ``i`` of the result is row ``i`` of the column, so the left-hand A0
    row is the least significant bit.
    """
    col = np.asarray(column, dtype=bool)
    if col.shape != (N_POSITIONS,):
        raise ValueError(f"column must have {N_POSITIONS} entries, got shape {col.shape}")
    value = int(np.bitwise_or.reduce(_BIT_WEIGHTS[col])) if col.any() else 0
    if value == 0:
        raise ZeroColumnError("cannot pack an all-zero column")
    return value


def unpack_fingerprint(value: int) -> np.ndarray:
    """Inverse of :func:`pack_column`."""
    value = int(value)
    if value <= 0 or value >= MAX_FINGERPRINT:
        raise InvalidFingerprintError(f"fingerprint {value} outside 1..2^62-1")
    return (np.uint64(value) & _BIT_WEIGHTS) != 0


def pack_matrix(matrix: np.ndarray) -> np.ndarray:
    """Vectorised packing of a (62, N) matrix; zero columns pack to 0."""
    m = np.asarray(matrix, dtype=bool)
    if m.ndim != 2 or m.shape[0] != N_POSITIONS:
        raise ValueError(f"expected a ({N_POSITIONS}, N) matrix, got {m.shape}")
    return (m.astype(np.uint64) * _BIT_WEIGHTS[:, None]).sum(axis=0, dtype=np.uint64)


def unpack_array(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint64)
    return (v[None, :] & _BIT_WEIGHTS[:, None]) != 0


def validate_fingerprints(values: np.ndarray) -> None:
    v = np.asarray(values, dtype=np.uint64)
    if v.size and (np.any(v == 0) or np.any(v >= np.uint64(MAX_FINGERPRINT))):
        bad = int(np.flatnonzero((v == 0) | (v >= np.uint64(MAX_FINGERPRINT)))[0])
        raise InvalidFingerprintError(f"invalid fingerprint {int(v[bad])} at column {bad}")


@dataclass(frozen=True, eq=False)
class BootlegScore:
    """Sequence of packed bootleg columns plus the variant that produced them.

    All columns are non-zero; use :meth:`from_matrix` to build from a binary
    matrix (zero columns are dropped there).
    """

    fingerprints: np.ndarray
    variant: Variant = Variant.SHEET

    def __post_init__(self):
        fp = np.ascontiguousarray(self.fingerprints, dtype=np.uint64).reshape(-1)
        validate_fingerprints(fp)
        fp.setflags(write=False)
        object.__setattr__(self, "fingerprints", fp)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, variant: Variant = Variant.SHEET) -> "BootlegScore":
        packed = pack_matrix(matrix)
        return cls(packed[packed != 0], variant)

    @classmethod
    def empty(cls, variant: Variant = Variant.SHEET) -> "BootlegScore":
        return cls(np.zeros(0, dtype=np.uint64), variant)

    @classmethod
    def concatenate(cls, scores: Iterable["BootlegScore"], variant: Variant | None = None) -> "BootlegScore":
        scores = list(scores)
        if variant is None:
            variant = scores[0].variant if scores else Variant.SHEET
        if not scores:
            return cls.empty(variant)
        return cls(np.concatenate([s.fingerprints for s in scores]), variant)

    @property
    def width(self) -> int:
        return int(self.fingerprints.shape[0])

    def __len__(self) -> int:
        return self.width

    @property
    def matrix(self) -> np.ndarray:
        return unpack_array(self.fingerprints)

    def slice(self, start: int, stop: int) -> "BootlegScore":
        return BootlegScore(self.fingerprints[start:stop], self.variant)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BootlegScore):
            return NotImplemented
        return self.variant == other.variant and np.array_equal(self.fingerprints, other.fingerprints)

    def __repr__(self) -> str:
        return f"BootlegScore(width={self.width}, variant={self.variant.value})"
