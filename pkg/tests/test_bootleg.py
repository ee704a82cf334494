import numpy as np
import pytest
from hypothesis import given, strategies as st

from bootlegsearch.bootleg import (
    LH_SIZE, MAX_FINGERPRINT, N_POSITIONS, RH_SIZE, BootlegScore, InvalidFingerprintError, Variant,
    ZeroColumnError, mirror_position, pack_column, pack_matrix, position_name, unpack_array,
    unpack_fingerprint,
)
from oracles import POSITION_NAMES

fingerprints = st.integers(min_value=1, max_value=MAX_FINGERPRINT - 1)


def column(*bits):
    c = np.zeros(N_POSITIONS, dtype=bool)
    c[list(bits)] = True
    return c


def test_layout_sizes():
    assert (LH_SIZE, RH_SIZE, N_POSITIONS) == (28, 34, 62)


def test_position_names_match_walked_ranges():
    for i, (letter, octave) in enumerate(POSITION_NAMES):
        assert position_name(i).endswith(f"{letter}{octave}")
    assert position_name(0) == "LH A0" and position_name(27) == "LH G4"
    assert position_name(28) == "RH E3" and position_name(61) == "RH C8"


def test_mirror_pairs_share_letter_octave():
    pairs = [(i, mirror_position(i)) for i in range(N_POSITIONS) if mirror_position(i) is not None]
    assert len(pairs) == 20  # E3..G4 in both hands
    for a, b in pairs:
        assert POSITION_NAMES[a] == POSITION_NAMES[b]
        assert mirror_position(b) == a


def test_pack_lsb_convention():
    assert pack_column(column(0)) == 1
    assert pack_column(column(23, 33)) == 2 ** 23 + 2 ** 33


def test_pack_zero_column_rejected():
    with pytest.raises(ZeroColumnError):
        pack_column(np.zeros(N_POSITIONS, dtype=bool))


def test_unpack_examples():
    assert np.flatnonzero(unpack_fingerprint(1)).tolist() == [0]
    assert np.flatnonzero(unpack_fingerprint(2 ** 61)).tolist() == [61]


@pytest.mark.parametrize("bad", [0, MAX_FINGERPRINT, 2 ** 63])
def test_unpack_invalid(bad):
    with pytest.raises(InvalidFingerprintError):
        unpack_fingerprint(bad)


@given(fingerprints)
def test_pack_unpack_roundtrip(value):
    assert pack_column(unpack_fingerprint(value)) == value


@given(st.lists(st.booleans(), min_size=N_POSITIONS, max_size=N_POSITIONS).filter(any))
def test_unpack_pack_roundtrip(bits):
    c = np.array(bits)
    assert np.array_equal(unpack_fingerprint(pack_column(c)), c)


@given(st.lists(fingerprints, max_size=50))
def test_vectorised_matches_scalar(values):
    arr = np.array(values, dtype=np.uint64)
    mat = unpack_array(arr)
    assert mat.shape == (N_POSITIONS, len(values))
    for j, v in enumerate(values):
        assert np.array_equal(mat[:, j], unpack_fingerprint(v))
    assert np.array_equal(pack_matrix(mat), arr)


def test_from_matrix_drops_zero_columns():
    mat = np.zeros((N_POSITIONS, 4), dtype=bool)
    mat[3, 0] = mat[5, 2] = mat[61, 2] = True
    score = BootlegScore.from_matrix(mat, Variant.SHARP)
    assert score.width == 2
    assert score.fingerprints.tolist() == [8, 32 + 2 ** 61]


def test_score_validation_and_immutability():
    with pytest.raises(InvalidFingerprintError):
        BootlegScore(np.array([0], dtype=np.uint64))
    s = BootlegScore(np.array([1, 2], dtype=np.uint64))
    with pytest.raises(ValueError):
        s.fingerprints[0] = 5


def test_concatenate_and_slice():
    a = BootlegScore(np.array([1, 2], dtype=np.uint64))
    b = BootlegScore(np.array([4], dtype=np.uint64))
    c = BootlegScore.concatenate([a, b])
    assert c.fingerprints.tolist() == [1, 2, 4]
    assert c.slice(1, 3) == BootlegScore(np.array([2, 4], dtype=np.uint64))
    assert BootlegScore.concatenate([]).width == 0
