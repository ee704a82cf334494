import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bootlegsearch.bootleg import BootlegScore
from bootlegsearch.index import (
    IndexBuildError, IndexFormatError, IndexKey, Posting, build_index, decode_index, encode_index,
    load_index, lookup, save_index,
)
from oracles import dict_index

A, B, C = 0b1, 0b10, 0b100


def score(*fps):
    return BootlegScore(np.array(fps, dtype=np.uint64))


def shared_pool_db(rng, n_pieces, width_range, pool_size):
    pool = rng.integers(1, 2 ** 62, size=pool_size, dtype=np.uint64)
    db = []
    for i in range(n_pieces):
        w = int(rng.integers(width_range[0], width_range[1] + 1))
        # skewed draws so a few fingerprints dominate
        idx = np.minimum(rng.zipf(1.6, size=w) - 1, pool_size - 1)
        db.append((f"p{i:02d}", BootlegScore(pool[idx])))
    return db


def test_plain_index_example():
    idx = build_index([("p", score(A, B))])
    assert lookup(idx, IndexKey.single(A)) == [Posting("p", 0)]
    assert lookup(idx, IndexKey.single(B)) == [Posting("p", 1)]
    assert idx.escalated_set == frozenset()


def test_escalation_hand_fixture():
    idx = build_index([("p", score(A, A, A, B))], threshold=2)
    assert idx.escalated_set == {A}
    assert lookup(idx, IndexKey.triplet(A, A, A)) == [Posting("p", 0)]
    assert lookup(idx, IndexKey.triplet(A, A, B)) == [Posting("p", 1)]
    assert lookup(idx, IndexKey.single(B)) == [Posting("p", 3)]
    assert lookup(idx, IndexKey.single(A)) == []
    assert idx.stats.dropped_tail == 1
    assert idx.stats.unique_single_keys == 1 and idx.stats.unique_triplet_keys == 2


def test_unseen_keys_are_empty():
    idx = build_index([("p", score(A, B))])
    assert lookup(idx, IndexKey.single(C)) == []
    assert lookup(idx, IndexKey.triplet(A, B, C)) == []


def test_infinite_threshold_disables_escalation():
    db = [("p", score(A, A, A, A))]
    for t in (None, float("inf")):
        idx = build_index(db, threshold=t)
        assert idx.escalated_set == frozenset()
        assert len(lookup(idx, IndexKey.single(A))) == 4


def test_duplicate_piece_rejected():
    with pytest.raises(IndexBuildError):
        build_index([("p", score(A)), ("p", score(B))])


def test_bad_threshold_rejected():
    with pytest.raises(IndexBuildError):
        build_index([("p", score(A))], threshold=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 3, 5, 10, None]))
def test_matches_dict_oracle(seed, threshold):
    rng = np.random.default_rng(seed)
    db = shared_pool_db(rng, int(rng.integers(1, 6)), (0, 40), 12)
    idx = build_index(db, threshold)
    singles, triplets, escalated, dropped = dict_index(db, threshold)
    assert idx.escalated_set == escalated
    assert idx.stats.dropped_tail == dropped
    for f, posts in singles.items():
        assert lookup(idx, IndexKey.single(f)) == [Posting(*p) for p in posts]
    for k, posts in triplets.items():
        assert lookup(idx, IndexKey.triplet(*k)) == [Posting(*p) for p in posts]
    assert idx.stats.unique_single_keys == len(singles)
    assert idx.stats.unique_triplet_keys == len(triplets)
    # conservation of postings
    total = sum(s.width for _, s in db)
    assert idx.stats.single_postings + idx.stats.triplet_postings + idx.stats.dropped_tail == total
    # post-escalation bound
    if threshold is not None and singles:
        assert max(len(v) for v in singles.values()) <= threshold
        assert max(idx.single_frequencies().values(), default=0) <= threshold


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_order_independent(seed):
    rng = np.random.default_rng(seed)
    db = shared_pool_db(rng, 5, (1, 30), 8)
    perm = [db[i] for i in rng.permutation(len(db))]
    assert build_index(db, 4) == build_index(perm, 4)


def test_unique_keys_do_not_shrink():
    rng = np.random.default_rng(3)
    db = shared_pool_db(rng, 20, (100, 200), 50)
    before = build_index(db, None).stats.unique_keys
    after = build_index(db, 20)
    assert after.stats.escalated_count > 0
    assert after.stats.unique_keys >= before


@pytest.mark.parametrize("db, threshold", [
    ([], 8000),
    ([("p", score(A, A, A, B))], 2),
    ([("x", score(A, B, C, A)), ("y", score(C, C, C, C, B))], 2),
])
def test_roundtrip(tmp_path, db, threshold):
    idx = build_index(db, threshold)
    path = tmp_path / "i.bin"
    save_index(path, idx)
    back = load_index(path)
    assert back == idx
    assert back.stats == idx.stats
    assert back.escalated_set == idx.escalated_set


def test_roundtrip_random(tmp_path):
    rng = np.random.default_rng(11)
    db = shared_pool_db(rng, 10, (0, 300), 40)
    idx = build_index(db, 30)
    assert decode_index(encode_index(idx)) == idx


@pytest.mark.parametrize("mutate, cause", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + (99).to_bytes(4, "little") + b[8:], "version"),
    (lambda b: b[:-10], "truncat"),
    (lambda b: b[:40] + bytes([b[40] ^ 0xFF]) + b[41:], "checksum"),
    (lambda b: b + b"\0", "trailing"),
])
def test_corruption_named(mutate, cause):
    data = encode_index(build_index([("p", score(A, A, A, B))], 2))
    with pytest.raises(IndexFormatError, match=cause):
        decode_index(mutate(data))
