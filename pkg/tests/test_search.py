import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bootlegsearch.bootleg import BootlegScore, Variant
from bootlegsearch.index import IndexKey, build_index
from bootlegsearch.search import (
    EmptyQueryError, MatchHit, QueryBootlegPair, combine_rankings, histogram_score, linear_scan_oracle,
    query_keys, search,
)
from oracles import offset_histogram_scores

A, B, C = 0b1, 0b10, 0b100


def score(fps, variant=Variant.SHEET):
    return BootlegScore(np.asarray(fps, dtype=np.uint64), variant)


def pair(fps, flat=None):
    return QueryBootlegPair(score(fps, Variant.SHARP), score(fps if flat is None else flat, Variant.FLAT))


def pool_db(rng, n_pieces, width_range, pool):
    return [(f"p{i:02d}", score(rng.choice(pool, size=int(rng.integers(*width_range)))))
            for i in range(n_pieces)]


def test_query_keys_examples():
    assert query_keys(score([A, B]), set()) == [(IndexKey.single(A), 0), (IndexKey.single(B), 1)]
    assert query_keys(score([A, B, C]), {A}) == [
        (IndexKey.triplet(A, B, C), 0), (IndexKey.single(B), 1), (IndexKey.single(C), 2)]
    assert query_keys(score([B, A]), {A}) == [(IndexKey.single(B), 0)]


def test_histogram_score_examples():
    assert histogram_score([]) == 0
    hits = [MatchHit("p", 10 + d, 0) for d in (0, 0, 0, 40)]
    assert histogram_score(hits, "p") == 3
    hits = [MatchHit("p", 0, 5), MatchHit("p", 1, 6), MatchHit("p", 7, 0)]
    assert histogram_score(hits, "p") == 2


def test_self_retrieval_excerpt_and_shift():
    rng = np.random.default_rng(0)
    fps = rng.integers(1, 2 ** 62, size=400, dtype=np.uint64)
    other = rng.integers(1, 2 ** 62, size=400, dtype=np.uint64)
    idx = build_index([("p", score(fps)), ("q", score(other))])
    for start in (100, 107):
        res = search(idx, pair(fps[start:start + 100]))
        assert res.entries[0] == ("p", 100)
        assert res.best_offsets["p"] == start


def test_zero_score_pieces_still_ranked():
    idx = build_index([("only", score([A]))])
    res = search(idx, pair([B]))
    assert res.entries == [("only", 0)]


def test_empty_query_rejected():
    idx = build_index([("p", score([A]))])
    with pytest.raises(EmptyQueryError):
        search(idx, pair([]))
    with pytest.raises(EmptyQueryError):
        linear_scan_oracle([], pair([]))


def test_oracle_edge_cases():
    assert linear_scan_oracle([], pair([A])).entries == []
    assert linear_scan_oracle([("p", score([B, A]))], pair([A])).entries == [("p", 1)]


def test_empty_database_search():
    assert search(build_index([]), pair([A])).entries == []


def test_sharp_flat_max():
    idx = build_index([("p", score([A, B, C])), ("q", score([C, C, C]))])
    res = search(idx, pair([A, B], flat=[C, C]))
    assert res.scores == {"p": 2, "q": 2}
    assert res.variant_scores["sharp"] == {"p": 2, "q": 0}
    assert res.variant_scores["flat"] == {"p": 1, "q": 2}
    assert res.entries == [("p", 2), ("q", 2)]  # tie broken by id


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_oracle_without_escalation(seed):
    rng = np.random.default_rng(seed)
    pool = rng.integers(1, 2 ** 62, size=int(rng.integers(2, 20)), dtype=np.uint64)
    db = pool_db(rng, int(rng.integers(1, 8)), (0, 60), pool)
    idx = build_index(db, None)
    q = pair(rng.choice(pool, size=int(rng.integers(1, 40))))
    got = search(idx, q)
    want = linear_scan_oracle(db, q)
    assert got.entries == want.entries
    assert got.scores == offset_histogram_scores(db, q.sharp.fingerprints.tolist())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2, 4, 8]))
def test_escalation_never_invents_hits(seed, threshold):
    rng = np.random.default_rng(seed)
    pool = rng.integers(1, 2 ** 62, size=6, dtype=np.uint64)
    db = pool_db(rng, 4, (0, 50), pool)
    idx = build_index(db, threshold)
    sharp = rng.choice(pool, size=30)
    flat = rng.choice(pool, size=30)
    q = pair(sharp, flat)
    got, want = search(idx, q).scores, linear_scan_oracle(db, q).scores
    assert all(got[p] <= want[p] for p in want)


def test_escalated_self_match_counts_emitted_keys():
    rng = np.random.default_rng(5)
    piece = rng.integers(2, 2 ** 62, size=300, dtype=np.uint64)
    piece[rng.random(300) < 0.4] = A  # one dominant fingerprint gets escalated
    idx = build_index([("p", score(piece))], threshold=20)
    assert idx.escalated_set == {A}
    q = piece[50:150]
    keys = query_keys(score(q), idx.escalated_set)
    res = search(idx, pair(q))
    assert res.scores["p"] == len(keys)
    assert res.best_offsets["p"] == 50


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 20))
def test_prepending_absent_columns_keeps_scores(seed, k):
    rng = np.random.default_rng(seed)
    pool = rng.integers(1, 2 ** 61, size=8, dtype=np.uint64)
    db = pool_db(rng, 5, (5, 60), pool)
    idx = build_index(db, 6)
    q = rng.choice(pool, size=25)
    absent = np.full(k, 2 ** 61 + 12345, dtype=np.uint64)  # never in the pool
    base = search(idx, pair(q)).scores
    assert search(idx, pair(np.concatenate([absent, q]))).scores == base


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_longer_excerpt_never_scores_lower(seed):
    rng = np.random.default_rng(seed)
    piece = rng.integers(1, 2 ** 62, size=200, dtype=np.uint64)
    idx = build_index([("p", score(piece))], None)
    start = int(rng.integers(0, 100))
    prev = 0
    for length in (5, 20, 50, 100):
        s = search(idx, pair(piece[start:start + length])).scores["p"]
        assert s >= prev
        prev = s


def test_deterministic_ties():
    db = [(f"p{i}", score([A, B])) for i in (3, 1, 2)]
    idx = build_index(db)
    a = search(idx, pair([A, B]))
    b = search(build_index(list(reversed(db))), pair([A, B]))
    assert a.entries == b.entries == [("p1", 2), ("p2", 2), ("p3", 2)]


def test_smear_counts_neighbouring_bins():
    idx = build_index([("p", score([A, B, C, A]))], None)
    q = pair([A, C])  # A matches offsets 0 and 3, C offset 2: diffs {0, 3} and {1}
    assert search(idx, q).scores["p"] == 1
    assert search(idx, q, smear=1).scores["p"] == 2


def test_combine_rankings_max():
    idx = build_index([("p", score([A, B, C])), ("q", score([C, B, A]))], None)
    r1, r2 = search(idx, pair([A, B])), search(idx, pair([B, A]))
    comb = combine_rankings([r1, r2])
    assert comb.scores == {"p": 2, "q": 2}
