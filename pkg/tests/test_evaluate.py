import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bootlegsearch.bootleg import BootlegScore, Variant
from bootlegsearch.evaluate import (
    FULL, Corpus, EmptySourceError, EvalConfigError, SimulationConfig, mrr, parse_eval_config, rank_of_true,
    run_simulation, sample_query, synthetic_corpus,
)
from bootlegsearch.search import QueryBootlegPair
from bootlegsearch.synthetic import CLEAN, NoiseModel
from oracles import brute_rank


def qpair(fps):
    a = np.asarray(fps, dtype=np.uint64)
    return QueryBootlegPair(BootlegScore(a, Variant.SHARP), BootlegScore(a, Variant.FLAT))


def test_mrr_examples():
    assert mrr([1, 1, 1]) == 1.0
    assert mrr([1, 2, 4]) == pytest.approx(0.583333333)
    with pytest.raises(ValueError):
        mrr([])
    with pytest.raises(ValueError):
        mrr([0, 1])


@given(st.lists(st.integers(1, 1000), min_size=1))
def test_mrr_bounds(ranks):
    v = mrr(ranks)
    assert 0 < v <= 1
    assert (v == 1.0) == all(r == 1 for r in ranks)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.data())
def test_rank_matches_brute_force(scores, data):
    ids = [f"p{i:02d}" for i in range(len(scores))]
    true_id = data.draw(st.sampled_from(ids))
    assert rank_of_true(ids, scores, true_id) == brute_rank(ids, scores, true_id)


def test_sample_query_cases():
    src = qpair(np.arange(1, 1001))
    rng = np.random.default_rng(0)
    assert sample_query(src, FULL, rng) is src
    assert sample_query(src, 1000, rng).sharp == src.sharp
    a = sample_query(src, 500, np.random.default_rng(42))
    b = sample_query(src, 500, np.random.default_rng(42))
    assert a.sharp == b.sharp and a.width == 500
    start = int(a.sharp.fingerprints[0]) - 1
    assert a.flat.fingerprints.tolist() == list(range(start + 1, start + 501))
    assert sample_query(qpair([1, 2, 3]), 10, rng).width == 3
    with pytest.raises(EmptySourceError):
        sample_query(qpair([]), 5, rng)


def test_corpus_validation():
    s = BootlegScore(np.array([1], dtype=np.uint64))
    with pytest.raises(EvalConfigError):
        Corpus({"p": s}, {"m": qpair([1])}, {"m": "missing"})
    with pytest.raises(EvalConfigError):
        Corpus({"p": s}, {"m": qpair([1])}, {})


def test_full_clean_self_retrieval():
    corpus = synthetic_corpus(8, 150, seed=1)
    cfg = SimulationConfig(db_sizes=(8,), query_lengths=(FULL,), trials=1, samples_per_midi=1)
    rep = run_simulation(corpus, cfg)
    assert rep.mrr[(8, FULL)] == 1.0


def test_determinism_and_ranks_consistent():
    corpus = synthetic_corpus(10, 120, seed=2, noise=NoiseModel(0.2, 0.3, 2))
    cfg = SimulationConfig(db_sizes=(5, 10), query_lengths=(10, FULL), trials=2, samples_per_midi=3,
                           seed=7, threshold=20, keep_scores=True)
    a, b = run_simulation(corpus, cfg), run_simulation(corpus, cfg)
    assert a.to_csv() == b.to_csv()
    assert a.to_json(timing=False) == b.to_json(timing=False)
    for q in a.queries:
        assert q["rank"] == brute_rank(q["db"], q["scores"], q["piece"])
        assert q["piece"] in q["db"] and len(q["db"]) == q["N"]


def test_parallel_matches_serial():
    corpus = synthetic_corpus(6, 80, seed=3, noise=NoiseModel(0.1, 0.1, 1))
    cfg = SimulationConfig(db_sizes=(3, 6), query_lengths=(20,), trials=2, samples_per_midi=2)
    assert run_simulation(corpus, cfg, jobs=2).to_csv() == run_simulation(corpus, cfg).to_csv()


def test_fully_corrupted_query_scores_zero():
    pieces = {"a": BootlegScore(np.array([1, 2, 3], dtype=np.uint64)),
              "b": BootlegScore(np.array([4, 5, 6], dtype=np.uint64))}
    corpus = Corpus(pieces, {"m": qpair([7, 8, 9])}, {"m": "b"})
    cfg = SimulationConfig(db_sizes=(2,), query_lengths=(FULL,), trials=1, samples_per_midi=1)
    q = run_simulation(corpus, cfg).queries[0]
    assert q["score"] == 0 and q["rank"] == 2  # tie with "a", which sorts first


def test_db_size_larger_than_corpus():
    corpus = synthetic_corpus(3, 20, seed=0)
    with pytest.raises(EvalConfigError):
        run_simulation(corpus, SimulationConfig(db_sizes=(4,), trials=1, samples_per_midi=1))


def test_truncated_queries_flagged():
    corpus = synthetic_corpus(3, 20, seed=0)
    rep = run_simulation(corpus, SimulationConfig(db_sizes=(3,), query_lengths=(500,), trials=1,
                                                  samples_per_midi=1))
    assert rep.truncated_queries == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 0.5), st.floats(0, 1), st.integers(0, 4))
def test_noise_model(seed, p_del, p_flip, k):
    src = BootlegScore(np.random.default_rng(seed).integers(1, 2 ** 62, size=200, dtype=np.uint64))
    out = NoiseModel(p_del, p_flip, k).apply(src, np.random.default_rng(seed))
    assert out.width <= src.width
    assert np.all(out.fingerprints < 2 ** 62) and np.all(out.fingerprints > 0)
    assert CLEAN.apply(src, np.random.default_rng(seed)) == src


def test_eval_config_parse(tmp_path):
    text = "database = db.tsv\nground_truth = gt.tsv\ndb_sizes = 2, 5\nquery_lengths = 100, full\nthreshold = none\n"
    setup = parse_eval_config(text, tmp_path / "run.cfg")
    assert setup.database == tmp_path / "db.tsv"
    assert setup.config.db_sizes == (2, 5)
    assert setup.config.query_lengths == (100, FULL)
    assert setup.config.threshold is None
    assert setup.output_prefix == tmp_path / "run.report"
    with pytest.raises(EvalConfigError, match="unknown key"):
        parse_eval_config(text + "bogus = 1\n", "x.cfg")
    with pytest.raises(EvalConfigError, match="db_sizes"):
        parse_eval_config("database = a\nground_truth = b\n", "x.cfg")
