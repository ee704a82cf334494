"""
Measuring retrieval quality with MRR
====================================

Mean reciprocal rank averages 1/rank of the true piece over many queries.
The harness draws databases of several sizes N, samples random excerpts of
length L from each query MIDI and ranks them. This script runs a small
sweep over a synthetic corpus with a noisy sheet side.
"""

import numpy as np

from bootlegsearch import SimulationConfig, mrr, run_simulation
from bootlegsearch.evaluate import FULL, synthetic_corpus
from bootlegsearch.synthetic import NoiseModel

print("MRR of ranks [1, 2, 4]:", round(mrr([1, 2, 4]), 4))

# Heavier corruption than the defaults, so short queries start to miss.
noise = NoiseModel(p_del=0.2, p_flip=0.4, k=2)
corpus = synthetic_corpus(60, 800, seed=1, noise=noise)

config = SimulationConfig(db_sizes=(10, 30, 60), query_lengths=(5, 10, 25, FULL), trials=2,
                          samples_per_midi=3, seed=0, keep_scores=True)
report = run_simulation(corpus, config)

print("       " + "".join(f"{'L=' + ('full' if l is None else str(l)):>9}" for l in config.query_lengths))
for n in config.db_sizes:
    print(f"N={n:<4d} " + "".join(f"{report.mrr[(n, l)]:9.3f}" for l in config.query_lengths))

# Longer queries and smaller databases are easier. Every record keeps the
# full score table, so individual misses can be inspected.
misses = [q for q in report.queries if q["rank"] > 1]
print(f"{len(misses)} of {len(report.queries)} queries missed rank 1")
if misses:
    q = misses[0]
    order = np.argsort(q["scores"])[::-1][:3]
    print("example miss:", q["midi"], "L =", q["L"], "rank", q["rank"],
          "top scores", [(q["db"][i], q["scores"][i]) for i in order], "true", q["piece"], q["score"])

print(f"mean query time {report.mean_query_seconds * 1000:.1f} ms")

# The same report as the evaluate command writes it.
print(report.to_csv().splitlines()[0])
