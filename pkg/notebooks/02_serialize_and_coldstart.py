"""
Structural strings and cold-start neighbor retrieval
====================================================

Each IPP is serialized into a fixed-width digit string (IStr) describing the
local degree structure of its three nodes.  Sorting the corpus with a
prefix trie places structurally similar paths next to each other, and a
small window around each string proposes new edges for cold-start nodes.
"""

import io

import numpy as np

from tempim import (RetrievalParams, Serializer, build_ptt, ingest_edges, locate, mine_ipps,
                    neighbor_retrieval, sim)
from tempim.coldstart import write_edges_csv

#%%
# A node's string is its degree followed by the three most frequent
# neighbor degrees and their counts, two digits per number.

g, _ = ingest_edges("v,p,0,0\nv,q,0,0\nv,r,0,0\nr,s,0,0")
ser = Serializer(g)
print(ser.node(g.node_keys.index("v"), 0))  # 03 | 01x2 | 02x1 | 00x00

#%%
# On a random graph every mined IPP becomes a 42-character string.

rng = np.random.default_rng(1)
rows = [f"n{a},n{b},{rng.integers(6)},{int(rng.random() < 0.4)}"
        for a, b in (rng.choice(200, 2, replace=False) for _ in range(1500))]
g, _ = ingest_edges("\n".join(rows))
corpus = Serializer(g).corpus(mine_ipps(g))
print(len(corpus), "strings, e.g.", corpus[0].istr)
print("self similarity:", sim(corpus[0].istr, corpus[0].istr))

#%%
# The pre-order traversal of the trie is the lexicographic order of the
# distinct strings.  ``locate`` gives the insertion rank of any string.

ptt = build_ptt(corpus)
assert ptt.sequence == sorted({r.istr for r in corpus})
print(len(ptt.sequence), "distinct strings")
print("rank of an all-zero string:", locate(ptt, "0" * 42))

#%%
# Retrieval scans +/- ``window`` positions, keeps strings sharing at least
# ``min_sim`` numbers with the query, and samples up to ``sample_k``
# partners per path with a generator seeded by (seed, query index).

params = RetrievalParams(window=5, min_sim=14, sample_k=3, seed=7)
edges = neighbor_retrieval(corpus, ptt, params, graph=g, only_cold=True, cold_C=1)
buf = io.StringIO()
write_edges_csv(edges[:5], buf, g.node_keys)
print(len(edges), "cold-start edges; first rows:")
print(buf.getvalue())

aug = g.augment(edges)
print("relation counts before/after:", g.relation_counts(), aug.relation_counts())
