"""
Ingesting a temporal graph and mining influence paths
======================================================

Builds a small strong/weak temporal multigraph from CSV text, inspects the
strong-graph membership, and mines the 2-hop influence propagation paths
(IPPs) that serve as supervision labels.
"""

import numpy as np

from tempim import active_members, brute_force_ipps, ingest_edges, mine_ipps
from tempim.ipp import FilterStats

#%%
# Rows are ``src,dst,timestamp,relation`` with relation 0 = weak exposure and
# 1 = strong (realized) propagation.  Node IDs are assigned strong-first, so
# membership in the strong graph at time t is a single comparison.

text = """\
alice,bob,0,1
bob,carol,0,0
carol,dave,1,0
alice,erin,1,1
erin,frank,1,0
frank,gina,2,0
"""
g, summary = ingest_edges(text)
print(summary.to_dict())
print("node keys in ID order:", g.node_keys)
print("max strong ID per period:", g.max_strong_id.tolist())

#%%
# ``strong_nodes_at`` lists the nodes with a strong edge in that period;
# membership is cumulative, so ``bob`` stays a member after t=0.  Weak-only
# nodes sit at the end of the ID range.

for t in range(g.T):
    active = [g.node_keys[v] for v in g.strong_nodes_at(t)]
    members = [k for v, k in enumerate(g.node_keys) if g.strong_membership(v, t)]
    print(t, "active:", active, "members:", members)

#%%
# Mining enumerates wedges around each middle node and keeps those whose
# initiator is already strong while the two later nodes are still newcomers.

stats = FilterStats()
ipps = mine_ipps(g, stats=stats)
for p in ipps:
    print(g.node_keys[p.v0], "->", g.node_keys[p.v1], "->", g.node_keys[p.v2], (p.t0, p.t1))
print(stats)
assert ipps == brute_force_ipps(g)

#%%
# Active members are the initiators, counted per IPP.  On a random graph the
# vectorized miner and the nested-loop reference agree exactly.

print(active_members(ipps).counts)

rng = np.random.default_rng(0)
rows = [f"n{a},n{b},{rng.integers(6)},{rng.integers(2)}"
        for a, b in (rng.choice(150, 2, replace=False) for _ in range(1200))]
big, _ = ingest_edges("\n".join(rows))
mined = mine_ipps(big, threads=4)
print(big.num_nodes, "nodes,", big.num_edges, "edges,", len(mined), "IPPs")
assert mined == brute_force_ipps(big)
