#!/usr/bin/env python3
"""Breadth-first search inside the database, parallelized with BSP.

The bfs builtin runs one instance per segment. Instances redistribute the
edge list so each node's adjacency lives with its owner, then expand the
frontier superstep by superstep, exchanging (node, depth) messages and
voting to halt when a step marks nothing. Nodes the search never reaches
keep depth -1.
"""

import collections
import random

from tdxdb import Database
from tdxdb.selftest import BFS_SQL_TEMPLATE

rng = random.Random(7)

# a "collaboration" graph: a big connected blob plus a separate clique
edges = []
for node in range(1, 400):
    edges.append((node, rng.randrange(max(1, node - 20), node) if node > 1 else node))
for _ in range(300):
    a, b = rng.randrange(1, 400), rng.randrange(1, 400)
    edges.append((a, b))
for a in range(1000, 1005):
    for b in range(a + 1, 1005):
        edges.append((a, b))

db = Database(nseg=3)
db.create_table("g", "i:int64,j:int64", "hash(i)", rows=edges)

result = db.query(BFS_SQL_TEMPLATE.format(start=1))
depths = dict(result.rows)
print(f"{len(edges)} edges, {len(depths)} nodes, BFS from node 1")

histogram = collections.Counter(depths.values())
widest = max(histogram.values())
print("\ndepth histogram:")
for depth in sorted(histogram):
    count = histogram[depth]
    bar = "#" * max(1, round(40 * count / widest))
    label = "unreached" if depth == -1 else f"depth {depth}"
    print(f"{label:>10}: {count:>5}  {bar}")

unreached = [n for n, d in depths.items() if d == -1]
print(f"\nthe separate clique stays at depth -1: {sorted(unreached)}")
