#!/usr/bin/env python3
"""Single-source shortest paths with distributed Bellman-Ford.

Each superstep relaxes tentative distances with messages carrying (node,
candidate distance) and halts when a whole round improves nothing. Because
a procedural program owns the loop, the classic recursive-query headache of
stop conditions disappears, and a negative-cycle check is two lines: if
rounds outlive the node count, something keeps shrinking forever.
"""

from tdxdb import Database, NegativeCycleError
from tdxdb.selftest import SSSP_SQL_TEMPLATE

flights = [
    # (from, to, hours)
    (1, 2, 2.0),  # SFO -> DEN
    (2, 3, 2.5),  # DEN -> ORD
    (3, 4, 2.0),  # ORD -> JFK
    (1, 4, 7.5),  # SFO -> JFK direct, slower than the hops
    (4, 5, 7.0),  # JFK -> LHR
    (6, 1, 1.0),  # SEA -> SFO (nothing flies INTO SEA: unreachable)
]
names = {1: "SFO", 2: "DEN", 3: "ORD", 4: "JFK", 5: "LHR", 6: "SEA"}

db = Database(nseg=2)
db.create_table("g", "i:int64,j:int64,w:float64", "hash(i)", rows=flights)

result = db.query(SSSP_SQL_TEMPLATE.format(start=1))
print("shortest travel time from SFO:")
for node, dist in sorted(result.rows):
    shown = "unreachable" if dist == float("inf") else f"{dist:.1f}h"
    print(f"  {names[node]:>3}: {shown}")

print("\n-- a negative cycle is detected, not looped on forever --")
db2 = Database(nseg=2)
db2.create_table(
    "g", "i:int64,j:int64,w:float64", "hash(i)", rows=[(1, 2, -1.0), (2, 1, -1.0)]
)
try:
    db2.query(SSSP_SQL_TEMPLATE.format(start=1))
except NegativeCycleError as exc:
    print(f"query aborted: {exc}")
