#!/usr/bin/env python3
"""Time-series runs: find monotone streaks in per-symbol price series.

This is painful in plain SQL but a few lines of stateful code in a
transducer. The window subquery's partition by / order by makes the engine
ship each symbol whole, in day order, to a single transducer instance; the
runs program then splits every series into maximal monotone runs that chain
end-to-begin.
"""

import random

from tdxdb import Database
from tdxdb.selftest import RUNS_SQL

rng = random.Random(2024)
rows = []
for symbol in ("IBM", "HP", "DEC", "SGI"):
    price = rng.uniform(20, 80)
    for day in range(1, 61):
        price = max(1.0, price + rng.uniform(-3, 3.2))
        rows.append((symbol, day, round(price, 2)))
rng.shuffle(rows)  # arrival order does not matter; the plan enforces order

db = Database(nseg=3)
db.create_table("stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows)

print("-- the plan: redistribute by symbol, sort, window, then the transducer --")
print(db.explain(RUNS_SQL))

runs = db.query(RUNS_SQL)
print(f"\n{len(runs.rows)} runs over {len(rows)} price points")

print("\n-- longest gaining streak per symbol (plain SQL over the run relation) --")
GAINS_SQL = (
    "with run as (" + RUNS_SQL + ") "
    "select symbol, begin, end, endprice from run "
    "where direction = 1 and end - begin >= 8"
)
for row in sorted(db.query(GAINS_SQL).rows):
    symbol, begin, end, endprice = row
    print(f"{symbol:>4}: rose for {end - begin} days (day {begin} to {end}, ends at {endprice})")

print("\n-- runs chain: each next run begins where the previous one ended --")
ibm = sorted((r for r in runs.rows if r[0] == "IBM"), key=lambda r: r[1])
for prev, nxt in zip(ibm, ibm[1:]):
    assert nxt[1] == prev[3]
print(f"verified across {len(ibm)} IBM runs")
