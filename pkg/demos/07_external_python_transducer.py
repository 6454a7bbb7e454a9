#!/usr/bin/env python3
"""External transducers: the script runs as a subprocess over pipes.

With `PHIExec python` the engine forks one child per segment and streams
row-group frames over stdin/stdout; the reference shim (the tdxshim
package) decodes them and hands the script NextInput()/WriteOutput().
State is ordinary Python locals, and the process boundary means the script
can import anything without touching the engine.

Requires the shim: pip install -e pyshim/
"""

import importlib.util
import sys

if importlib.util.find_spec("tdxshim") is None:
    print("tdxshim is not installed; run: pip install -e pyshim/")
    sys.exit(0)

from tdxdb import Database

EMA_SQL = """
select transducer_col_text(1) as symbol,
       transducer_col_int4(2) as day,
       transducer_col_float8(3) as smoothed,
       transducer($$PHIExec python
# BEGIN INPUT
# symbol text
# day int32
# price float64
# END INPUT
# BEGIN OUTPUT
# symbol text
# day int32
# smoothed float64
# END OUTPUT
# exponential moving average per symbol; state is just a dict
alpha = 0.3
state = {}
while True:
    rec = NextInput()
    if rec is None:
        break
    prev = state.get(rec["symbol"])
    value = rec["price"] if prev is None else alpha * rec["price"] + (1 - alpha) * prev
    state[rec["symbol"]] = value
    WriteOutput({"symbol": rec["symbol"], "day": rec["day"], "smoothed": round(value, 3)})
$$),
       t.symbol, t.day, t.price
from (
  select row_number() over (partition by symbol order by day),
         symbol, day, price
  from stock
) t
"""

rows = [
    ("A", 1, 10.0), ("A", 2, 14.0), ("A", 3, 12.0), ("A", 4, 18.0),
    ("B", 1, 50.0), ("B", 2, 45.0), ("B", 3, 47.0),
]
# the window subquery only enforces partition/order here; the script
# ignores the row number by not listing it as an input column
db = Database(nseg=2)
db.create_table("stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows)

result = db.query(EMA_SQL)
print("exponentially smoothed prices (computed in a child process):")
for row in sorted(result.rows):
    print(" ", row)
