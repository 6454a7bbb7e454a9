#!/usr/bin/env python3
"""The transducer: a stateful, user-programmable operator inside the plan.

A transducer select has three parts: transducer_col_<type>(ordinal)
projections of the output, the transducer($$...$$) script with its typed
input/output directive blocks, and trailing expressions naming the input
columns. Instances run in parallel, one per segment, each seeing only its
segment's rows, keeping whatever state they like across the whole stream.
"""

import collections

from tdxdb import Database, register_builtin

FILTER_SQL = """
select transducer_col_int4(1) as id,
       transducer_col_text(2) as txt,
       transducer($$PHIExec builtin modfilter
# BEGIN INPUT
# id int32
# txt text
# END INPUT
# BEGIN OUTPUT
# id int32
# txt text
# END OUTPUT
$$),
       t.id, t.txt
from t
"""

db = Database(nseg=2)
db.create_table("t", "id:int32,txt:text", "hash(id)", rows=[(i, f"row{i}") for i in range(1, 13)])

print("-- the transducer node sits inside the plan, between scan and gather --")
print(db.explain(FILTER_SQL))

print("\n-- modfilter keeps rows where id % 3 = 1; equivalent to a plain WHERE --")
transduced = collections.Counter(db.query(FILTER_SQL).rows)
plain = collections.Counter(db.query("select id, txt from t where id % 3 = 1").rows)
print("transducer result:", sorted(transduced))
print("same as plain SQL:", transduced == plain)

print("\n-- a custom builtin: output only after input is exhausted --")


def span(ctx):
    lowest = highest = None
    while (row := ctx.next_input()) is not None:
        value = row[0]
        lowest = value if lowest is None else min(lowest, value)
        highest = value if highest is None else max(highest, value)
    if lowest is not None:
        ctx.write_output((lowest, highest))


register_builtin("span", span, replace=True)

SPAN_SQL = """
select transducer_col_int4(1) as lo,
       transducer_col_int4(2) as hi,
       transducer($$PHIExec builtin span
# BEGIN INPUT
# id int32
# txt text
# END INPUT
# BEGIN OUTPUT
# lo int32
# hi int32
# END OUTPUT
$$),
       t.id, t.txt
from t
"""

print("per-segment (lo, hi) spans:", sorted(db.query(SPAN_SQL).rows))
print("(one output row per segment instance: each kept state across its whole stream)")
