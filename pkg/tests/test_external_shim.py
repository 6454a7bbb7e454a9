"""End-to-end tests through the external Python shim (`PHIExec python`).

These exercise the reference shim package; they skip when it is not
installed, so the engine suite stands alone without it.
"""

import collections
import importlib.util

import pytest

from tdxdb import Database, TransducerError
from tdxdb.selftest import MODFILTER_SQL

shim_available = importlib.util.find_spec("tdxshim") is not None
pytestmark = pytest.mark.skipif(shim_available is False, reason="tdxshim not installed")

PYTHON_FILTER_SQL = """
select transducer_col_int4(1) as id,
       transducer_col_text(2) as txt,
       transducer($$PHIExec python
# BEGIN INPUT
# id int32
# txt text
# END INPUT
# BEGIN OUTPUT
# id int32
# txt text
# END OUTPUT
while True:
    rec = NextInput()
    if rec is None:
        break
    if rec["id"] % 3 == 1:
        WriteOutput(rec)
WriteOutput(None)
$$),
       t.id, t.txt
from t
"""

PYTHON_STATEFUL_SQL = """
select transducer_col_int8(1) as seen,
       transducer($$PHIExec python
# BEGIN INPUT
# id int32
# txt text
# END INPUT
# BEGIN OUTPUT
# seen int64
# END OUTPUT
count = 0
while NextInput() is not None:
    count += 1
WriteOutput({"seen": count})
$$),
       t.id, t.txt
from t
"""

PYTHON_RAISING_SQL = """
select transducer_col_int4(1) as id,
       transducer($$PHIExec python
# BEGIN INPUT
# id int32
# txt text
# END INPUT
# BEGIN OUTPUT
# id int32
# END OUTPUT
raise ValueError("script side failure")
$$),
       t.id, t.txt
from t
"""


def ids_db(nseg=2, n=200):
    db = Database(nseg=nseg)
    db.create_table(
        "t", "id:int32,txt:text", "hash(id)", rows=[(i, f"r{i}") for i in range(1, n + 1)]
    )
    return db


class TestShimConformance:
    def test_python_filter_script_matches_builtin(self):
        # the external filter must agree with the in-process builtin oracle
        for nseg in (1, 2, 3):
            db = ids_db(nseg=nseg)
            external = collections.Counter(db.query(PYTHON_FILTER_SQL).rows)
            builtin = collections.Counter(db.query(MODFILTER_SQL).rows)
            assert external == builtin, f"nseg={nseg}"
        print("\nACCEPTANCE shim-conformance: PASS (filter script == builtin, nseg 1,2,3)")

    def test_stateful_script_counts_per_instance(self):
        db = ids_db(nseg=2, n=100)
        result = db.query(PYTHON_STATEFUL_SQL)
        counts = sorted(r[0] for r in result.rows)
        assert len(counts) == 2
        assert sum(counts) == 100

    def test_script_exception_aborts_query(self):
        db = ids_db(nseg=2, n=10)
        with pytest.raises(TransducerError, match="ValueError"):
            db.query(PYTHON_RAISING_SQL)

    def test_big_stream_through_shim(self):
        db = ids_db(nseg=2, n=20000)
        result = db.query(PYTHON_FILTER_SQL)
        assert len(result.rows) == len([i for i in range(1, 20001) if i % 3 == 1])

    def test_window_feed_and_outer_filter_at_five_segments(self):
        # all the machinery at once: redistribute + sort + window feeding an
        # external child per segment, with further SQL above the transducer
        import random

        rng = random.Random(13)
        rows = []
        for s in range(12):
            days = sorted(rng.sample(range(1, 2000), 400))
            rows.extend((f"S{s}", d, float(rng.randint(1, 500))) for d in days)
        rng.shuffle(rows)

        sql = """
with flagged as (
  select transducer_col_text(1) as symbol,
         transducer_col_int4(2) as day,
         transducer_col_int4(3) as streak,
         transducer($$PHIExec python
# BEGIN INPUT
# rn int64
# symbol text
# day int32
# price float64
# END INPUT
# BEGIN OUTPUT
# symbol text
# day int32
# streak int32
# END OUTPUT
streak = 0
prev = None
while True:
    rec = NextInput()
    if rec is None:
        break
    if rec["rn"] == 1 or prev is None or rec["price"] <= prev:
        streak = 0
    else:
        streak += 1
    prev = rec["price"]
    WriteOutput({"symbol": rec["symbol"], "day": rec["day"], "streak": streak})
$$),
         t.row_number, t.symbol, t.day, t.price
  from (
    select row_number() over (partition by symbol order by day),
           symbol, day, price
    from stock
  ) t
)
select symbol, day, streak from flagged where streak >= 3
"""
        reference = None
        for nseg in (1, 5):
            db = Database(nseg=nseg)
            db.create_table(
                "stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows
            )
            got = collections.Counter(db.query(sql).rows)
            if reference is None:
                reference = got
                assert got, "expected at least one streak row"
            else:
                assert got == reference
