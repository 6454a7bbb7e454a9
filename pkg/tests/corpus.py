"""The query corpus: every entry must produce an nseg-independent result
multiset. Used by the acceptance suite and spot tests."""

from __future__ import annotations

import random

from tdxdb import Database
from tdxdb.selftest import BFS_SQL_TEMPLATE, MODFILTER_SQL, RUNS_SQL, SSSP_SQL_TEMPLATE

IDENTITY_SQL = """
select transducer_col_int4(1) as id,
       transducer_col_text(2) as txt,
       transducer($$PHIExec builtin identity
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


def _ids_table(db: Database, n=300, seed=1):
    rng = random.Random(seed)
    rows = [(rng.randrange(-1000, 1000), f"r{k}") for k in range(n)]
    db.create_table("t", "id:int32,txt:text", "hash(id)", rows=rows)


def _stock_table(db: Database, seed=2):
    rng = random.Random(seed)
    rows = []
    for s in range(4):
        days = sorted(rng.sample(range(1, 150), 40))
        rows.extend((f"S{s}", d, float(rng.randint(1, 9))) for d in days)
    rng.shuffle(rows)
    db.create_table("stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows)


def _graph_table(db: Database, seed=3):
    rng = random.Random(seed)
    n = 150
    edges = [(rng.randrange(n), rng.randrange(n)) for _ in range(400)]
    db.create_table("g", "i:int64,j:int64", "hash(i)", rows=edges)


def _weighted_graph_table(db: Database, seed=4):
    rng = random.Random(seed)
    n = 80
    edges = [
        (rng.randrange(n), rng.randrange(n), round(rng.uniform(0, 9), 3)) for _ in range(250)
    ]
    db.create_table("g", "i:int64,j:int64,w:float64", "hash(i)", rows=edges)


WINDOW_SQL = (
    "select row_number() over (partition by symbol order by day) as rn, symbol, day "
    "from stock"
)

CASE_SQL = (
    "select id, case when id % 2 = 0 then 'even' when id > 100 then 'big' else 'odd' end "
    "as label from t where id > -500 or txt = 'r1'"
)

# Note: the counter builtin emits one row per instance, so its result shape
# legitimately depends on nseg; it is tested separately, not here.
CORPUS = [
    ("plain-scan", _ids_table, "select * from t"),
    ("filter-project", _ids_table, "select id * 2 as d, txt from t where id % 3 = 1"),
    ("case-expr", _ids_table, CASE_SQL),
    ("subquery", _ids_table, "select d from (select id - 1 as d from t where id <> 0) s"),
    ("window-row-number", _stock_table, WINDOW_SQL),
    ("modfilter-transducer", _ids_table, MODFILTER_SQL),
    ("identity-transducer", _ids_table, IDENTITY_SQL),
    ("runs-transducer", _stock_table, RUNS_SQL),
    ("bfs-transducer", _graph_table, BFS_SQL_TEMPLATE.format(start=0)),
    ("sssp-transducer", _weighted_graph_table, SSSP_SQL_TEMPLATE.format(start=0)),
]


def run_corpus_query(name: str, nseg: int):
    entry = next(e for e in CORPUS if e[0] == name)
    db = Database(nseg=nseg)
    entry[1](db)
    return db.query(entry[2]).rows
