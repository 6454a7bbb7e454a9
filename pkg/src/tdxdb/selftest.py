"""Condensed built-in checks for `tdxdb selftest`, plus the optional DBLP
depth-histogram run. The pytest suite is the authoritative check; this is a
quick installed-environment sanity pass with one line per check."""

from __future__ import annotations

import collections
import io
import random
import threading
import time
from typing import Callable, Optional

from .config import Config
from .database import Database
from .datamodel import ColumnType, RowGroup, Schema
from .errors import NegativeCycleError, TdxError
from .wire import decode_stream, encode_end, encode_rowgroup

MODFILTER_SQL = """
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

BFS_SQL_TEMPLATE = """
select transducer_col_int8(1) as node,
       transducer_col_int8(2) as depth,
       transducer($$PHIExec builtin bfs start={start}
# BEGIN INPUT
# i int64
# j int64
# END INPUT
# BEGIN OUTPUT
# node int64
# depth int64
# END OUTPUT
$$),
       g.i, g.j
from g
"""

SSSP_SQL_TEMPLATE = """
select transducer_col_int8(1) as node,
       transducer_col_float8(2) as dist,
       transducer($$PHIExec builtin sssp start={start}
# BEGIN INPUT
# i int64
# j int64
# w float64
# END INPUT
# BEGIN OUTPUT
# node int64
# dist float64
# END OUTPUT
$$),
       g.i, g.j, g.w
from g
"""


def _check_modfilter_equivalence(config: Config) -> None:
    rng = random.Random(7)
    rows = [(rng.randrange(-50, 200), f"r{k}") for k in range(800)]
    for nseg in (1, 2, 3):
        db = Database(nseg=nseg, config=config)
        db.create_table("t", "id:int32,txt:text", "hash(id)", rows=rows)
        got = collections.Counter(db.query(MODFILTER_SQL).rows)
        want = collections.Counter(
            db.query("select id, txt from t where id % 3 = 1").rows
        )
        if got != want:
            raise AssertionError(f"nseg={nseg}: transducer filter != plain filter")


def _check_explain_shape(config: Config) -> None:
    db = Database(nseg=2, config=config)
    db.create_table("t", "id:int32,txt:text", "hash(id)", rows=[(1, "a"), (2, "b")])
    text = db.explain(MODFILTER_SQL)
    lines = text.splitlines()
    needles = ["Gather Motion 2:1", "-> Transducer", "-> Seq Scan"]
    positions = []
    for needle in needles:
        hits = [i for i, line in enumerate(lines) if needle in line]
        if not hits:
            raise AssertionError(f"explain output missing {needle!r}:\n{text}")
        positions.append(hits[0])
    if positions != sorted(positions):
        raise AssertionError(f"explain nesting order wrong:\n{text}")


def _runs_oracle(series):
    """Single-pass reference over one symbol's (day, price) list."""
    runs = []
    run = None
    for day, price in series:
        if run is None:
            run = [day, price, day, price, 0]
            continue
        step = 1 if price > run[3] else (-1 if price < run[3] else 0)
        if run[0] == run[2]:
            run[2], run[3], run[4] = day, price, step
        elif step == run[4]:
            run[2], run[3] = day, price
        else:
            runs.append(tuple(run))
            run = [run[2], run[3], day, price, step]
    if run is not None:
        runs.append(tuple(run))
    return runs


RUNS_SQL = """
select transducer_col_text(1) as symbol,
       transducer_col_int4(2) as begin,
       transducer_col_float8(3) as beginprice,
       transducer_col_int4(4) as end,
       transducer_col_float8(5) as endprice,
       transducer_col_int4(6) as direction,
       transducer($$PHIExec builtin runs
# BEGIN INPUT
# rn int64
# symbol text
# day int32
# price float64
# END INPUT
# BEGIN OUTPUT
# symbol text
# begin int32
# beginprice float64
# end int32
# endprice float64
# direction int32
# END OUTPUT
$$),
       t.row_number, t.symbol, t.day, t.price
from (
  select row_number() over (partition by symbol order by day),
         symbol, day, price
  from stock
) t
"""


def _check_runs(config: Config) -> None:
    rng = random.Random(11)
    for trial in range(10):
        symbols = [f"S{k}" for k in range(rng.randint(1, 4))]
        rows = []
        expected = []
        for sym in symbols:
            days = sorted(rng.sample(range(1, 300), rng.randint(1, 60)))
            prices = [round(rng.uniform(1, 50), 2) for _ in days]
            rows.extend((sym, d, p) for d, p in zip(days, prices))
            expected.extend(
                (sym,) + run for run in _runs_oracle(list(zip(days, prices)))
            )
        rng.shuffle(rows)
        db = Database(nseg=3, config=config)
        db.create_table("stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows)
        got = collections.Counter(db.query(RUNS_SQL).rows)
        if got != collections.Counter(expected):
            raise AssertionError(f"runs mismatch on trial {trial}")


def _bfs_oracle(edges, start):
    adj = collections.defaultdict(set)
    nodes = set()
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
        nodes.update((i, j))
    depth = {n: -1 for n in nodes}
    depth[start] = 0
    frontier = collections.deque([start])
    while frontier:
        u = frontier.popleft()
        for v in adj[u]:
            if depth[v] == -1:
                depth[v] = depth[u] + 1
                frontier.append(v)
    return depth


def _check_bfs(config: Config) -> None:
    rng = random.Random(23)
    for trial in range(3):
        n = rng.randint(20, 150)
        edges = [
            (rng.randrange(n), rng.randrange(n)) for _ in range(rng.randint(n, 3 * n))
        ]
        start = rng.randrange(n)
        want = _bfs_oracle(edges, start)
        want.setdefault(start, 0)
        for nseg in (1, 2):
            db = Database(nseg=nseg, config=config)
            db.create_table("g", "i:int64,j:int64", "hash(i)", rows=edges)
            got = dict(db.query(BFS_SQL_TEMPLATE.format(start=start)).rows)
            if got != want:
                raise AssertionError(f"bfs mismatch trial {trial} nseg {nseg}")


def _dijkstra(edges, start):
    import heapq

    adj = collections.defaultdict(list)
    nodes = set()
    for i, j, w in edges:
        adj[i].append((j, w))
        nodes.update((i, j))
    dist = {n: float("inf") for n in nodes}
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, float("inf")):
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if start not in dist:
        dist[start] = 0.0
    return dist


def _check_sssp(config: Config) -> None:
    rng = random.Random(31)
    for trial in range(3):
        n = rng.randint(10, 80)
        edges = [
            (rng.randrange(n), rng.randrange(n), round(rng.uniform(0, 10), 3))
            for _ in range(rng.randint(n, 3 * n))
        ]
        start = rng.randrange(n)
        want = _dijkstra(edges, start)
        db = Database(nseg=2, config=config)
        db.create_table("g", "i:int64,j:int64,w:float64", "hash(i)", rows=edges)
        got = dict(db.query(SSSP_SQL_TEMPLATE.format(start=start)).rows)
        if set(got) != set(want):
            raise AssertionError(f"sssp node set mismatch trial {trial}")
        for node, d in want.items():
            g = got[node]
            if d == float("inf"):
                if g != float("inf"):
                    raise AssertionError(f"sssp reachability mismatch at {node}")
            elif abs(g - d) > 1e-9 * max(1.0, abs(d)):
                raise AssertionError(f"sssp distance mismatch at {node}: {g} vs {d}")
    # negative cycle fixture
    db = Database(nseg=2, config=config)
    db.create_table("g", "i:int64,j:int64,w:float64", "hash(i)", rows=[(1, 2, -1.0), (2, 1, -1.0)])
    try:
        db.query(SSSP_SQL_TEMPLATE.format(start=1))
    except NegativeCycleError:
        return
    raise AssertionError("negative cycle was not detected")


def _check_bsp_votes(config: Config) -> None:
    from .bsp import BspCoordinator

    coordinator = BspCoordinator(2, timeout=10.0)
    results = {}

    def peer(me: int, votes):
        ctx = coordinator.init_context(me, 2)
        outcome = []
        for vote in votes:
            outcome.append(ctx.sync(vote))
        results[me] = outcome

    votes = {0: [False, True, True], 1: [False, False, True]}
    threads = [threading.Thread(target=peer, args=(m, votes[m])) for m in (0, 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if results[0] != [False, False, True] or results[1] != [False, False, True]:
        raise AssertionError(f"vote-to-halt truth table wrong: {results}")


def _check_codec(config: Config) -> None:
    rng = random.Random(43)
    schema = Schema.of(
        ("a", ColumnType.INT32),
        ("b", ColumnType.INT64),
        ("c", ColumnType.FLOAT64),
        ("d", ColumnType.TEXT),
        ("e", ColumnType.BOOL),
    )
    for _ in range(20):
        rows = [
            (
                rng.randrange(-(2**31), 2**31) if rng.random() > 0.1 else None,
                rng.randrange(-(2**63), 2**63) if rng.random() > 0.1 else None,
                rng.uniform(-1e9, 1e9) if rng.random() > 0.1 else None,
                "".join(rng.choice("abπ💡") for _ in range(rng.randint(0, 8)))
                if rng.random() > 0.1
                else None,
                rng.random() > 0.5 if rng.random() > 0.1 else None,
            )
            for _ in range(rng.randint(1, 40))
        ]
        data = encode_rowgroup(RowGroup(schema, rows)) + encode_end()
        frames = decode_stream(data)
        if frames[0].rowgroup.rows != rows or frames[1].kind != 2:
            raise AssertionError("codec round trip failed")


def _check_transfer(config: Config) -> None:
    port = 17391
    rows = [(i, i * 0.25) for i in range(4000)]
    send_sql = f"""
select transducer_col_int8(1) as sent,
       transducer($$PHIExec builtin transfer_send host=127.0.0.1 port={port}
# BEGIN INPUT
# id int64
# val float64
# END INPUT
# BEGIN OUTPUT
# sent int64
# END OUTPUT
$$),
       t.id, t.val
from t
"""
    recv_sql = f"""
select transducer_col_int8(1) as id,
       transducer_col_float8(2) as val,
       transducer($$PHIExec builtin transfer_recv port={port} nsenders=2
# BEGIN INPUT
# x int32
# END INPUT
# BEGIN OUTPUT
# id int64
# val float64
# END OUTPUT
$$),
       s.x
from seed s
"""
    src = Database(nseg=2, config=config)
    src.create_table("t", "id:int64,val:float64", "hash(id)", rows=rows)
    dst = Database(nseg=2, config=config)
    dst.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])
    received = {}

    def run_recv():
        received["rows"] = dst.query(recv_sql).rows

    thread = threading.Thread(target=run_recv)
    thread.start()
    time.sleep(0.1)
    src.query(send_sql)
    thread.join(timeout=60)
    if collections.Counter(received.get("rows", [])) != collections.Counter(rows):
        raise AssertionError("transfer round trip lost or duplicated rows")


CHECKS: list[tuple[str, Callable[[Config], None]]] = [
    ("modfilter-equivalence", _check_modfilter_equivalence),
    ("explain-shape", _check_explain_shape),
    ("runs-oracle", _check_runs),
    ("bfs-oracle", _check_bfs),
    ("sssp-oracle", _check_sssp),
    ("bsp-vote-to-halt", _check_bsp_votes),
    ("codec-roundtrip", _check_codec),
    ("transfer-roundtrip", _check_transfer),
]


def run_selftest(config: Optional[Config] = None, out=None) -> int:
    import sys

    out = out or sys.stdout
    config = config or Config()
    failures = 0
    for name, check in CHECKS:
        started = time.monotonic()
        try:
            check(config)
        except (AssertionError, TdxError) as exc:
            failures += 1
            print(f"FAIL {name}: {exc}", file=out)
            continue
        print(f"PASS {name} ({time.monotonic() - started:.2f}s)", file=out)
    if failures:
        print(f"{failures} of {len(CHECKS)} checks failed", file=out)
    else:
        print(f"all {len(CHECKS)} checks passed", file=out)
    return 2 if failures else 0


def dblp_histogram(path: str, start: Optional[int], config: Optional[Config] = None, out=None) -> int:
    """Load a whitespace-separated edge list and print the BFS depth histogram."""
    import sys

    out = out or sys.stdout
    config = config or Config()
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            edges.append((int(parts[0]), int(parts[1])))
    if not edges:
        print("no edges found", file=out)
        return 1
    if start is None:
        start = min(min(i, j) for i, j in edges)
    print(f"{len(edges)} edges, BFS from node {start}", file=out)
    db = Database(config=config)
    db.create_table("g", "i:int64,j:int64", "hash(i)", rows=edges)
    began = time.monotonic()
    result = db.query(BFS_SQL_TEMPLATE.format(start=start))
    elapsed = time.monotonic() - began
    histogram = collections.Counter(depth for _node, depth in result.rows)
    print(f"BFS finished in {elapsed:.1f}s over {len(result.rows)} nodes", file=out)
    width = max(histogram.values())
    for depth in sorted(histogram):
        count = histogram[depth]
        bar = "#" * max(1, round(40 * count / width))
        print(f"depth {depth:>3}: {count:>8}  {bar}", file=out)
    return 0
