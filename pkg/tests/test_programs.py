import collections
import heapq
import random
import threading
import time

import pytest

from tdxdb import Config, Database, NegativeCycleError, TransducerError, TransferError
from tdxdb.selftest import BFS_SQL_TEMPLATE, RUNS_SQL, SSSP_SQL_TEMPLATE
from tdxdb.transducer import BuiltinMode, TransducerSpec, run_builtin_instance
from tdxdb.datamodel import Schema


# --- independent oracles ---------------------------------------------------


def runs_oracle(day_price):
    """Single pass over one symbol's day-ordered series.

    Transitions classify as +1/-1/0; a run is a maximal stretch of equal
    classifications, sharing boundary days with its neighbors.
    """
    out = []
    run = None
    for day, price in day_price:
        if run is None:
            run = [day, price, day, price, 0]
            continue
        step = 1 if price > run[3] else (-1 if price < run[3] else 0)
        if run[0] == run[2]:
            run[2], run[3], run[4] = day, price, step
        elif step == run[4]:
            run[2], run[3] = day, price
        else:
            out.append(tuple(run))
            run = [run[2], run[3], day, price, step]
    if run is not None:
        out.append(tuple(run))
    return out


def bfs_oracle(edges, start, directed=False):
    adjacency = collections.defaultdict(set)
    nodes = set()
    for i, j in edges:
        adjacency[i].add(j)
        if not directed:
            adjacency[j].add(i)
        nodes.update((i, j))
    depth = {n: -1 for n in nodes}
    depth[start] = 0
    queue = collections.deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if depth[v] == -1:
                depth[v] = depth[u] + 1
                queue.append(v)
    return depth


def dijkstra_oracle(edges, start, directed=True):
    adjacency = collections.defaultdict(list)
    nodes = set()
    for i, j, w in edges:
        adjacency[i].append((j, w))
        if not directed:
            adjacency[j].append((i, w))
        nodes.update((i, j))
    dist = {n: float("inf") for n in nodes}
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, float("inf")):
            continue
        for v, w in adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    dist.setdefault(start, 0.0)
    return dist


# --- runs -------------------------------------------------------------------


def stock_db(rows, nseg=2):
    db = Database(nseg=nseg)
    db.create_table("stock", "symbol:text,day:int32,price:float64", "hash(symbol)", rows=rows)
    return db


class TestRuns:
    def test_rise_then_fall(self):
        # prices 1,2,3,2: a rising run d1..d3 then a falling run d3..d4
        rows = [("A", 1, 1.0), ("A", 2, 2.0), ("A", 3, 3.0), ("A", 4, 2.0)]
        result = stock_db(rows).query(RUNS_SQL)
        assert sorted(result.rows) == [
            ("A", 1, 1.0, 3, 3.0, 1),
            ("A", 3, 3.0, 4, 2.0, -1),
        ]

    def test_single_day_is_zero_length_run(self):
        result = stock_db([("A", 5, 7.0)]).query(RUNS_SQL)
        assert result.rows == [("A", 5, 7.0, 5, 7.0, 0)]

    def test_equal_prices_break_runs(self):
        rows = [("A", 1, 1.0), ("A", 2, 2.0), ("A", 3, 2.0), ("A", 4, 3.0)]
        result = stock_db(rows).query(RUNS_SQL)
        assert sorted(result.rows) == [
            ("A", 1, 1.0, 2, 2.0, 1),
            ("A", 2, 2.0, 3, 2.0, 0),
            ("A", 3, 2.0, 4, 3.0, 1),
        ]

    def test_two_symbols_one_run_each_any_nseg(self):
        rows = [("A", 1, 1.0), ("A", 2, 2.0), ("B", 3, 9.0), ("B", 7, 4.0)]
        expected = [("A", 1, 1.0, 2, 2.0, 1), ("B", 3, 9.0, 7, 4.0, -1)]
        for nseg in (1, 2, 3):
            result = stock_db(rows, nseg=nseg).query(RUNS_SQL)
            assert sorted(result.rows) == expected

    def test_consecutive_runs_chain(self):
        rng = random.Random(3)
        days = list(range(1, 40))
        rows = [("A", d, float(rng.randint(1, 6))) for d in days]
        result = stock_db(rows).query(RUNS_SQL)
        ordered = sorted(result.rows, key=lambda r: r[1])
        for prev, nxt in zip(ordered, ordered[1:]):
            assert nxt[1] == prev[3], "consecutive runs must share their boundary day"

    def test_out_of_order_day_is_contract_violation(self):
        spec = TransducerSpec(
            Schema.of(("rn", "int64"), ("symbol", "text"), ("day", "int32"), ("price", "float64")),
            Schema.of(
                ("symbol", "text"),
                ("begin", "int32"),
                ("beginprice", "float64"),
                ("end", "int32"),
                ("endprice", "float64"),
                ("direction", "int32"),
            ),
            BuiltinMode("runs"),
            "",
        )
        bad = [(1, "A", 5, 1.0), (2, "A", 3, 2.0)]
        with pytest.raises(TransducerError, match="out of order"):
            list(
                run_builtin_instance(
                    spec, segment_id=0, nseg=1, input_iter=iter(bad), config=Config(nseg=1)
                )
            )

    def test_random_series_match_oracle(self):
        rng = random.Random(17)
        for _ in range(10):
            rows = []
            expected = []
            for s in range(rng.randint(1, 4)):
                sym = f"S{s}"
                days = sorted(rng.sample(range(1, 120), rng.randint(1, 40)))
                series = [(d, float(rng.randint(1, 9))) for d in days]
                rows.extend((sym, d, p) for d, p in series)
                expected.extend((sym,) + r for r in runs_oracle(series))
            rng.shuffle(rows)
            result = stock_db(rows, nseg=3).query(RUNS_SQL)
            assert collections.Counter(result.rows) == collections.Counter(expected)


# --- bfs ---------------------------------------------------------------------


def graph_db(edges, nseg=2, weighted=False):
    db = Database(nseg=nseg)
    if weighted:
        db.create_table("g", "i:int64,j:int64,w:float64", "hash(i)", rows=edges)
    else:
        db.create_table("g", "i:int64,j:int64", "hash(i)", rows=edges)
    return db


class TestBfs:
    def test_path_graph(self):
        result = graph_db([(1, 2), (2, 3)]).query(BFS_SQL_TEMPLATE.format(start=1))
        assert dict(result.rows) == {1: 0, 2: 1, 3: 2}

    def test_unreachable_component_reports_minus_one(self):
        result = graph_db([(1, 2), (3, 4)]).query(BFS_SQL_TEMPLATE.format(start=1))
        assert dict(result.rows) == {1: 0, 2: 1, 3: -1, 4: -1}

    def test_depth_difference_across_edges_at_most_one(self):
        rng = random.Random(5)
        edges = [(rng.randrange(50), rng.randrange(50)) for _ in range(120)]
        depth = dict(graph_db(edges).query(BFS_SQL_TEMPLATE.format(start=0)).rows)
        for i, j in edges:
            if depth[i] >= 0 and depth[j] >= 0:
                assert abs(depth[i] - depth[j]) <= 1

    def test_directed_flag(self):
        sql = BFS_SQL_TEMPLATE.format(start=1).replace("builtin bfs", "builtin bfs directed=true")
        result = graph_db([(1, 2), (3, 1)]).query(sql)
        assert dict(result.rows) == {1: 0, 2: 1, 3: -1}

    def test_start_node_absent_from_graph(self):
        result = graph_db([(1, 2)]).query(BFS_SQL_TEMPLATE.format(start=99))
        assert dict(result.rows) == {1: -1, 2: -1, 99: 0}

    def test_empty_edge_table_yields_start_only(self):
        result = graph_db([]).query(BFS_SQL_TEMPLATE.format(start=3))
        assert result.rows == [(3, 0)]

    def test_random_graphs_match_oracle(self):
        rng = random.Random(41)
        for _ in range(5):
            n = rng.randint(10, 200)
            edges = [(rng.randrange(n), rng.randrange(n)) for _ in range(rng.randint(n, 3 * n))]
            start = rng.randrange(n)
            want = bfs_oracle(edges, start)
            want.setdefault(start, 0)
            for nseg in (1, 3):
                got = dict(graph_db(edges, nseg=nseg).query(BFS_SQL_TEMPLATE.format(start=start)).rows)
                assert got == want


# --- sssp --------------------------------------------------------------------


class TestSssp:
    def test_triangle(self):
        edges = [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 5.0)]
        result = graph_db(edges, weighted=True).query(SSSP_SQL_TEMPLATE.format(start=1))
        assert dict(result.rows) == {1: 0.0, 2: 1.0, 3: 2.0}

    def test_unreachable_is_positive_infinity(self):
        edges = [(1, 2, 1.0), (3, 4, 1.0)]
        result = graph_db(edges, weighted=True).query(SSSP_SQL_TEMPLATE.format(start=1))
        got = dict(result.rows)
        assert got[3] == float("inf") and got[4] == float("inf")

    def test_negative_cycle_detected(self):
        edges = [(1, 2, -1.0), (2, 1, -1.0)]
        db = graph_db(edges, weighted=True)
        with pytest.raises(NegativeCycleError, match="negative cycle"):
            db.query(SSSP_SQL_TEMPLATE.format(start=1))

    def test_negative_edges_without_cycle_are_fine(self):
        edges = [(1, 2, 5.0), (1, 3, 2.0), (3, 2, -4.0)]
        result = graph_db(edges, weighted=True).query(SSSP_SQL_TEMPLATE.format(start=1))
        assert dict(result.rows)[2] == -2.0

    def test_empty_edge_table_yields_start_only(self):
        result = graph_db([], weighted=True).query(SSSP_SQL_TEMPLATE.format(start=7))
        assert result.rows == [(7, 0.0)]

    def test_relaxation_fixpoint(self):
        rng = random.Random(59)
        n = 60
        edges = [
            (rng.randrange(n), rng.randrange(n), round(rng.uniform(0, 5), 3))
            for _ in range(200)
        ]
        dist = dict(graph_db(edges, weighted=True).query(SSSP_SQL_TEMPLATE.format(start=0)).rows)
        for i, j, w in edges:
            if dist[i] != float("inf"):
                assert dist[j] <= dist[i] + w + 1e-12

    def test_random_digraphs_match_dijkstra(self):
        rng = random.Random(61)
        for _ in range(5):
            n = rng.randint(10, 120)
            edges = [
                (rng.randrange(n), rng.randrange(n), round(rng.uniform(0, 10), 3))
                for _ in range(rng.randint(n, 3 * n))
            ]
            start = rng.randrange(n)
            want = dijkstra_oracle(edges, start)
            got = dict(
                graph_db(edges, weighted=True, nseg=2)
                .query(SSSP_SQL_TEMPLATE.format(start=start))
                .rows
            )
            assert set(got) == set(want)
            for node, expect in want.items():
                if expect == float("inf"):
                    assert got[node] == float("inf")
                else:
                    assert abs(got[node] - expect) <= 1e-9 * max(1.0, abs(expect))


# --- transfer ----------------------------------------------------------------


def send_sql(port, host="127.0.0.1"):
    return f"""
select transducer_col_int8(1) as sent,
       transducer($$PHIExec builtin transfer_send host={host} port={port}
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


def recv_sql(port, nsenders):
    return f"""
select transducer_col_int8(1) as id,
       transducer_col_float8(2) as val,
       transducer($$PHIExec builtin transfer_recv port={port} nsenders={nsenders}
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


def transfer_pair(rows, port, nseg_send=2, nseg_recv=2, config=None):
    src = Database(nseg=nseg_send, config=config)
    src.create_table("t", "id:int64,val:float64", "hash(id)", rows=rows)
    dst = Database(nseg=nseg_recv, config=config)
    dst.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])
    received = {}

    def recv():
        received["rows"] = dst.query(recv_sql(port, nseg_send)).rows

    thread = threading.Thread(target=recv)
    thread.start()
    time.sleep(0.1)
    sent = src.query(send_sql(port))
    thread.join(timeout=60)
    assert not thread.is_alive(), "receiver did not finish"
    return sent.rows, received["rows"]


class TestTransfer:
    def test_round_trip_multiset(self):
        rows = [(i, i / 7.0) for i in range(3000)]
        sent, received = transfer_pair(rows, port=19801)
        assert sum(s[0] for s in sent) == len(rows)
        assert collections.Counter(received) == collections.Counter(rows)

    def test_empty_table(self):
        sent, received = transfer_pair([], port=19802)
        assert received == []
        assert sorted(sent) == [(0,), (0,)]

    def test_receiver_absent_times_out(self):
        from dataclasses import replace

        config = replace(Config(nseg=1), transfer_connect_timeout=0.4)
        db = Database(config=config)
        db.create_table("t", "id:int64,val:float64", "hash(id)", rows=[(1, 1.0)])
        began = time.monotonic()
        with pytest.raises(TransferError, match="cannot connect"):
            db.query(send_sql(19803))
        assert time.monotonic() - began < 5.0

    def test_no_sender_within_accept_timeout(self):
        from dataclasses import replace

        config = replace(Config(nseg=1), transfer_accept_timeout=0.4)
        db = Database(config=config)
        db.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])
        began = time.monotonic()
        with pytest.raises(TransferError, match="no sender connected"):
            db.query(recv_sql(19805, 1))
        assert time.monotonic() - began < 5.0

    def test_port_already_in_use_is_bind_error(self):
        import socket

        holder = socket.create_server(("127.0.0.1", 19806))
        try:
            db = Database(nseg=1)
            db.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])
            with pytest.raises(TransferError, match="cannot listen"):
                db.query(recv_sql(19806, 1))
        finally:
            holder.close()

    def test_schema_mismatch_names_both_schemas(self):
        port = 19804
        dst = Database(nseg=1)
        dst.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])
        src = Database(nseg=1)
        src.create_table("t", "id:int64,val:float64", "hash(id)", rows=[(1, 1.0)])
        bad_send = send_sql(port).replace("# id int64", "# wrong int64")
        errors = {}

        def recv():
            try:
                dst.query(recv_sql(port, 1))
            except TransferError as exc:
                errors["recv"] = str(exc)

        thread = threading.Thread(target=recv)
        thread.start()
        time.sleep(0.1)
        try:
            src.query(bad_send)
        except TransferError:
            pass  # the sender may or may not see the hangup; the receiver must
        thread.join(timeout=30)
        assert "wrong" in errors["recv"] and "id" in errors["recv"]
