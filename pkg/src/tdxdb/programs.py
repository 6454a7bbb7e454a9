"""Builtin transducer programs: stream filters, run detection over price
series, BFS and Bellman-Ford over the BSP runtime, and the TCP transfer
pair for moving rows between clusters.

Each program is a plain function driven with next_input/write_output
callbacks; state lives in its local variables across the whole input.
"""

from __future__ import annotations

import math
import socket
import struct
import time
from typing import Optional

from .datamodel import ColumnType
from .errors import NegativeCycleError, TransducerError, TransferError
from .expr import int_mod
from .transducer import ProgramContext, batch_rows, register_builtin
from .wire import FRAME_END, FRAME_ROWGROUP, FrameReader, encode_end, encode_rowgroup

I32 = ColumnType.INT32
I64 = ColumnType.INT64
F64 = ColumnType.FLOAT64
TXT = ColumnType.TEXT


def identity(ctx: ProgramContext) -> None:
    """Pass every input row through unchanged."""
    if ctx.in_schema.types != ctx.out_schema.types:
        raise TransducerError("identity requires matching input and output types")
    while (row := ctx.next_input()) is not None:
        ctx.write_output(row)


def modfilter(ctx: ProgramContext) -> None:
    """Emit rows whose first column satisfies col % div = rem (default 3, 1)."""
    if ctx.in_schema.types != ctx.out_schema.types:
        raise TransducerError("modfilter requires matching input and output types")
    if ctx.in_schema.types[0] not in (I32, I64):
        raise TransducerError("modfilter needs an integer first column")
    div = ctx.int_param("div", 3)
    rem = ctx.int_param("rem", 1)
    while (row := ctx.next_input()) is not None:
        value = row[0]
        if value is not None and int_mod(value, div) == rem:
            ctx.write_output(row)


def counter(ctx: ProgramContext) -> None:
    """Consume all input, then emit one row with the count."""
    n = 0
    while ctx.next_input() is not None:
        n += 1
    ctx.write_output((n,))


def runs(ctx: ProgramContext) -> None:
    """Split each symbol's day-ordered price series into runs.

    A run covers a maximal stretch of consecutive day-to-day moves in one
    direction (+1 rising, -1 falling, 0 flat); consecutive runs share their
    boundary day, and a lone day is a zero-length run. Input must arrive
    partitioned by symbol with row_number restarting at 1, days ascending.
    """
    run: Optional[list] = None  # [symbol, begin, beginprice, end, endprice, direction]

    while (rec := ctx.next_input()) is not None:
        rn, symbol, day, price = rec
        if None in rec:
            raise TransducerError("runs: null cells are not allowed in price series")
        if rn == 1:
            if run is not None:
                ctx.write_output(tuple(run))
            run = [symbol, day, price, day, price, 0]
            continue
        if run is None:
            raise TransducerError("runs: partition did not start at row_number 1")
        if symbol != run[0]:
            raise TransducerError(
                f"runs: symbol changed from {run[0]!r} to {symbol!r} without a row_number reset"
            )
        if day <= run[3]:
            raise TransducerError(
                f"runs: day {day} arrived out of order for symbol {symbol!r}"
            )
        step = 1 if price > run[4] else (-1 if price < run[4] else 0)
        if run[1] == run[3]:
            # Single-point run adopts the first move's direction.
            run[3], run[4], run[5] = day, price, step
        elif step == run[5]:
            run[3], run[4] = day, price
        else:
            ctx.write_output(tuple(run))
            run = [symbol, run[3], run[4], day, price, step]
    if run is not None:
        ctx.write_output(tuple(run))


def _owner(node: int, n: int) -> int:
    return node % n


def bfs(ctx: ProgramContext) -> None:
    """Breadth-first search over an edge list, depths from a start node.

    Superstep 0 redistributes each edge to both endpoint owners; superstep 1
    builds adjacency (undirected unless directed=true) and seeds the start
    node; each following superstep expands the frontier, marking unvisited
    nodes and voting to halt once nothing was marked. Unreached nodes keep
    depth -1.
    """
    start = ctx.int_param("start")
    directed = ctx.bool_param("directed", False)
    bsp = ctx.bsp_init(ctx.nseg)
    n = bsp.npeers

    while (rec := ctx.next_input()) is not None:
        i, j = rec
        if i is None or j is None:
            raise TransducerError("bfs: null node id in edge list")
        bsp.send(_owner(i, n), rec)
        bsp.send(_owner(j, n), rec)
    bsp.sync(False)

    adjacency: dict[int, set] = {}
    depth: dict[int, int] = {}
    me = bsp.my_id
    while (msg := bsp.next()) is not None:
        i, j = msg
        if _owner(i, n) == me:
            depth.setdefault(i, -1)
            adjacency.setdefault(i, set()).add(j)
        if _owner(j, n) == me:
            depth.setdefault(j, -1)
            neighbors = adjacency.setdefault(j, set())
            if not directed:
                neighbors.add(i)
    bsp.send(_owner(start, n), (start, 0))
    bsp.sync(False)

    while True:
        marked = False
        while (msg := bsp.next()) is not None:
            node, d = msg
            if depth.get(node, -1) == -1:
                depth[node] = d
                marked = True
                for neighbor in adjacency.get(node, ()):
                    bsp.send(_owner(neighbor, n), (neighbor, d + 1))
        if bsp.sync(not marked):
            break

    for node in sorted(depth):
        ctx.write_output((node, depth[node]))


def sssp(ctx: ProgramContext) -> None:
    """Single-source shortest paths by distributed Bellman-Ford relaxation.

    Each superstep relaxes tentative distances from delivered messages and
    votes to halt when nothing improved. If improvements persist past the
    global node count the graph has a reachable negative-weight cycle.
    Unreachable nodes report +infinity.
    """
    start = ctx.int_param("start")
    directed = ctx.bool_param("directed", True)
    bsp = ctx.bsp_init(ctx.nseg)
    n = bsp.npeers
    me = bsp.my_id
    inf = math.inf

    while (rec := ctx.next_input()) is not None:
        i, j, w = rec
        if i is None or j is None or w is None:
            raise TransducerError("sssp: null cell in weighted edge list")
        bsp.send(_owner(i, n), ("edge", i, j, w))
        bsp.send(_owner(j, n), ("edge", i, j, w))
    bsp.sync(False)

    # Every edge reaches both owners (twice when they coincide). Duplicate
    # adjacency entries are harmless for relaxation, so no deduplication.
    out_edges: dict[int, list] = {}
    dist: dict[int, float] = {}
    while (msg := bsp.next()) is not None:
        _, i, j, w = msg
        if _owner(i, n) == me:
            dist.setdefault(i, inf)
            out_edges.setdefault(i, []).append((j, w))
        if _owner(j, n) == me:
            dist.setdefault(j, inf)
            out_edges.setdefault(j, [])
            if not directed:
                out_edges[j].append((i, w))
    for peer in range(n):
        bsp.send(peer, ("count", len(dist)))
    bsp.send(_owner(start, n), ("dist", start, 0.0))
    bsp.sync(False)

    total_nodes = 0
    relax_round = 0
    while True:
        improved = False
        while (msg := bsp.next()) is not None:
            if msg[0] == "count":
                total_nodes += msg[1]
                continue
            _, node, d = msg
            if d < dist.get(node, inf):
                dist[node] = d
                improved = True
                for neighbor, w in out_edges.get(node, ()):
                    bsp.send(_owner(neighbor, n), ("dist", neighbor, d + w))
        relax_round += 1
        if bsp.sync(not improved):
            break
        # Paths of at most N-1 edges settle by round N; one extra round
        # covers the seeded start node, which the edge-derived count misses.
        if relax_round > total_nodes + 1:
            raise NegativeCycleError("negative cycle detected")

    for node in sorted(dist):
        ctx.write_output((node, dist[node]))


TRANSFER_MAGIC = b"TDXN"
TRANSFER_VERSION = 1
_HELLO = struct.Struct("<4sIII")


def transfer_send(ctx: ProgramContext) -> None:
    """Stream this instance's input rows to a receiving cluster over TCP.

    Opens one connection per sending segment, sends a 16-byte hello, then
    the standard frame stream; emits a single row with the count sent.
    """
    host = ctx.param("host", "127.0.0.1")
    port = ctx.int_param("port")
    timeout = ctx.config.transfer_connect_timeout

    sock = None
    give_up = time.monotonic() + timeout
    while sock is None:
        try:
            sock = socket.create_connection((host, port), timeout=1.0)
        except OSError as exc:
            if time.monotonic() >= give_up:
                raise TransferError(
                    f"cannot connect to receiver at {host}:{port} within {timeout:.0f}s: {exc}"
                ) from exc
            time.sleep(0.05)
    try:
        sock.settimeout(60.0)
        sock.sendall(_HELLO.pack(TRANSFER_MAGIC, TRANSFER_VERSION, ctx.segment_id, 0))
        count = 0
        for group in batch_rows(ctx.in_schema, iter(ctx.next_input, None), ctx.config.batch_size):
            sock.sendall(encode_rowgroup(group))
            count += group.row_count
        sock.sendall(encode_end())
    except OSError as exc:
        raise TransferError(f"connection to {host}:{port} failed mid-transfer: {exc}") from exc
    finally:
        sock.close()
    ctx.write_output((count,))


def transfer_recv(ctx: ProgramContext) -> None:
    """Receive rows sent by transfer_send instances and emit them here.

    Instance 0 listens on the given port and accepts one connection per
    sending segment (nsenders); the other instances emit nothing. The input
    stream only triggers scheduling and is drained unread.
    """
    port = ctx.int_param("port")
    nsenders = ctx.int_param("nsenders", 1)
    host = ctx.param("host", "127.0.0.1")

    while ctx.next_input() is not None:
        pass
    if ctx.segment_id != 0:
        return

    try:
        server = socket.create_server((host, port), backlog=max(nsenders, 1))
    except OSError as exc:
        raise TransferError(f"cannot listen on {host}:{port}: {exc}") from exc
    server.settimeout(ctx.config.transfer_accept_timeout)
    seen_senders: set = set()
    try:
        for _ in range(nsenders):
            try:
                conn, _addr = server.accept()
            except socket.timeout:
                raise TransferError(
                    f"no sender connected to port {port} within "
                    f"{ctx.config.transfer_accept_timeout:.0f}s"
                ) from None
            with conn:
                # Blocking mode: makefile buffers get inconsistent under
                # socket timeouts; a dead sender surfaces as EOF instead.
                conn.settimeout(None)
                _receive_stream(ctx, conn, seen_senders)
    finally:
        server.close()


def _receive_stream(ctx: ProgramContext, conn: socket.socket, seen_senders: set) -> None:
    hello = b""
    while len(hello) < _HELLO.size:
        chunk = conn.recv(_HELLO.size - len(hello))
        if not chunk:
            raise TransferError("sender hung up before sending its hello")
        hello += chunk
    magic, version, sender_id, _reserved = _HELLO.unpack(hello)
    if magic != TRANSFER_MAGIC:
        raise TransferError(f"bad transfer hello magic {magic!r}")
    if version != TRANSFER_VERSION:
        raise TransferError(f"unsupported transfer protocol version {version}")
    if sender_id in seen_senders:
        raise TransferError(f"sender segment {sender_id} connected twice")
    seen_senders.add(sender_id)

    stream = conn.makefile("rb")
    try:
        reader = FrameReader(stream, offset=_HELLO.size)
        while True:
            frame = reader.read_frame(allow_eof=False)
            if frame.kind == FRAME_END:
                return
            if frame.kind != FRAME_ROWGROUP:
                raise TransferError(f"unexpected frame type {frame.kind} from sender {sender_id}")
            group = frame.rowgroup
            if not group.schema.compatible_with(ctx.out_schema):
                raise TransferError(
                    f"sender schema ({group.schema}) does not match receiver schema "
                    f"({ctx.out_schema})"
                )
            for row in group.rows:
                ctx.write_output(row)
    finally:
        stream.close()


register_builtin("identity", identity)
register_builtin("modfilter", modfilter)
register_builtin("counter", counter, out_types=[I64])
register_builtin(
    "runs",
    runs,
    in_types=[I64, TXT, I32, F64],
    out_types=[TXT, I32, F64, I32, F64, I32],
)
register_builtin("bfs", bfs, in_types=[I64, I64], out_types=[I64, I64])
register_builtin("sssp", sssp, in_types=[I64, I64, F64], out_types=[I64, F64])
register_builtin("transfer_send", transfer_send, out_types=[I64])
register_builtin("transfer_recv", transfer_recv)
