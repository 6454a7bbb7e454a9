"""Shared-nothing executor: N segment workers plus a master.

Segments are concurrent workers inside one process. A plan compiles into
per-segment pull pipelines; motions are the only cross-worker edges and are
backed by bounded queues of row chunks (one logical mailbox per (motion,
destination)). Plans are trees, queues are bounded, and the gather drains
all senders fairly, so execution is deadlock-free.
"""

from __future__ import annotations

import itertools
import queue
import threading
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .bsp import BspCoordinator
from .config import Config
from .datamodel import (
    DistributionPolicy,
    HashColumns,
    Replicated,
    Row,
    Schema,
    SingletonSegment,
    Value,
    hash_segment,
    sort_rows,
)
from .errors import ExecError, PlanError, SchemaError, TdxError
from .expr import compile_expr
from .plan import (
    FilterNode,
    GatherMotion,
    PlanNode,
    ProjectNode,
    RedistributeMotion,
    SeqScan,
    SortNode,
    TransducerNode,
    WindowRowNumberNode,
    validate_plan,
)
from .transducer import BuiltinMode, run_builtin_instance, run_external_instance


class Table:
    """Named relation whose rows are spread across segments by its policy."""

    def __init__(self, name: str, schema: Schema, policy: DistributionPolicy, nseg: int):
        self.name = name
        self.schema = schema
        self.policy = policy
        self.segments: list[list[Row]] = [[] for _ in range(nseg)]

    def total_rows(self) -> int:
        return sum(len(seg) for seg in self.segments)

    def all_rows(self) -> list[Row]:
        if isinstance(self.policy, Replicated):
            return list(self.segments[0])
        return [row for seg in self.segments for row in seg]

    def segment_counts(self) -> list[int]:
        return [len(seg) for seg in self.segments]


class Cluster:
    """nseg segment workers plus a catalog of distributed tables."""

    def __init__(self, nseg: int):
        if nseg < 1:
            raise ValueError("a cluster needs at least one segment")
        self.nseg = nseg
        self.catalog: dict[str, Table] = {}

    def load_table(
        self,
        name: str,
        schema: Schema,
        policy: DistributionPolicy,
        rows: Iterable[Sequence[Value]] = (),
    ) -> Table:
        """Create a table and distribute its rows per the policy."""
        key = name.lower()
        if key in self.catalog:
            raise SchemaError(f"table {name!r} already exists")
        if isinstance(policy, HashColumns):
            for idx in policy.columns:
                if idx < 0 or idx >= len(schema):
                    raise SchemaError(f"distribution column index {idx} out of range for {name!r}")
        if isinstance(policy, SingletonSegment) and not 0 <= policy.segment < self.nseg:
            raise SchemaError(f"singleton segment {policy.segment} out of range for {self.nseg} segments")
        table = Table(name, schema, policy, self.nseg)
        self.catalog[key] = table
        try:
            self.insert_rows(name, rows)
        except SchemaError:
            del self.catalog[key]
            raise
        return table

    def insert_rows(self, name: str, rows: Iterable[Sequence[Value]]) -> int:
        table = self.get_table(name)
        count = 0
        for i, raw in enumerate(rows):
            row = tuple(raw)
            try:
                table.schema.validate_row(row)
            except SchemaError as exc:
                raise SchemaError(f"table {name!r} row {i}: {exc}") from None
            if isinstance(table.policy, HashColumns):
                table.segments[hash_segment(row, table.policy, self.nseg)].append(row)
            elif isinstance(table.policy, SingletonSegment):
                table.segments[table.policy.segment].append(row)
            else:
                for seg in table.segments:
                    seg.append(row)
            count += 1
        return count

    def get_table(self, name: str) -> Table:
        try:
            return self.catalog[name.lower()]
        except KeyError:
            raise PlanError(f"table {name!r} does not exist") from None

    def has_table(self, name: str) -> bool:
        return name.lower() in self.catalog

    def drop_table(self, name: str) -> None:
        self.catalog.pop(name.lower(), None)

    def scan_node(self, name: str) -> SeqScan:
        table = self.get_table(name)
        return SeqScan(table.name, table.schema, table.total_rows())


class _Cancelled(Exception):
    """Internal: a worker stopped because the query aborted elsewhere."""


class QueryContext:
    """Per-query shared state: abort flag, first error, worker threads."""

    _POLL = 0.05

    def __init__(self, cluster: Cluster, config: Config):
        self.cluster = cluster
        self.config = config
        self.nseg = cluster.nseg
        self.abort = threading.Event()
        self.threads: list[threading.Thread] = []
        self._error: Optional[BaseException] = None
        self._lock = threading.Lock()

    def fail(self, exc: BaseException) -> None:
        with self._lock:
            if self._error is None:
                self._error = exc
        self.abort.set()

    def check(self) -> None:
        if self._error is not None:
            raise self._error

    def spawn(self, fn: Callable[[], None], name: str) -> None:
        def runner():
            try:
                fn()
            except _Cancelled:
                pass
            except BaseException as exc:  # noqa: BLE001 - boundary of a worker thread
                self.fail(exc)

        thread = threading.Thread(target=runner, name=name, daemon=True)
        self.threads.append(thread)
        thread.start()

    def join_all(self, timeout: float = 10.0) -> None:
        for thread in self.threads:
            thread.join(timeout=timeout)


_DONE = object()


class Mailbox:
    """Bounded queue of row chunks with one consumer and N producers."""

    def __init__(self, ctx: QueryContext, producers: int, maxchunks: int = 8):
        self.ctx = ctx
        self.producers = producers
        self.q: queue.Queue = queue.Queue(maxsize=maxchunks)

    def put_chunk(self, chunk: list) -> None:
        while True:
            if self.ctx.abort.is_set():
                raise _Cancelled()
            try:
                self.q.put(chunk, timeout=QueryContext._POLL)
                return
            except queue.Full:
                continue

    def put_done(self) -> None:
        self.put_chunk(_DONE)  # type: ignore[arg-type]

    def rows(self) -> Iterator[Row]:
        remaining = self.producers
        while remaining:
            try:
                token = self.q.get(timeout=QueryContext._POLL)
            except queue.Empty:
                self.ctx.check()
                if self.ctx.abort.is_set():
                    # aborted without a recorded error: the caller abandoned
                    # the query; unwind this consumer quietly
                    raise _Cancelled()
                continue
            if token is _DONE:
                remaining -= 1
            else:
                yield from token
        self.ctx.check()


def _chunks(rows: Iterator[Row], size: int) -> Iterator[list]:
    while True:
        chunk = list(itertools.islice(rows, size))
        if not chunk:
            return
        yield chunk


def _wrap_operator(name: str, it: Iterator[Row]) -> Iterator[Row]:
    """Attach the operator name to runtime evaluation errors."""
    try:
        for row in it:
            yield row
    except (_Cancelled, GeneratorExit):
        raise
    except TdxError as exc:
        # Plain evaluation failures get the operator name; specific errors
        # (transducer, negative cycle, ...) already carry their context.
        if type(exc) is ExecError:
            raise ExecError(f"{name}: {exc}") from exc
        raise
    except Exception as exc:
        raise ExecError(f"{name}: {exc}") from exc


def _compile(node: PlanNode, ctx: QueryContext) -> list[Iterator[Row]]:
    """Compile a plan node into its per-worker output streams.

    The list has nseg entries while the node is segment-parallel and exactly
    one entry above the gather motion.
    """
    if isinstance(node, SeqScan):
        table = ctx.cluster.get_table(node.table)
        if isinstance(table.policy, Replicated):
            # Every segment holds a full copy; read exactly one of them so a
            # scan still produces each row once.
            return [iter(table.segments[0] if s == 0 else ()) for s in range(ctx.nseg)]
        return [iter(table.segments[s]) for s in range(ctx.nseg)]

    if isinstance(node, FilterNode):
        streams = _compile(node.child, ctx)
        pred = compile_expr(node.predicate, node.child.schema)

        def filtered(src: Iterator[Row]) -> Iterator[Row]:
            for row in src:
                if pred(row) is True:
                    yield row

        return [_wrap_operator("Filter", filtered(s)) for s in streams]

    if isinstance(node, ProjectNode):
        streams = _compile(node.child, ctx)
        fns = [compile_expr(e, node.child.schema) for e in node.exprs]

        def projected(src: Iterator[Row]) -> Iterator[Row]:
            for row in src:
                yield tuple(fn(row) for fn in fns)

        return [_wrap_operator("Project", projected(s)) for s in streams]

    if isinstance(node, SortNode):
        streams = _compile(node.child, ctx)
        schema = node.child.schema
        keys = [(schema.index_of(k.column), k.ascending) for k in node.keys]

        def sorted_stream(src: Iterator[Row]) -> Iterator[Row]:
            yield from sort_rows(src, keys)

        return [_wrap_operator("Sort", sorted_stream(s)) for s in streams]

    if isinstance(node, WindowRowNumberNode):
        streams = _compile(node.child, ctx)
        schema = node.child.schema
        part_idx = [schema.index_of(n) for n in node.partition_by]
        keys = [(i, True) for i in part_idx] + [
            (schema.index_of(k.column), k.ascending) for k in node.order_by
        ]

        def numbered(src: Iterator[Row]) -> Iterator[Row]:
            current = object()
            counter = 0
            for row in sort_rows(src, keys):
                part = tuple(row[i] for i in part_idx)
                if part != current:
                    current = part
                    counter = 0
                counter += 1
                yield row + (counter,)

        return [_wrap_operator("WindowAgg", numbered(s)) for s in streams]

    if isinstance(node, RedistributeMotion):
        streams = _compile(node.child, ctx)
        policy = node.policy
        nseg = ctx.nseg
        boxes = [Mailbox(ctx, producers=len(streams)) for _ in range(nseg)]
        batch = ctx.config.batch_size

        def push(src: Iterator[Row], sender: int) -> None:
            pending: list[list] = [[] for _ in range(nseg)]
            for row in src:
                dest = hash_segment(row, policy, nseg)
                bucket = pending[dest]
                bucket.append(row)
                if len(bucket) >= batch:
                    boxes[dest].put_chunk(bucket)
                    pending[dest] = []
            for dest, bucket in enumerate(pending):
                if bucket:
                    boxes[dest].put_chunk(bucket)
            for box in boxes:
                box.put_done()

        for sender, src in enumerate(streams):
            ctx.spawn(lambda src=src, sender=sender: push(src, sender), f"redist-{sender}")
        return [box.rows() for box in boxes]

    if isinstance(node, GatherMotion):
        streams = _compile(node.child, ctx)
        box = Mailbox(ctx, producers=len(streams))
        batch = ctx.config.batch_size

        def push(src: Iterator[Row]) -> None:
            for chunk in _chunks(src, batch):
                box.put_chunk(chunk)
            box.put_done()

        for sender, src in enumerate(streams):
            ctx.spawn(lambda src=src: push(src), f"gather-{sender}")
        return [box.rows()]

    if isinstance(node, TransducerNode):
        streams = _compile(node.child, ctx)
        spec = node.spec
        coordinator = BspCoordinator(
            ctx.nseg, timeout=ctx.config.bsp_sync_timeout, abort_event=ctx.abort
        )
        input_order = _input_order_hint(node.child)

        def instance(src: Iterator[Row], seg: int) -> Iterator[Row]:
            if isinstance(spec.mode, BuiltinMode):
                yield from run_builtin_instance(
                    spec,
                    segment_id=seg,
                    nseg=ctx.nseg,
                    input_iter=src,
                    config=ctx.config,
                    bsp_coordinator=coordinator,
                    input_order=input_order,
                )
            else:
                yield from run_external_instance(
                    spec,
                    segment_id=seg,
                    nseg=ctx.nseg,
                    input_iter=src,
                    config=ctx.config,
                    abort_event=ctx.abort,
                )

        return [instance(src, seg) for seg, src in enumerate(streams)]

    raise PlanError(f"cannot execute plan node {type(node).__name__}")


def _input_order_hint(node: PlanNode) -> Optional[tuple]:
    """Sort keys guaranteed on the transducer input, if any (a hint only)."""
    while isinstance(node, ProjectNode):
        node = node.child
    if isinstance(node, SortNode):
        return tuple((k.column, k.ascending) for k in node.keys)
    if isinstance(node, WindowRowNumberNode):
        keys = [(c, True) for c in node.partition_by]
        keys += [(k.column, k.ascending) for k in node.order_by]
        return tuple(keys)
    return None


def execute(plan: PlanNode, cluster: Cluster, config: Optional[Config] = None) -> Iterator[Row]:
    """Run a plan and stream the result rows at the master.

    If the root is segment-parallel an implicit gather collects the streams;
    ordering across segments is arbitrary unless a sort sits above the
    gather. Errors anywhere abort the whole query.
    """
    if config is None:
        config = Config(nseg=cluster.nseg)
    validate_plan(plan)
    ctx = QueryContext(cluster, config)

    def master() -> Iterator[Row]:
        try:
            streams = _compile(plan, ctx)
            if len(streams) == 1:
                source = streams[0]
            else:
                box = Mailbox(ctx, producers=len(streams))
                batch = config.batch_size

                def push(src: Iterator[Row]) -> None:
                    for chunk in _chunks(src, batch):
                        box.put_chunk(chunk)
                    box.put_done()

                for seg, src in enumerate(streams):
                    ctx.spawn(lambda src=src: push(src), f"final-gather-{seg}")
                source = box.rows()
            for row in source:
                yield row
            ctx.check()
        except GeneratorExit:
            # the caller abandoned the stream: abort without recording an
            # error so workers unwind as cancelled, not failed
            raise
        except BaseException as exc:
            ctx.fail(exc)
            raise
        finally:
            ctx.abort.set()
            ctx.join_all()

    return master()


def execute_all(plan: PlanNode, cluster: Cluster, config: Optional[Config] = None) -> list[Row]:
    return list(execute(plan, cluster, config))
