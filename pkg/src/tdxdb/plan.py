"""Physical plan nodes and the explain pretty-printer.

Every node knows its output schema and carries row/width estimates. Scan
estimates come from the catalog; Filter applies a fixed 1/3 selectivity;
everything else (including Transducer, which has no stats formula of its
own) passes its input estimate through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .datamodel import (
    Column,
    ColumnType,
    DistributionPolicy,
    HashColumns,
    Schema,
)
from .errors import PlanError
from .expr import Expr, infer_type
from .transducer import TransducerSpec

FILTER_SELECTIVITY = 1.0 / 3.0


@dataclass
class PlanNode:
    schema: Schema = field(init=False)
    est_rows: float = field(init=False)

    @property
    def children(self) -> tuple["PlanNode", ...]:
        return ()

    @property
    def est_width(self) -> int:
        return self.schema.row_width()

    def node_label(self, nseg: int) -> str:
        return type(self).__name__


@dataclass
class SeqScan(PlanNode):
    table: str
    table_schema: Schema
    table_rows: int

    def __post_init__(self):
        self.schema = self.table_schema
        self.est_rows = float(self.table_rows)

    def node_label(self, nseg: int) -> str:
        return f"Seq Scan on {self.table}"


@dataclass
class FilterNode(PlanNode):
    child: PlanNode
    predicate: Expr

    def __post_init__(self):
        ptype = infer_type(self.predicate, self.child.schema)
        if ptype is not None and ptype is not ColumnType.BOOL:
            raise PlanError("filter predicate must be boolean")
        self.schema = self.child.schema
        self.est_rows = self.child.est_rows * FILTER_SELECTIVITY

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return "Filter"


@dataclass
class ProjectNode(PlanNode):
    child: PlanNode
    exprs: tuple[Expr, ...]
    names: tuple[str, ...]
    # When set, overrides the inferred output schema (the planner uses this
    # to pin a transducer's declared input types onto the projection).
    schema_override: "Schema | None" = None

    def __post_init__(self):
        if len(self.exprs) != len(self.names):
            raise PlanError("projection names and expressions differ in count")
        if self.schema_override is not None:
            if len(self.schema_override) != len(self.exprs):
                raise PlanError("projection schema override has the wrong column count")
            self.schema = self.schema_override
        else:
            cols = []
            for expression, name in zip(self.exprs, self.names):
                ctype = infer_type(expression, self.child.schema)
                # An untyped NULL projects as text, the most permissive display type.
                cols.append(Column(name, ctype if ctype is not None else ColumnType.TEXT))
            self.schema = Schema(tuple(cols))
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return "Project"


@dataclass(frozen=True)
class SortKey:
    column: str
    ascending: bool = True


@dataclass
class SortNode(PlanNode):
    child: PlanNode
    keys: tuple[SortKey, ...]

    def __post_init__(self):
        if not self.keys:
            raise PlanError("sort needs at least one key")
        for key in self.keys:
            self.child.schema.index_of(key.column)
        self.schema = self.child.schema
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        cols = ", ".join(k.column + ("" if k.ascending else " desc") for k in self.keys)
        return f"Sort ({cols})"


@dataclass
class WindowRowNumberNode(PlanNode):
    """Appends an int64 row_number column, numbering within each partition."""

    child: PlanNode
    partition_by: tuple[str, ...]
    order_by: tuple[SortKey, ...]
    out_column: str = "row_number"

    def __post_init__(self):
        for name in self.partition_by:
            self.child.schema.index_of(name)
        for key in self.order_by:
            self.child.schema.index_of(key.column)
        if self.child.schema.has_column(self.out_column):
            raise PlanError(f"window output column {self.out_column!r} already exists in input")
        self.schema = Schema(self.child.schema.columns + (Column(self.out_column, ColumnType.INT64),))
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return "WindowAgg (row_number)"


@dataclass
class RedistributeMotion(PlanNode):
    child: PlanNode
    policy: DistributionPolicy

    def __post_init__(self):
        if not isinstance(self.policy, HashColumns):
            raise PlanError("redistribute motion requires a hash policy")
        for idx in self.policy.columns:
            if idx < 0 or idx >= len(self.child.schema):
                raise PlanError(f"redistribute column index {idx} out of range")
        self.schema = self.child.schema
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return f"Redistribute Motion {nseg}:{nseg}"


@dataclass
class GatherMotion(PlanNode):
    child: PlanNode

    def __post_init__(self):
        self.schema = self.child.schema
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return f"Gather Motion {nseg}:1"


@dataclass
class TransducerNode(PlanNode):
    child: PlanNode
    spec: TransducerSpec

    def __post_init__(self):
        # Types must line up positionally; the input column names seen by the
        # program come from the script's directive block, not the child plan.
        if self.child.schema.types != self.spec.in_schema.types:
            raise PlanError(
                f"transducer input mismatch: child produces ({self.child.schema}), "
                f"script declares ({self.spec.in_schema})"
            )
        self.schema = self.spec.out_schema
        self.est_rows = self.child.est_rows

    @property
    def children(self):
        return (self.child,)

    def node_label(self, nseg: int) -> str:
        return "Transducer"


def validate_plan(root: PlanNode) -> None:
    """Check motion placement: at most one gather per root-to-leaf path, and
    redistribute/transducer only in the segment-parallel part beneath it."""

    def check(node: PlanNode, master_side: bool) -> None:
        if isinstance(node, GatherMotion):
            if not master_side:
                raise PlanError("gather motion appears twice on one root-to-leaf path")
            check(node.child, master_side=False)
            return
        if master_side and isinstance(node, (RedistributeMotion, TransducerNode)):
            raise PlanError(f"{type(node).__name__} must sit below the gather motion")
        for child in node.children:
            check(child, master_side)

    check(root, master_side=_contains_gather(root))


def _contains_gather(node: PlanNode) -> bool:
    if isinstance(node, GatherMotion):
        return True
    return any(_contains_gather(c) for c in node.children)


def explain(root: PlanNode, nseg: int) -> str:
    """Render the plan tree, one line per node, two-space indent per depth.

    Cost numbers are placeholders proportional to the row estimate; rows and
    width come from the per-node estimates. Below a gather the row estimate
    is shown per segment.
    """
    lines: list[str] = []
    slice_counter = [0]

    def emit(node: PlanNode, depth: int, parallel: bool) -> None:
        label = node.node_label(nseg)
        if isinstance(node, (GatherMotion, RedistributeMotion)):
            slice_counter[0] += 1
            label += f"  (slice{slice_counter[0]}; segments: {nseg})"
        rows = node.est_rows
        if parallel and nseg > 0:
            rows = rows / nseg
        rows_shown = max(1, int(round(rows))) if node.est_rows > 0 else 0
        cost = 0.01 * node.est_rows + 2.0
        prefix = "  " * depth + ("-> " if depth else "")
        lines.append(f"{prefix}{label}  (cost=0.00..{cost:.2f} rows={rows_shown} width={node.est_width})")
        child_parallel = parallel or isinstance(node, GatherMotion)
        for child in node.children:
            emit(child, depth + 1, child_parallel)

    emit(root, 0, parallel=not _contains_gather(root))
    return "\n".join(lines)
