"""Plans parsed SELECT statements into physical plan trees.

The transducer is an optimizer barrier: the subtree computing its input and
the query consuming its output are planned independently, and no predicate
or projection ever crosses the transducer node. A window in the input
subquery plants a redistribute on the partition columns plus a sort, so
every transducer instance sees whole partitions in order-key order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .datamodel import HashColumns, Schema
from .engine import Cluster
from .errors import PlanError
from .expr import (
    Arith,
    Case,
    ColumnRef,
    Compare,
    Expr,
    Literal,
    Logical,
    Negate,
    Not,
    infer_type,
    output_name,
)
from .plan import (
    FilterNode,
    GatherMotion,
    PlanNode,
    ProjectNode,
    RedistributeMotion,
    SortKey,
    SortNode,
    TransducerNode,
    WindowRowNumberNode,
)
from .sqlfront import (
    Select,
    SelectItem,
    Star,
    SubqueryRef,
    TableRef,
    TransducerCall,
    TransducerCol,
    WindowCall,
    extract_io_schemas,
    parse,
    parse_exec_header,
)
from .transducer import TransducerSpec


@dataclass
class PlannedSelect:
    plan: PlanNode
    # Sort keys (output column names) guaranteed on this subtree's streams,
    # used to enforce partition/order under a consuming transducer.
    window_sort: Optional[tuple[tuple[str, bool], ...]] = None


def plan_sql(sql: str, cluster: Cluster) -> PlanNode:
    return plan_query(parse(sql), cluster)


def plan_query(stmt: Select, cluster: Cluster) -> PlanNode:
    """Plan a full statement; the master gathers the root's streams."""
    planned = _plan_select(stmt, cluster, {})
    return GatherMotion(planned.plan)


def compile_transducer_spec(body: str) -> TransducerSpec:
    mode = parse_exec_header(body)
    in_schema, out_schema = extract_io_schemas(body)
    return TransducerSpec(in_schema, out_schema, mode, body)


_CteEnv = dict  # name -> (Select, env visible at its definition)


def _plan_select(stmt: Select, cluster: Cluster, ctes: _CteEnv) -> PlannedSelect:
    # Each WITH entry sees only the entries defined before it (non-recursive),
    # and inner entries shadow outer ones of the same name.
    env = dict(ctes)
    for cte in stmt.ctes:
        env[cte.name.lower()] = (cte.query, dict(env))

    base = _plan_from(stmt.from_item, cluster, env)
    scope_name, base_plan = base.scope, base.planned.plan

    where = None
    if stmt.where is not None:
        where = _resolve(stmt.where, scope_name, base_plan.schema)
        base_plan = FilterNode(base_plan, where)

    if stmt.transducer_item() is not None:
        return _plan_transducer_select(stmt, base_plan, scope_name, base.planned.window_sort)
    return _plan_plain_select(stmt, base_plan, scope_name)


@dataclass
class _FromResult:
    planned: PlannedSelect
    scope: str


def _plan_from(from_item, cluster: Cluster, env: _CteEnv) -> _FromResult:
    if isinstance(from_item, TableRef):
        key = from_item.name.lower()
        if key in env:
            query, def_env = env[key]
            planned = _plan_select(query, cluster, def_env)
            return _FromResult(planned, from_item.alias or from_item.name)
        scan = cluster.scan_node(from_item.name)
        return _FromResult(PlannedSelect(scan), from_item.alias or from_item.name)
    if isinstance(from_item, SubqueryRef):
        planned = _plan_select(from_item.query, cluster, env)
        return _FromResult(planned, from_item.alias)
    raise PlanError(f"unsupported FROM item {from_item!r}")


def _resolve(expr: Expr, scope: str, schema: Schema) -> Expr:
    """Strip table qualifiers, checking they match the FROM scope, and
    verify every column exists."""
    if isinstance(expr, Literal):
        return expr
    if isinstance(expr, ColumnRef):
        if expr.table is not None and expr.table.lower() != scope.lower():
            raise PlanError(f"unknown table alias {expr.table!r} (FROM binds {scope!r})")
        if not schema.has_column(expr.name):
            raise PlanError(f"no column named {expr.name!r} (have: {', '.join(schema.names)})")
        return ColumnRef(expr.name)
    if isinstance(expr, Arith):
        return Arith(expr.op, _resolve(expr.left, scope, schema), _resolve(expr.right, scope, schema))
    if isinstance(expr, Compare):
        return Compare(expr.op, _resolve(expr.left, scope, schema), _resolve(expr.right, scope, schema))
    if isinstance(expr, Logical):
        return Logical(expr.op, _resolve(expr.left, scope, schema), _resolve(expr.right, scope, schema))
    if isinstance(expr, Not):
        return Not(_resolve(expr.operand, scope, schema))
    if isinstance(expr, Negate):
        return Negate(_resolve(expr.operand, scope, schema))
    if isinstance(expr, Case):
        whens = tuple(
            (_resolve(c, scope, schema), _resolve(r, scope, schema)) for c, r in expr.whens
        )
        default = _resolve(expr.default, scope, schema) if expr.default is not None else None
        return Case(whens, default)
    raise PlanError(f"cannot resolve expression {expr!r}")


def _plan_plain_select(stmt: Select, base_plan: PlanNode, scope: str) -> PlannedSelect:
    window_items = [i for i in stmt.items if isinstance(i.value, WindowCall)]
    if len(window_items) > 1:
        raise PlanError("at most one row_number() window call per SELECT")

    child = base_plan
    window_col: Optional[str] = None
    partition_names: tuple[str, ...] = ()
    order_keys: tuple[SortKey, ...] = ()

    if window_items:
        window = window_items[0].value
        partition_refs = [_resolve(c, scope, base_plan.schema) for c in window.partition_by]
        order_refs = [
            (_resolve(k.column, scope, base_plan.schema), k.ascending) for k in window.order_by
        ]
        partition_names = tuple(ref.name for ref in partition_refs)
        order_keys = tuple(SortKey(ref.name, asc) for ref, asc in order_refs)
        if partition_names:
            indices = tuple(base_plan.schema.index_of(n) for n in partition_names)
            child = RedistributeMotion(child, HashColumns(indices))
        window_col = _free_name(windowed_name(window_items[0]), base_plan.schema)
        child = WindowRowNumberNode(child, partition_names, order_keys, out_column=window_col)

    exprs: list[Expr] = []
    names: list[str] = []
    for item in stmt.items:
        value = item.value
        if isinstance(value, WindowCall):
            exprs.append(ColumnRef(window_col))
            names.append(windowed_name(item))
        elif isinstance(value, Star):
            if value.table is not None and value.table.lower() != scope.lower():
                raise PlanError(f"unknown table alias {value.table!r} in star projection")
            for col in base_plan.schema:
                exprs.append(ColumnRef(col.name))
                names.append(col.name)
        elif isinstance(value, (TransducerCol, TransducerCall)):
            raise PlanError("transducer items are not valid here")
        else:
            resolved = _resolve(value, scope, child.schema)
            exprs.append(resolved)
            names.append(item.alias or output_name(resolved, len(names) + 1))

    try:
        project = _project_or_elide(child, tuple(exprs), tuple(names))
    except Exception as exc:
        raise PlanError(f"cannot project select list: {exc}") from None

    window_sort = None
    if window_items:
        window_sort = _surviving_sort(partition_names, order_keys, exprs, names)
    return PlannedSelect(project, window_sort)


def windowed_name(item: SelectItem) -> str:
    return item.alias or "row_number"


def _free_name(candidate: str, schema: Schema) -> str:
    name = candidate
    suffix = 1
    while schema.has_column(name):
        suffix += 1
        name = f"{candidate}_{suffix}"
    return name


def _project_or_elide(child: PlanNode, exprs: tuple, names: tuple) -> PlanNode:
    """Skip an identity projection: all columns, in order, keeping names."""
    if len(exprs) == len(child.schema) and all(
        isinstance(e, ColumnRef)
        and e.name.lower() == col.name.lower()
        and name.lower() == col.name.lower()
        for e, name, col in zip(exprs, names, child.schema)
    ):
        return child
    return ProjectNode(child, exprs, names)


def _surviving_sort(partition_names, order_keys, exprs, names) -> Optional[tuple]:
    """Map window partition/order columns through the projection; None if
    any of them is not projected plainly."""
    mapping = {}
    for expr, name in zip(exprs, names):
        if isinstance(expr, ColumnRef) and expr.name.lower() not in mapping:
            mapping[expr.name.lower()] = name
    keys = []
    for col in partition_names:
        if col.lower() not in mapping:
            return None
        keys.append((mapping[col.lower()], True))
    for key in order_keys:
        if key.column.lower() not in mapping:
            return None
        keys.append((mapping[key.column.lower()], key.ascending))
    return tuple(keys)


def _plan_transducer_select(
    stmt: Select,
    base_plan: PlanNode,
    scope: str,
    input_window_sort: Optional[tuple],
) -> PlannedSelect:
    if any(isinstance(i.value, WindowCall) for i in stmt.items):
        raise PlanError(
            "a window call cannot share a SELECT with transducer(); put it in the input subquery"
        )
    items = list(stmt.items)
    t_index = next(i for i, item in enumerate(items) if isinstance(item.value, TransducerCall))
    head, tail = items[:t_index], items[t_index + 1 :]
    for item in head:
        if not isinstance(item.value, TransducerCol):
            raise PlanError("only transducer_col projections may precede transducer()")
    for item in tail:
        if isinstance(item.value, (TransducerCol, TransducerCall)):
            raise PlanError("transducer_col projections must precede the transducer() call")

    spec = compile_transducer_spec(items[t_index].value.body)
    _check_col_projections(head, spec.out_schema)

    # Trailing expressions are the transducer's input columns, in order.
    inputs: list[Expr] = []
    for item in tail:
        value = item.value
        if isinstance(value, Star):
            if value.table is not None and value.table.lower() != scope.lower():
                raise PlanError(f"unknown table alias {value.table!r} in star projection")
            inputs.extend(ColumnRef(col.name) for col in base_plan.schema)
        else:
            inputs.append(_resolve(value, scope, base_plan.schema))
    if len(inputs) != len(spec.in_schema):
        raise PlanError(
            f"transducer declares {len(spec.in_schema)} input columns but the select "
            f"list supplies {len(inputs)}"
        )
    for pos, (expr, col) in enumerate(zip(inputs, spec.in_schema), start=1):
        etype = infer_type(expr, base_plan.schema)
        if etype is not None and etype != col.type:
            raise PlanError(
                f"transducer input {pos} has type {etype.name.lower()}, "
                f"script declares {col.name} {col.type.name.lower()}"
            )

    child = base_plan
    if input_window_sort:
        child = SortNode(child, tuple(SortKey(name, asc) for name, asc in input_window_sort))

    if not _is_identity_types(inputs, child.schema, spec.in_schema):
        child = ProjectNode(
            child, tuple(inputs), spec.in_schema.names, schema_override=spec.in_schema
        )
    node = TransducerNode(child, spec)

    out_names = spec.out_schema.names
    exprs = tuple(ColumnRef(out_names[item.value.ordinal - 1]) for item in head)
    names = tuple(
        item.alias or out_names[item.value.ordinal - 1] for item in head
    )
    ordinals = [item.value.ordinal for item in head]
    if ordinals == list(range(1, len(out_names) + 1)) and all(
        n.lower() == out_names[i].lower() for i, n in enumerate(names)
    ):
        return PlannedSelect(node)
    try:
        return PlannedSelect(ProjectNode(node, exprs, names))
    except Exception as exc:
        raise PlanError(f"cannot project transducer output: {exc}") from None


def _check_col_projections(head, out_schema: Schema) -> None:
    for item in head:
        col: TransducerCol = item.value
        if col.ordinal > len(out_schema):
            raise PlanError(
                f"transducer_col ordinal {col.ordinal} exceeds the {len(out_schema)} "
                f"declared output columns"
            )
        declared = out_schema.columns[col.ordinal - 1].type
        if col.col_type != declared:
            raise PlanError(
                f"transducer_col_{col.col_type.name.lower()}({col.ordinal}) does not match "
                f"output column {col.ordinal} of type {declared.name.lower()}"
            )


def _is_identity_types(exprs, schema: Schema, target: Schema) -> bool:
    """True when the projection passes every child column through in order
    with exactly the target types, so the node can be elided."""
    if len(exprs) != len(schema) or schema.types != target.types:
        return False
    return all(
        isinstance(e, ColumnRef) and e.name.lower() == col.name.lower()
        for e, col in zip(exprs, schema)
    )
