"""Row expressions: literals, column refs, arithmetic, comparisons, CASE.

Expressions are typed statically against an input schema and compiled to
closures over row tuples. Null propagates through arithmetic and
comparisons; AND/OR/NOT follow three-valued logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .datamodel import (
    ColumnType,
    Row,
    Schema,
    Value,
    type_name,
)
from .errors import ExecError, PlanError


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class ColumnRef:
    name: str
    table: Optional[str] = None


@dataclass(frozen=True)
class Arith:
    op: str  # + - * / %
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # = <> < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Logical:
    op: str  # and | or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Negate:
    operand: "Expr"


@dataclass(frozen=True)
class Case:
    whens: tuple[tuple["Expr", "Expr"], ...]
    default: Optional["Expr"]


Expr = Union[Literal, ColumnRef, Arith, Compare, Logical, Not, Negate, Case]

_NUMERIC = (ColumnType.INT32, ColumnType.INT64, ColumnType.FLOAT64)


def literal_type(value: Value) -> Optional[ColumnType]:
    """Declared type of a literal; None for the untyped NULL literal."""
    if value is None:
        return None
    if isinstance(value, bool):
        return ColumnType.BOOL
    if isinstance(value, int):
        if -(2**31) <= value <= 2**31 - 1:
            return ColumnType.INT32
        return ColumnType.INT64
    if isinstance(value, float):
        return ColumnType.FLOAT64
    if isinstance(value, str):
        return ColumnType.TEXT
    raise PlanError(f"unsupported literal {value!r}")


def promote_numeric(a: ColumnType, b: ColumnType) -> ColumnType:
    order = {ColumnType.INT32: 0, ColumnType.INT64: 1, ColumnType.FLOAT64: 2}
    return a if order[a] >= order[b] else b


def unify_types(a: Optional[ColumnType], b: Optional[ColumnType], what: str) -> Optional[ColumnType]:
    """Common type of two branches; None (untyped null) adopts the other."""
    if a is None:
        return b
    if b is None:
        return a
    if a == b:
        return a
    if a in _NUMERIC and b in _NUMERIC:
        return promote_numeric(a, b)
    raise PlanError(f"{what}: incompatible types {type_name(a)} and {type_name(b)}")


def infer_type(expr: Expr, schema: Schema) -> Optional[ColumnType]:
    """Static type of an expression; None means the untyped NULL literal."""
    if isinstance(expr, Literal):
        return literal_type(expr.value)
    if isinstance(expr, ColumnRef):
        return schema.columns[schema.index_of(expr.name)].type
    if isinstance(expr, Arith):
        lt = infer_type(expr.left, schema)
        rt = infer_type(expr.right, schema)
        for t in (lt, rt):
            if t is not None and t not in _NUMERIC:
                raise PlanError(f"operator {expr.op!r} needs numeric operands, got {type_name(t)}")
        if lt is None or rt is None:
            return lt if rt is None else rt
        return promote_numeric(lt, rt)
    if isinstance(expr, Compare):
        lt = infer_type(expr.left, schema)
        rt = infer_type(expr.right, schema)
        if lt is not None and rt is not None and lt != rt:
            if not (lt in _NUMERIC and rt in _NUMERIC):
                raise PlanError(
                    f"cannot compare {type_name(lt)} with {type_name(rt)} using {expr.op!r}"
                )
        return ColumnType.BOOL
    if isinstance(expr, Logical):
        for side in (expr.left, expr.right):
            t = infer_type(side, schema)
            if t is not None and t is not ColumnType.BOOL:
                raise PlanError(f"{expr.op.upper()} needs boolean operands, got {type_name(t)}")
        return ColumnType.BOOL
    if isinstance(expr, Not):
        t = infer_type(expr.operand, schema)
        if t is not None and t is not ColumnType.BOOL:
            raise PlanError(f"NOT needs a boolean operand, got {type_name(t)}")
        return ColumnType.BOOL
    if isinstance(expr, Negate):
        t = infer_type(expr.operand, schema)
        if t is not None and t not in _NUMERIC:
            raise PlanError(f"unary minus needs a numeric operand, got {type_name(t)}")
        return t
    if isinstance(expr, Case):
        result: Optional[ColumnType] = None
        for cond, then in expr.whens:
            ct = infer_type(cond, schema)
            if ct is not None and ct is not ColumnType.BOOL:
                raise PlanError(f"CASE condition must be boolean, got {type_name(ct)}")
            result = unify_types(result, infer_type(then, schema), "CASE branches")
        if expr.default is not None:
            result = unify_types(result, infer_type(expr.default, schema), "CASE branches")
        return result
    raise PlanError(f"cannot type expression {expr!r}")


def int_div(a: int, b: int) -> int:
    if b == 0:
        raise ExecError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def int_mod(a: int, b: int) -> int:
    if b == 0:
        raise ExecError("division by zero")
    r = abs(a) % abs(b)
    return r if a >= 0 else -r


def compile_expr(expr: Expr, schema: Schema) -> Callable[[Row], Value]:
    """Compile to a closure; assumes infer_type already accepted the expr."""
    if isinstance(expr, Literal):
        value = expr.value
        return lambda row: value
    if isinstance(expr, ColumnRef):
        idx = schema.index_of(expr.name)
        return lambda row: row[idx]
    if isinstance(expr, Arith):
        lf = compile_expr(expr.left, schema)
        rf = compile_expr(expr.right, schema)
        lt = infer_type(expr.left, schema)
        rt = infer_type(expr.right, schema)
        both_int = (
            lt in (ColumnType.INT32, ColumnType.INT64) or lt is None
        ) and (rt in (ColumnType.INT32, ColumnType.INT64) or rt is None)
        op = expr.op

        def arith(row, lf=lf, rf=rf, op=op, both_int=both_int):
            a = lf(row)
            b = rf(row)
            if a is None or b is None:
                return None
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if both_int:
                    return int_div(a, b)
                if b == 0:
                    raise ExecError("division by zero")
                return a / b
            if op == "%":
                if both_int:
                    return int_mod(a, b)
                if b == 0:
                    raise ExecError("division by zero")
                return math.fmod(a, b)
            raise ExecError(f"unknown arithmetic operator {op!r}")

        return arith
    if isinstance(expr, Compare):
        lf = compile_expr(expr.left, schema)
        rf = compile_expr(expr.right, schema)
        op = expr.op

        def compare(row, lf=lf, rf=rf, op=op):
            a = lf(row)
            b = rf(row)
            if a is None or b is None:
                return None
            if op == "=":
                return a == b
            if op == "<>":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
            raise ExecError(f"unknown comparison operator {op!r}")

        return compare
    if isinstance(expr, Logical):
        lf = compile_expr(expr.left, schema)
        rf = compile_expr(expr.right, schema)
        if expr.op == "and":

            def kleene_and(row, lf=lf, rf=rf):
                a = lf(row)
                if a is False:
                    return False
                b = rf(row)
                if b is False:
                    return False
                if a is None or b is None:
                    return None
                return True

            return kleene_and

        def kleene_or(row, lf=lf, rf=rf):
            a = lf(row)
            if a is True:
                return True
            b = rf(row)
            if b is True:
                return True
            if a is None or b is None:
                return None
            return False

        return kleene_or
    if isinstance(expr, Not):
        f = compile_expr(expr.operand, schema)

        def negation(row, f=f):
            v = f(row)
            return None if v is None else not v

        return negation
    if isinstance(expr, Negate):
        f = compile_expr(expr.operand, schema)

        def neg(row, f=f):
            v = f(row)
            return None if v is None else -v

        return neg
    if isinstance(expr, Case):
        arms = [
            (compile_expr(cond, schema), compile_expr(then, schema)) for cond, then in expr.whens
        ]
        default = compile_expr(expr.default, schema) if expr.default is not None else None

        def case(row, arms=arms, default=default):
            for cond_f, then_f in arms:
                if cond_f(row) is True:
                    return then_f(row)
            return default(row) if default is not None else None

        return case
    raise PlanError(f"cannot compile expression {expr!r}")


def output_name(expr: Expr, position: int) -> str:
    """Default output column name for an unaliased select expression."""
    if isinstance(expr, ColumnRef):
        return expr.name
    return f"col{position}"
