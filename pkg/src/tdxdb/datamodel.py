"""Core value, schema, row, and row-group types shared by every module.

Values are plain Python objects (None, bool, int, float, str); the schema
carries the declared column types. Rows are tuples and are treated as
immutable everywhere, so they can be shared freely between segment workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

from .errors import SchemaError, TypeMismatchError

Value = Union[None, bool, int, float, str]
Row = tuple

INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1
INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1


class ColumnType(Enum):
    """Supported column types; enum values double as wire type tags."""

    INT32 = 1
    INT64 = 2
    FLOAT64 = 3
    TEXT = 4
    BOOL = 5


# Spelling aliases accepted wherever a type name is parsed (directive blocks,
# schema specs). float32/float4 widen losslessly into float64 at this scale.
_TYPE_ALIASES = {
    "int32": ColumnType.INT32,
    "int4": ColumnType.INT32,
    "int64": ColumnType.INT64,
    "int8": ColumnType.INT64,
    "float64": ColumnType.FLOAT64,
    "float8": ColumnType.FLOAT64,
    "float32": ColumnType.FLOAT64,
    "float4": ColumnType.FLOAT64,
    "text": ColumnType.TEXT,
    "bool": ColumnType.BOOL,
    "boolean": ColumnType.BOOL,
}

_TYPE_WIDTH = {
    ColumnType.INT32: 4,
    ColumnType.INT64: 8,
    ColumnType.FLOAT64: 8,
    ColumnType.TEXT: 16,
    ColumnType.BOOL: 1,
}


def parse_type_name(name: str) -> ColumnType:
    try:
        return _TYPE_ALIASES[name.strip().lower()]
    except KeyError:
        raise SchemaError(f"unknown column type {name!r}") from None


def type_name(ctype: ColumnType) -> str:
    return ctype.name.lower()


def value_matches(value: Value, ctype: ColumnType) -> bool:
    """True if a cell value is legal for a column of the given type."""
    if value is None:
        return True
    if ctype is ColumnType.BOOL:
        return isinstance(value, bool)
    if ctype is ColumnType.INT32:
        return isinstance(value, int) and not isinstance(value, bool) and INT32_MIN <= value <= INT32_MAX
    if ctype is ColumnType.INT64:
        return isinstance(value, int) and not isinstance(value, bool) and INT64_MIN <= value <= INT64_MAX
    if ctype is ColumnType.FLOAT64:
        return isinstance(value, float)
    if ctype is ColumnType.TEXT:
        return isinstance(value, str)
    raise AssertionError(ctype)


class Column(NamedTuple):
    name: str
    type: ColumnType


@dataclass(frozen=True)
class Schema:
    """Ordered list of named, typed columns.

    Names are unique case-insensitively and there is at least one column.
    """

    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("schema must have at least one column")
        seen = set()
        for col in self.columns:
            if not col.name:
                raise SchemaError("empty column name")
            key = col.name.lower()
            if key in seen:
                raise SchemaError(f"duplicate column name {col.name!r}")
            seen.add(key)

    @classmethod
    def of(cls, *pairs: tuple[str, ColumnType | str]) -> "Schema":
        cols = []
        for name, ctype in pairs:
            if isinstance(ctype, str):
                ctype = parse_type_name(ctype)
            cols.append(Column(name, ctype))
        return cls(tuple(cols))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def types(self) -> tuple[ColumnType, ...]:
        return tuple(c.type for c in self.columns)

    def index_of(self, name: str) -> int:
        key = name.lower()
        for i, col in enumerate(self.columns):
            if col.name.lower() == key:
                return i
        raise SchemaError(f"no column named {name!r} (have: {', '.join(self.names)})")

    def has_column(self, name: str) -> bool:
        key = name.lower()
        return any(c.name.lower() == key for c in self.columns)

    def validate_row(self, row: Sequence[Value], context: str = "") -> None:
        where = f" in {context}" if context else ""
        if len(row) != len(self.columns):
            raise SchemaError(
                f"row has {len(row)} cells, schema has {len(self.columns)} columns{where}"
            )
        for i, (value, col) in enumerate(zip(row, self.columns)):
            if not value_matches(value, col.type):
                raise SchemaError(
                    f"cell {i} ({col.name}): {value!r} is not a valid {type_name(col.type)}{where}"
                )

    def row_width(self) -> int:
        """Estimated bytes per row, used for plan width display."""
        return sum(_TYPE_WIDTH[c.type] for c in self.columns)

    def compatible_with(self, other: "Schema") -> bool:
        """Same column count, types, and case-insensitive names."""
        return (
            len(self.columns) == len(other.columns)
            and self.types == other.types
            and tuple(n.lower() for n in self.names)
            == tuple(n.lower() for n in other.names)
        )

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self) -> Iterator[Column]:
        return iter(self.columns)

    def __str__(self) -> str:
        return ", ".join(f"{c.name} {type_name(c.type)}" for c in self.columns)


@dataclass
class RowGroup:
    """A batch of rows sharing one schema; the unit of transfer everywhere.

    An empty group is legal in memory but never appears inside a row-group
    wire frame; end-of-stream has its own frame type.
    """

    schema: Schema
    rows: list

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def validate(self) -> None:
        for i, row in enumerate(self.rows):
            self.schema.validate_row(row, context=f"row group row {i}")


@dataclass(frozen=True)
class HashColumns:
    """Distribute by hashing the cells at the given column indices."""

    columns: tuple[int, ...]

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("hash distribution needs at least one column")


@dataclass(frozen=True)
class Replicated:
    """Every segment stores a full copy of the table."""


@dataclass(frozen=True)
class SingletonSegment:
    """All rows live on one fixed segment."""

    segment: int


DistributionPolicy = Union[HashColumns, Replicated, SingletonSegment]


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 2**64


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; stable across processes and platforms."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _U64
    return h


def _cell_hash(value: Value) -> int:
    # Integers hash by value so that a single int column distributes as
    # `value mod nseg`; bool piggybacks on that. Floats hash their IEEE-754
    # bit pattern, text its UTF-8 bytes. Null always hashes to 0.
    if value is None:
        return 0
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return fnv1a64(struct.pack("<d", value))
    if isinstance(value, str):
        return fnv1a64(value.encode("utf-8"))
    raise SchemaError(f"unhashable cell value {value!r}")


def hash_segment(row: Sequence[Value], policy: DistributionPolicy, nseg: int) -> int:
    """Owning segment in [0, nseg) for a row under a hash policy.

    Deterministic in the hashed cell values and nseg only; negative integers
    wrap into [0, nseg).
    """
    if nseg < 1:
        raise ValueError("nseg must be positive")
    if not isinstance(policy, HashColumns):
        raise SchemaError(f"hash_segment requires a hash policy, got {policy!r}")
    for idx in policy.columns:
        if idx < 0 or idx >= len(row):
            raise SchemaError(f"hash column index {idx} out of range for row of {len(row)} cells")
    if len(policy.columns) == 1:
        return _cell_hash(row[policy.columns[0]]) % nseg
    h = 0
    for idx in policy.columns:
        h = (h * _FNV_PRIME + _cell_hash(row[idx])) % _U64
    return h % nseg


def _type_label(value: Value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "text"
    return type(value).__name__


def datum_compare(a: Value, b: Value) -> int:
    """Total order within one value type: -1, 0, or 1.

    Null sorts first and compares equal to null. Comparing values of
    different types (other than null) is a type error.
    """
    if a is None and b is None:
        return 0
    if a is None:
        return -1
    if b is None:
        return 1
    la, lb = _type_label(a), _type_label(b)
    if la != lb:
        raise TypeMismatchError(f"cannot compare {la} with {lb}")
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def sort_rows(rows: Iterable[Row], keys: Sequence[tuple[int, bool]]) -> list:
    """Stable multi-key sort; keys are (column index, ascending) pairs.

    Nulls take their place as the smallest value in the column's order, so
    they come first ascending and last descending.
    """
    out = list(rows)
    for idx, ascending in reversed(list(keys)):
        out.sort(key=lambda r: (r[idx] is not None, r[idx]), reverse=not ascending)
    return out
