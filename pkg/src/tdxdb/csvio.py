"""CSV ingestion and output (RFC-4180 via the csv module).

The header row carries column names; cell types come from the declared
schema. An empty field reads as NULL and NULL writes back as an empty
field, so empty text strings are not representable in CSV form.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence, TextIO

from .datamodel import ColumnType, Row, Schema, Value
from .errors import SchemaError


def parse_cell(text: str, ctype: ColumnType) -> Value:
    if text == "":
        return None
    if ctype in (ColumnType.INT32, ColumnType.INT64):
        return int(text)
    if ctype is ColumnType.FLOAT64:
        return float(text)
    if ctype is ColumnType.BOOL:
        lowered = text.lower()
        if lowered in ("true", "t", "1", "yes"):
            return True
        if lowered in ("false", "f", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    return text


def format_cell(value: Value) -> str:
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv_rows(stream: TextIO, schema: Schema, source: str = "<csv>") -> list[Row]:
    """Read typed rows, mapping header columns onto the schema by name."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{source}: empty file, expected a header row") from None
    header_keys = [h.strip().lower() for h in header]
    expected = {c.name.lower() for c in schema}
    if set(header_keys) != expected or len(header_keys) != len(schema):
        raise SchemaError(
            f"{source}: header ({', '.join(header)}) does not match schema ({schema})"
        )
    order = [header_keys.index(c.name.lower()) for c in schema]

    rows: list[Row] = []
    for rownum, record in enumerate(reader, start=1):
        if len(record) != len(schema):
            raise SchemaError(
                f"{source}: row {rownum} has {len(record)} fields, expected {len(schema)}"
            )
        cells = []
        for col, src_idx in zip(schema.columns, order):
            text = record[src_idx]
            try:
                cells.append(parse_cell(text, col.type))
            except ValueError:
                raise SchemaError(
                    f"{source}: row {rownum}, column {col.name}: "
                    f"{text!r} is not a valid {col.type.name.lower()}"
                ) from None
        rows.append(tuple(cells))
    return rows


def read_csv_file(path: str, schema: Schema) -> list[Row]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return read_csv_rows(fh, schema, source=path)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None


def write_csv(stream: TextIO, schema: Schema, rows: Iterable[Sequence[Value]]) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(schema.names)
    count = 0
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
        count += 1
    return count


def rows_to_csv_text(schema: Schema, rows: Iterable[Sequence[Value]]) -> str:
    out = io.StringIO()
    write_csv(out, schema, rows)
    return out.getvalue()
