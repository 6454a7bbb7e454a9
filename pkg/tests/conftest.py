"""Shared fixtures: schema/row generation strategies and a probe builtin
that records which segment saw which row."""

from __future__ import annotations

import threading

import pytest
from hypothesis import strategies as st

from tdxdb import ColumnType, Schema, register_builtin
from tdxdb.datamodel import INT32_MAX, INT32_MIN, INT64_MAX, INT64_MIN

# --- hypothesis strategies ------------------------------------------------

scalar_by_type = {
    ColumnType.INT32: st.integers(min_value=INT32_MIN, max_value=INT32_MAX),
    ColumnType.INT64: st.integers(min_value=INT64_MIN, max_value=INT64_MAX),
    ColumnType.FLOAT64: st.floats(allow_nan=False, width=64),
    ColumnType.TEXT: st.text(max_size=12),
    ColumnType.BOOL: st.booleans(),
}


def value_strategy(ctype: ColumnType, nullable: bool = True):
    base = scalar_by_type[ctype]
    if nullable:
        return st.one_of(st.none(), base)
    return base


@st.composite
def schemas(draw, max_cols: int = 5):
    ncols = draw(st.integers(min_value=1, max_value=max_cols))
    types = [draw(st.sampled_from(list(ColumnType))) for _ in range(ncols)]
    return Schema.of(*((f"c{i}", t) for i, t in enumerate(types)))


@st.composite
def schema_and_rows(draw, max_rows: int = 30):
    schema = draw(schemas())
    nrows = draw(st.integers(min_value=0, max_value=max_rows))
    rows = [
        tuple(draw(value_strategy(col.type)) for col in schema.columns)
        for _ in range(nrows)
    ]
    return schema, rows


# --- probe builtin ---------------------------------------------------------

_PROBE_LOCK = threading.Lock()
PROBE_RECORDS: dict = {}


def _probe(ctx):
    """Pass rows through, recording (segment_id, row) under the sink param."""
    sink = ctx.param("sink")
    with _PROBE_LOCK:
        records = PROBE_RECORDS.setdefault(sink, [])
    while (row := ctx.next_input()) is not None:
        with _PROBE_LOCK:
            records.append((ctx.segment_id, row))
        ctx.write_output(row)


register_builtin("probe", _probe)


@pytest.fixture
def probe_records():
    PROBE_RECORDS.clear()
    yield PROBE_RECORDS
    PROBE_RECORDS.clear()
