"""High-level facade: a cluster plus catalog, schema/policy spec parsing,
and one-call SQL execution. The CLI and the example scripts both sit on
top of this."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .config import Config
from .csvio import read_csv_file
from .datamodel import (
    DistributionPolicy,
    HashColumns,
    Replicated,
    Row,
    Schema,
    SingletonSegment,
    Value,
)
from .engine import Cluster, execute
from .errors import SchemaError
from .plan import PlanNode, explain as explain_plan
from .planner import plan_sql
from . import programs as _programs  # noqa: F401 - registers the builtin transducers


def parse_schema_spec(spec: Union[str, Schema]) -> Schema:
    """Parse 'name:type,name:type' into a schema (or pass one through)."""
    if isinstance(spec, Schema):
        return spec
    pairs = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise SchemaError(f"schema spec column {part!r} must look like name:type")
        name, type_name = (p.strip() for p in part.split(":", 1))
        pairs.append((name, type_name))
    if not pairs:
        raise SchemaError(f"schema spec {spec!r} declares no columns")
    return Schema.of(*pairs)


_POLICY_RE = re.compile(r"^(hash|singleton)\s*\(\s*([^)]*)\s*\)$|^replicated$", re.IGNORECASE)


def parse_policy_spec(spec: Union[str, DistributionPolicy], schema: Schema) -> DistributionPolicy:
    """Parse 'hash(col[,col])', 'replicated', or 'singleton(seg)'."""
    if not isinstance(spec, str):
        return spec
    m = _POLICY_RE.match(spec.strip())
    if not m:
        raise SchemaError(f"bad distribution policy {spec!r}")
    if m.group(1) is None:
        return Replicated()
    kind = m.group(1).lower()
    arg = m.group(2).strip()
    if kind == "singleton":
        try:
            return SingletonSegment(int(arg))
        except ValueError:
            raise SchemaError(f"singleton policy needs a segment number, got {arg!r}") from None
    columns = tuple(schema.index_of(c.strip()) for c in arg.split(",") if c.strip())
    if not columns:
        raise SchemaError("hash policy names no columns")
    return HashColumns(columns)


@dataclass
class QueryResult:
    schema: Schema
    rows: list

    def column(self, name: str) -> list:
        idx = self.schema.index_of(name)
        return [row[idx] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


class Database:
    """An in-process cluster with a friendly surface.

    >>> db = Database(nseg=2)
    >>> db.create_table("t", "id:int32,txt:text", "hash(id)",
    ...                 rows=[(1, "a"), (2, "b")])
    >>> db.query("select id from t where id % 2 = 1").rows
    [(1,)]
    """

    def __init__(self, nseg: Optional[int] = None, config: Optional[Config] = None):
        if config is None:
            config = Config(nseg=nseg if nseg is not None else 2)
        elif nseg is not None:
            config = config.with_nseg(nseg)
        self.config = config
        self.cluster = Cluster(config.nseg)

    @property
    def nseg(self) -> int:
        return self.cluster.nseg

    def create_table(
        self,
        name: str,
        schema: Union[str, Schema],
        policy: Union[str, DistributionPolicy],
        rows: Iterable[Sequence[Value]] = (),
    ):
        schema = parse_schema_spec(schema)
        return self.cluster.load_table(name, schema, parse_policy_spec(policy, schema), rows)

    def load_csv(
        self,
        name: str,
        path: str,
        schema: Union[str, Schema],
        policy: Union[str, DistributionPolicy],
    ):
        schema = parse_schema_spec(schema)
        rows = read_csv_file(path, schema)
        return self.cluster.load_table(name, schema, parse_policy_spec(policy, schema), rows)

    def insert(self, name: str, rows: Iterable[Sequence[Value]]) -> int:
        return self.cluster.insert_rows(name, rows)

    def plan(self, sql: str) -> PlanNode:
        return plan_sql(sql, self.cluster)

    def query(self, sql: str) -> QueryResult:
        plan = self.plan(sql)
        rows = list(execute(plan, self.cluster, self.config))
        return QueryResult(plan.schema, rows)

    def execute_plan(self, plan: PlanNode) -> QueryResult:
        rows = list(execute(plan, self.cluster, self.config))
        return QueryResult(plan.schema, rows)

    def explain(self, sql: str) -> str:
        return explain_plan(self.plan(sql), self.nseg)
