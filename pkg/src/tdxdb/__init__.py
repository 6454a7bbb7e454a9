"""tdxdb: a desk-scale shared-nothing parallel query engine whose plans can
host transducers, stateful user-programmable operators running in parallel
across segments, in-process or as subprocesses over a framed pipe protocol,
with an embedded BSP runtime for iterative graph algorithms."""

from .config import Config, load_config, parse_config_text
from .database import Database, QueryResult, parse_policy_spec, parse_schema_spec
from .datamodel import (
    Column,
    ColumnType,
    DistributionPolicy,
    HashColumns,
    Replicated,
    Row,
    RowGroup,
    Schema,
    SingletonSegment,
    Value,
    datum_compare,
    hash_segment,
)
from .engine import Cluster, Table, execute, execute_all
from .errors import (
    BspError,
    ConfigError,
    ExecError,
    NegativeCycleError,
    ParseError,
    PlanError,
    ProtocolError,
    SchemaError,
    TdxError,
    TransducerError,
    TransferError,
    TypeMismatchError,
)
from .plan import (
    FilterNode,
    GatherMotion,
    PlanNode,
    ProjectNode,
    RedistributeMotion,
    SeqScan,
    SortKey,
    SortNode,
    TransducerNode,
    WindowRowNumberNode,
    explain,
    validate_plan,
)
from .planner import compile_transducer_spec, plan_query, plan_sql
from .sqlfront import extract_io_schemas, parse, to_sql
from .transducer import (
    BuiltinMode,
    ExternalMode,
    ProgramContext,
    TransducerSpec,
    batch_rows,
    register_builtin,
)
from . import programs  # noqa: F401 - registers the builtin transducer programs

__version__ = "0.1.0"

__all__ = [
    "BspError",
    "BuiltinMode",
    "Cluster",
    "Column",
    "ColumnType",
    "Config",
    "ConfigError",
    "Database",
    "DistributionPolicy",
    "ExecError",
    "ExternalMode",
    "FilterNode",
    "GatherMotion",
    "HashColumns",
    "NegativeCycleError",
    "ParseError",
    "PlanError",
    "PlanNode",
    "ProgramContext",
    "ProjectNode",
    "ProtocolError",
    "QueryResult",
    "RedistributeMotion",
    "Replicated",
    "Row",
    "RowGroup",
    "Schema",
    "SchemaError",
    "SeqScan",
    "SingletonSegment",
    "SortKey",
    "SortNode",
    "Table",
    "TdxError",
    "TransducerError",
    "TransducerNode",
    "TransducerSpec",
    "TransferError",
    "TypeMismatchError",
    "Value",
    "WindowRowNumberNode",
    "batch_rows",
    "compile_transducer_spec",
    "datum_compare",
    "execute",
    "execute_all",
    "explain",
    "extract_io_schemas",
    "hash_segment",
    "load_config",
    "parse",
    "parse_config_text",
    "parse_policy_spec",
    "parse_schema_spec",
    "plan_query",
    "plan_sql",
    "register_builtin",
    "to_sql",
    "validate_plan",
]
