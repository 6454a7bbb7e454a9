"""Command-line surface.

The CLI hosts the whole cluster in one process per invocation; tables
persist between invocations as CSV files plus a catalog.json inside the
workspace directory (--data). Subcommands: load, query, explain, recv,
selftest. Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .config import Config, load_config
from .csvio import read_csv_file, write_csv
from .database import Database, parse_schema_spec
from .datamodel import ColumnType, Schema
from .errors import (
    BspError,
    ConfigError,
    ExecError,
    ParseError,
    PlanError,
    ProtocolError,
    SchemaError,
    TdxError,
)
from .selftest import dblp_histogram, run_selftest

_TYPE_SPELLING = {
    ColumnType.INT32: "int4",
    ColumnType.INT64: "int8",
    ColumnType.FLOAT64: "float8",
    ColumnType.TEXT: "text",
    ColumnType.BOOL: "bool",
}

_USER_ERRORS = (ParseError, PlanError, SchemaError, ConfigError, ExecError)


class Workspace:
    """Durable table store: one CSV per table plus catalog.json."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.catalog_path = os.path.join(data_dir, "catalog.json")

    def read_catalog(self) -> dict:
        if not os.path.exists(self.catalog_path):
            return {"tables": {}}
        with open(self.catalog_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def write_catalog(self, catalog: dict) -> None:
        os.makedirs(self.data_dir, exist_ok=True)
        with open(self.catalog_path, "w", encoding="utf-8") as fh:
            json.dump(catalog, fh, indent=2)
            fh.write("\n")

    def table_path(self, name: str) -> str:
        return os.path.join(self.data_dir, f"{name.lower()}.csv")

    def open_database(self, config: Config) -> Database:
        db = Database(config=config)
        catalog = self.read_catalog()
        for name, entry in catalog["tables"].items():
            schema = parse_schema_spec(entry["schema"])
            rows = read_csv_file(os.path.join(self.data_dir, entry["file"]), schema)
            db.create_table(name, schema, entry["policy"], rows=rows)
        return db

    def store_table(self, name: str, schema: Schema, policy_spec: str, rows) -> None:
        os.makedirs(self.data_dir, exist_ok=True)
        with open(self.table_path(name), "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, schema, rows)
        catalog = self.read_catalog()
        catalog["tables"][name.lower()] = {
            "schema": _schema_spec_text(schema),
            "policy": policy_spec,
            "file": os.path.basename(self.table_path(name)),
        }
        self.write_catalog(catalog)


def _schema_spec_text(schema: Schema) -> str:
    return ",".join(f"{c.name}:{c.type.name.lower()}" for c in schema)


def _build_config(args) -> Config:
    config = Config()
    if getattr(args, "config", None):
        config = load_config(args.config, config)
    if getattr(args, "nseg", None):
        config = config.with_nseg(args.nseg)
    if getattr(args, "batch_size", None):
        from dataclasses import replace

        config = replace(config, batch_size=args.batch_size)
    return config


def cmd_load(args) -> int:
    config = _build_config(args)
    workspace = Workspace(args.data)
    schema = parse_schema_spec(args.schema)
    db = workspace.open_database(config)
    if db.cluster.has_table(args.table):
        raise SchemaError(f"table {args.table!r} already exists in {args.data}")
    rows = read_csv_file(args.csv, schema)
    table = db.create_table(args.table, schema, args.policy, rows=rows)
    workspace.store_table(args.table, schema, args.policy, table.all_rows())
    total = table.total_rows()
    counts = " ".join(f"seg{i}={c}" for i, c in enumerate(table.segment_counts()))
    print(f"loaded {total} rows into {args.table} ({counts})")
    return 0


def cmd_query(args) -> int:
    config = _build_config(args)
    db = Workspace(args.data).open_database(config)
    sql = args.sql
    if sql.strip().lower().startswith("explain "):
        print(db.explain(sql.strip()[len("explain ") :]))
        return 0
    result = db.query(sql)
    write_csv(sys.stdout, result.schema, result.rows)
    return 0


def cmd_explain(args) -> int:
    config = _build_config(args)
    db = Workspace(args.data).open_database(config)
    print(db.explain(args.sql))
    return 0


def _recv_sql(schema: Schema, port: int, nsenders: int, host: str) -> str:
    cols = ",\n".join(
        f"       transducer_col_{_TYPE_SPELLING[c.type]}({i + 1}) as {c.name}"
        for i, c in enumerate(schema)
    )
    directives = "\n".join(f"# {c.name} {c.type.name.lower()}" for c in schema)
    return f"""select
{cols},
       transducer($$PHIExec builtin transfer_recv port={port} nsenders={nsenders} host={host}
# BEGIN INPUT
# x int32
# END INPUT
# BEGIN OUTPUT
{directives}
# END OUTPUT
$$),
       s.x
from _recv_seed s
"""


def cmd_recv(args) -> int:
    config = _build_config(args)
    workspace = Workspace(args.data)
    db = workspace.open_database(config)
    table = db.cluster.get_table(args.table)
    db.create_table("_recv_seed", "x:int32", "singleton(0)", rows=[(0,)])
    sql = _recv_sql(table.schema, args.port, args.nsenders, args.host)
    result = db.query(sql)
    db.insert(args.table, result.rows)
    catalog_entry = workspace.read_catalog()["tables"][args.table.lower()]
    workspace.store_table(
        args.table, table.schema, catalog_entry["policy"], table.all_rows()
    )
    print(f"received {len(result.rows)} rows into {args.table}")
    return 0


def cmd_selftest(args) -> int:
    config = _build_config(args)
    if args.dblp:
        return dblp_histogram(args.dblp, args.start, config)
    return run_selftest(config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdxdb",
        description="Desk-scale parallel query engine with transducer operators.",
    )
    parser.add_argument("--nseg", type=int, default=None, help="number of segments (default 2)")
    parser.add_argument("--batch-size", type=int, default=None, help="row group size (default 256)")
    parser.add_argument("--config", default=None, help="config file of key=value lines")
    parser.add_argument("--data", default=".tdxdb", help="workspace directory (default .tdxdb)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", help="create a table from a CSV file")
    p.add_argument("table")
    p.add_argument("schema", help='e.g. "id:int32,txt:text"')
    p.add_argument("policy", help='e.g. "hash(id)", "replicated", "singleton(0)"')
    p.add_argument("csv", help="CSV file with a header row")
    p.set_defaults(fn=cmd_load)

    p = sub.add_parser("query", help="run SQL; result rows as CSV on stdout")
    p.add_argument("sql")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("explain", help="print the physical plan for a query")
    p.add_argument("sql")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("recv", help="receive rows from transfer_send into a table")
    p.add_argument("table")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--nsenders", type=int, default=1, help="connections to accept")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_recv)

    p = sub.add_parser("selftest", help="run the built-in check suite")
    p.add_argument("--dblp", default=None, help="edge-list file: print its BFS depth histogram")
    p.add_argument("--start", type=int, default=None, help="BFS start node for --dblp")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage problems are user errors.
        return 0 if exc.code == 0 else 1
    try:
        return args.fn(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, BspError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except TdxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - final CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
