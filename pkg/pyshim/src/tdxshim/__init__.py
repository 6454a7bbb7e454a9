"""Reference external-transducer client.

Invoked by the engine as `python -m tdxshim <script>`: reads row-group
frames from stdin, exposes NextInput()/WriteOutput(record) to the user's
script body, and writes its output frames to stdout. Records are plain
dicts keyed by column name. Script exceptions become an error frame with
the traceback, exit code 1.
"""

from __future__ import annotations

import os
import re
import sys
import traceback
from typing import Optional

from .codec import (
    FRAME_END,
    FRAME_ERROR,
    FRAME_ROWGROUP,
    NAME_TAGS,
    TAG_BOOL,
    TAG_FLOAT64,
    TAG_INT32,
    TAG_INT64,
    TAG_TEXT,
    FrameReader,
    ProtocolError,
    encode_end,
    encode_error,
    encode_rowgroup,
)

__version__ = "0.1.0"

_COMMENT_RE = re.compile(r"^\s*(//|#|--)\s?(.*)$")

_INT32_RANGE = (-(2**31), 2**31 - 1)
_INT64_RANGE = (-(2**63), 2**63 - 1)


class ShimError(Exception):
    pass


def parse_output_schema(body: str) -> list:
    """Columns of the script's BEGIN OUTPUT comment block as (name, tag)."""
    columns = []
    in_block = False
    saw_block = False
    for raw in body.splitlines():
        match = _COMMENT_RE.match(raw)
        if not match:
            continue
        content = match.group(2).strip()
        upper = content.upper()
        if upper == "BEGIN OUTPUT":
            in_block = True
            saw_block = True
            continue
        if upper == "END OUTPUT":
            in_block = False
            continue
        if in_block and content:
            parts = content.split()
            if len(parts) != 2:
                raise ShimError(f"directive line must be 'name type': {content!r}")
            name, type_name = parts
            tag = NAME_TAGS.get(type_name.lower())
            if tag is None:
                raise ShimError(f"unknown column type {type_name!r}")
            columns.append((name, tag))
    if not saw_block:
        raise ShimError("script body has no BEGIN OUTPUT directive block")
    if not columns:
        raise ShimError("OUTPUT directive block declares no columns")
    return columns


def strip_exec_header(body: str) -> str:
    """Drop the PHIExec header line; everything after it is the script."""
    lines = body.splitlines(keepends=True)
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        if line.strip().lower().startswith("phiexec"):
            return "".join(lines[i + 1 :])
        break
    return body


def _check_cell(name: str, tag: int, value):
    if value is None:
        return
    if tag == TAG_BOOL:
        if not isinstance(value, bool):
            raise ShimError(f"column {name!r} expects a bool, got {value!r}")
    elif tag in (TAG_INT32, TAG_INT64):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ShimError(f"column {name!r} expects an int, got {value!r}")
        low, high = _INT32_RANGE if tag == TAG_INT32 else _INT64_RANGE
        if not low <= value <= high:
            raise ShimError(f"column {name!r}: {value} out of range")
    elif tag == TAG_FLOAT64:
        if not isinstance(value, float):
            raise ShimError(f"column {name!r} expects a float, got {value!r}")
    elif tag == TAG_TEXT:
        if not isinstance(value, str):
            raise ShimError(f"column {name!r} expects a string, got {value!r}")


class ShimSession:
    """Pipe endpoints plus the NextInput/WriteOutput surface for one run."""

    def __init__(self, stdin, stdout, out_schema: list, batch_size: int):
        self.reader = FrameReader(stdin)
        self.stdout = stdout
        self.out_schema = out_schema
        self.batch_size = max(1, batch_size)
        self._current: list = []
        self._current_schema: Optional[list] = None
        self._pos = 0
        self._input_done = False
        self._pending: list = []

    def next_input(self) -> Optional[dict]:
        """Next input record as a name->value dict, or None at end of input."""
        while self._pos >= len(self._current):
            if self._input_done:
                return None
            frame = self.reader.read_frame(allow_eof=False)
            if frame.kind == FRAME_END:
                self._input_done = True
                return None
            if frame.kind == FRAME_ERROR:
                raise ShimError(f"host sent an error frame: {frame.message}")
            self._current = frame.rows
            self._current_schema = frame.schema
            self._pos = 0
        row = self._current[self._pos]
        self._pos += 1
        return {name: value for (name, _tag), value in zip(self._current_schema, row)}

    def write_output(self, record) -> None:
        """Queue one output record (a mapping of column name to value)."""
        if record is None:
            # mirrors the WriteOutput(nil) end-of-output idiom; the end
            # frame itself is written when the script finishes
            return
        row = []
        for name, tag in self.out_schema:
            if name not in record:
                raise ShimError(f"output record is missing column {name!r}")
            value = record[name]
            _check_cell(name, tag, value)
            row.append(value)
        extra = set(record) - {name for name, _ in self.out_schema}
        if extra:
            raise ShimError(f"output record has unknown columns: {sorted(extra)}")
        self._pending.append(tuple(row))
        if len(self._pending) >= self.batch_size:
            self.flush()

    def flush(self) -> None:
        if self._pending:
            self.stdout.write(encode_rowgroup(self.out_schema, self._pending))
            self.stdout.flush()
            self._pending = []

    def finish(self) -> None:
        self.flush()
        self.stdout.write(encode_end())
        self.stdout.flush()


def run_script(body: str, session: ShimSession, environment: Optional[dict] = None) -> None:
    """Execute the script body with the shim surface in scope.

    Top-level code runs immediately; if the script defines main(), it is
    called afterwards.
    """
    namespace = {
        "NextInput": session.next_input,
        "WriteOutput": session.write_output,
        "TDX_SEGMENT_ID": int((environment or os.environ).get("TDX_SEGMENT_ID", "0")),
        "TDX_NSEG": int((environment or os.environ).get("TDX_NSEG", "1")),
        "__name__": "__tdx_transducer__",
    }
    code = compile(strip_exec_header(body), "<transducer>", "exec")
    exec(code, namespace)  # noqa: S102 - executing the user's script is the point
    main = namespace.get("main")
    if callable(main):
        main()


def shim_main(argv: Optional[list] = None) -> int:
    argv = argv if argv is not None else sys.argv
    if len(argv) < 2:
        sys.stderr.write("usage: python -m tdxshim <script-file>\n")
        return 2
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    try:
        with open(argv[1], "r", encoding="utf-8") as fh:
            body = fh.read()
        out_schema = parse_output_schema(body)
        batch_size = int(os.environ.get("TDX_BATCH_SIZE", "256"))
        session = ShimSession(stdin, stdout, out_schema, batch_size)
    except (OSError, ShimError, ValueError) as exc:
        stdout.write(encode_error(f"shim setup failed: {exc}"))
        stdout.flush()
        return 1
    try:
        run_script(body, session)
        session.finish()
        return 0
    except ProtocolError as exc:
        sys.stderr.write(f"protocol error on stdin: {exc}\n")
        return 1
    except BaseException:  # noqa: BLE001 - everything becomes an error frame
        stdout.write(encode_error(traceback.format_exc()))
        stdout.flush()
        return 1
