"""Transducer runtime: per-segment operator instances.

A transducer program consumes its segment's input rows through
``next_input`` and emits rows through ``write_output``; it may emit before
reading anything, keep arbitrary state, and emit after input is exhausted.
Builtin programs run in-process; external programs run as a subprocess
speaking the wire frame protocol on stdin/stdout.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .bsp import BspContext, BspCoordinator
from .config import Config
from .datamodel import ColumnType, Row, RowGroup, Schema
from .errors import ProtocolError, TdxError, TransducerError
from .wire import (
    FRAME_END,
    FRAME_ERROR,
    FRAME_ROWGROUP,
    FrameReader,
    encode_end,
    encode_rowgroup,
)


@dataclass(frozen=True)
class BuiltinMode:
    """Run a registered in-process program."""

    name: str
    params: tuple = ()

    def param_map(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ExternalMode:
    """Run the script body under the configured command for a language tag."""

    language: str


@dataclass(frozen=True)
class TransducerSpec:
    in_schema: Schema
    out_schema: Schema
    mode: BuiltinMode | ExternalMode
    body: str


def batch_rows(schema: Schema, rows: Iterable[Row], batch_size: int) -> Iterator[RowGroup]:
    """Chunk a row stream into row groups of at most batch_size rows."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batch: list = []
    for row in rows:
        batch.append(row)
        if len(batch) == batch_size:
            yield RowGroup(schema, batch)
            batch = []
    if batch:
        yield RowGroup(schema, batch)


class ProgramContext:
    """Callbacks and identity handed to a builtin transducer program."""

    def __init__(
        self,
        *,
        segment_id: int,
        nseg: int,
        in_schema: Schema,
        out_schema: Schema,
        params: Mapping[str, str],
        input_iter: Iterator[Row],
        sink: Callable[[Row], None],
        config: Config,
        bsp_coordinator: Optional[BspCoordinator] = None,
        input_order: Optional[tuple] = None,
    ):
        self.segment_id = segment_id
        self.nseg = nseg
        self.in_schema = in_schema
        self.out_schema = out_schema
        self.params = dict(params)
        self.config = config
        self.input_order = input_order
        self._input = input_iter
        self._sink = sink
        self._bsp_coordinator = bsp_coordinator
        self._bsp: Optional[BspContext] = None

    def next_input(self) -> Optional[Row]:
        """Next input row for this instance, or None at end of input."""
        return next(self._input, None)

    def write_output(self, row: Sequence) -> None:
        row = tuple(row)
        self.out_schema.validate_row(row, context="transducer output")
        self._sink(row)

    def bsp_init(self, n: int) -> BspContext:
        """Join the BSP group of this plan node's instances; once per instance."""
        if self._bsp_coordinator is None:
            raise TransducerError("BSP is not available to this transducer")
        self._bsp = self._bsp_coordinator.init_context(self.segment_id, n)
        return self._bsp

    def param(self, name: str, default: Optional[str] = None) -> str:
        value = self.params.get(name, default)
        if value is None:
            raise TransducerError(f"transducer parameter {name!r} is required")
        return value

    def int_param(self, name: str, default: Optional[int] = None) -> int:
        raw = self.params.get(name)
        if raw is None:
            if default is None:
                raise TransducerError(f"transducer parameter {name!r} is required")
            return default
        try:
            return int(raw)
        except ValueError:
            raise TransducerError(f"parameter {name!r} must be an integer, got {raw!r}") from None

    def bool_param(self, name: str, default: bool = False) -> bool:
        raw = self.params.get(name)
        if raw is None:
            return default
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise TransducerError(f"parameter {name!r} must be a boolean, got {raw!r}")


ProgramFn = Callable[[ProgramContext], None]


@dataclass
class BuiltinDef:
    name: str
    fn: ProgramFn
    in_types: Optional[tuple[ColumnType, ...]] = None
    out_types: Optional[tuple[ColumnType, ...]] = None


_REGISTRY: dict[str, BuiltinDef] = {}


def register_builtin(
    name: str,
    fn: ProgramFn,
    *,
    in_types: Optional[Sequence[ColumnType]] = None,
    out_types: Optional[Sequence[ColumnType]] = None,
    replace: bool = False,
) -> None:
    """Register an in-process transducer program under a builtin name."""
    if name in _REGISTRY and not replace:
        raise TransducerError(f"builtin transducer {name!r} already registered")
    _REGISTRY[name] = BuiltinDef(
        name,
        fn,
        tuple(in_types) if in_types is not None else None,
        tuple(out_types) if out_types is not None else None,
    )


def lookup_builtin(name: str) -> BuiltinDef:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise TransducerError(f"unknown builtin transducer {name!r}") from None


def check_builtin_schemas(definition: BuiltinDef, spec: TransducerSpec) -> None:
    if definition.in_types is not None and spec.in_schema.types != definition.in_types:
        raise TransducerError(
            f"builtin {definition.name!r} expects input types "
            f"({', '.join(t.name.lower() for t in definition.in_types)}), "
            f"script declares ({spec.in_schema})"
        )
    if definition.out_types is not None and spec.out_schema.types != definition.out_types:
        raise TransducerError(
            f"builtin {definition.name!r} expects output types "
            f"({', '.join(t.name.lower() for t in definition.out_types)}), "
            f"script declares ({spec.out_schema})"
        )


def run_builtin_instance(
    spec: TransducerSpec,
    *,
    segment_id: int,
    nseg: int,
    input_iter: Iterator[Row],
    config: Config,
    bsp_coordinator: Optional[BspCoordinator] = None,
    input_order: Optional[tuple] = None,
) -> Iterator[Row]:
    """Drive a builtin program on one segment and yield its output rows.

    The program runs to completion with its outputs buffered; end of stream
    is implied by this iterator finishing. Buffering means a program never
    blocks on downstream backpressure, so BSP barriers cannot deadlock
    against slow consumers.
    """
    assert isinstance(spec.mode, BuiltinMode)
    definition = lookup_builtin(spec.mode.name)
    check_builtin_schemas(definition, spec)
    outputs: list[Row] = []
    ctx = ProgramContext(
        segment_id=segment_id,
        nseg=nseg,
        in_schema=spec.in_schema,
        out_schema=spec.out_schema,
        params=spec.mode.param_map(),
        input_iter=input_iter,
        sink=outputs.append,
        config=config,
        bsp_coordinator=bsp_coordinator,
        input_order=input_order,
    )
    try:
        definition.fn(ctx)
    except TdxError:
        # Deliberate errors (contract violations, negative cycles, BSP
        # misuse) already carry their context.
        raise
    except Exception as exc:
        raise TransducerError(
            f"builtin transducer {definition.name!r} failed on segment {segment_id}: {exc}"
        ) from exc
    return iter(outputs)


def _substitute_command(template: Sequence[str], script_path: str) -> list[str]:
    argv = [arg.replace("{script}", script_path) for arg in template]
    if not any("{script}" in arg for arg in template):
        argv.append(script_path)
    return argv


def run_external_instance(
    spec: TransducerSpec,
    *,
    segment_id: int,
    nseg: int,
    input_iter: Iterator[Row],
    config: Config,
    abort_event: Optional[threading.Event] = None,
) -> Iterator[Row]:
    """Host one external transducer child process for one segment.

    Input row groups are framed onto the child's stdin on a dedicated
    writer thread while this generator reads output frames from its stdout,
    so neither pipe can deadlock. The child must emit an end-of-stream
    frame, write nothing after it, and exit 0.
    """
    assert isinstance(spec.mode, ExternalMode)
    command = config.command_for(spec.mode.language)

    script = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", suffix=".tdx", prefix="transducer_", delete=False
    )
    try:
        script.write(spec.body)
    finally:
        script.close()
    argv = _substitute_command(command, script.name)

    env = dict(os.environ)
    env["TDX_SEGMENT_ID"] = str(segment_id)
    env["TDX_NSEG"] = str(nseg)
    env["TDX_BATCH_SIZE"] = str(config.batch_size)

    try:
        proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
        )
    except OSError as exc:
        os.unlink(script.name)
        raise TransducerError(f"cannot start external transducer {argv!r}: {exc}") from exc

    stderr_chunks: list[bytes] = []

    def drain_stderr() -> None:
        while True:
            chunk = proc.stderr.read(65536)
            if not chunk:
                return
            stderr_chunks.append(chunk)

    writer_error: list[BaseException] = []

    def feed_stdin() -> None:
        try:
            for group in batch_rows(spec.in_schema, input_iter, config.batch_size):
                if abort_event is not None and abort_event.is_set():
                    break
                proc.stdin.write(encode_rowgroup(group))
            proc.stdin.write(encode_end())
            proc.stdin.flush()
        except BrokenPipeError:
            # The child closed stdin early; whether that is an error is
            # decided by its frames and exit code.
            pass
        except BaseException as exc:  # noqa: BLE001 - reported on the main path
            writer_error.append(exc)
        finally:
            try:
                proc.stdin.close()
            except OSError:
                pass

    stderr_thread = threading.Thread(target=drain_stderr, name=f"tdx-stderr-{segment_id}", daemon=True)
    writer_thread = threading.Thread(target=feed_stdin, name=f"tdx-stdin-{segment_id}", daemon=True)

    def watchdog() -> None:
        if abort_event is None:
            return
        while proc.poll() is None:
            if abort_event.wait(timeout=0.1):
                proc.kill()
                return

    watchdog_thread = threading.Thread(target=watchdog, name=f"tdx-watch-{segment_id}", daemon=True)

    def stderr_text() -> str:
        return b"".join(stderr_chunks).decode("utf-8", errors="replace").strip()

    def rows() -> Iterator[Row]:
        stderr_thread.start()
        writer_thread.start()
        watchdog_thread.start()
        reader = FrameReader(proc.stdout)
        try:
            while True:
                frame = reader.read_frame(allow_eof=True)
                if frame is None:
                    proc.wait()
                    stderr_thread.join()
                    raise TransducerError(
                        f"external transducer on segment {segment_id} exited "
                        f"(status {proc.returncode}) before end-of-stream; stderr: {stderr_text()}"
                    )
                if frame.kind == FRAME_ERROR:
                    raise TransducerError(
                        f"external transducer on segment {segment_id} reported: {frame.message}"
                    )
                if frame.kind == FRAME_END:
                    break
                group = frame.rowgroup
                if not group.schema.compatible_with(spec.out_schema):
                    raise ProtocolError(
                        f"output frame schema ({group.schema}) does not match "
                        f"declared output ({spec.out_schema})"
                    )
                for row in group.rows:
                    yield row
            trailing = proc.stdout.read(1)
            if trailing:
                raise ProtocolError(
                    "external transducer wrote data after its end-of-stream frame",
                    offset=reader.offset,
                )
            proc.wait()
            writer_thread.join()
            stderr_thread.join()
            if writer_error:
                raise writer_error[0]
            if proc.returncode != 0:
                raise TransducerError(
                    f"external transducer on segment {segment_id} exited with "
                    f"status {proc.returncode}; stderr: {stderr_text()}"
                )
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()
            try:
                proc.stdout.close()
            except OSError:
                pass
            try:
                os.unlink(script.name)
            except OSError:
                pass

    return rows()
