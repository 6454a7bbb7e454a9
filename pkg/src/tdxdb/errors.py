"""Exception hierarchy for the engine."""

from __future__ import annotations


class TdxError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(TdxError):
    """Row or schema violates a declared shape (arity, type, name rules)."""


class TypeMismatchError(TdxError):
    """Comparison or operation across incompatible value types."""


class ParseError(TdxError):
    """SQL or directive text could not be parsed."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


class PlanError(TdxError):
    """Query is syntactically valid but cannot be planned."""


class ExecError(TdxError):
    """Query execution aborted; the message names the failing operator."""


class TransducerError(ExecError):
    """A transducer program or its child process failed."""


class NegativeCycleError(ExecError):
    """Shortest-path relaxation kept improving past the node-count bound."""


class TransferError(ExecError):
    """TCP transfer between clusters failed."""


class ProtocolError(TdxError):
    """Malformed wire frame; offset is the absolute byte position."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BspError(TdxError):
    """Misuse or failure of the bulk-synchronous-parallel runtime."""


class ConfigError(TdxError):
    """Invalid configuration file or value."""
