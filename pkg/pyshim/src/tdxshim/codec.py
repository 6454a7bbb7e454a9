"""Standalone codec for the TDX frame protocol.

Intentionally independent of the engine package: the two codecs must agree
byte for byte, which the shared golden-file suite checks from both sides.

Frame: magic "TDX1" | frame_type u8 | payload_len u32, little-endian.
Types: 1 row group, 2 end-of-stream (empty payload), 3 error (UTF-8 text).
Row-group payload: col_count u16; per column type tag u8 + name_len u16 +
name bytes; row_count u32; cells row-major as null flag u8 (1 = null) then
the value (int32 i / int64 q / float64 d / bool byte / text len u32+bytes).
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterator, Optional

MAGIC = b"TDX1"
FRAME_ROWGROUP = 1
FRAME_END = 2
FRAME_ERROR = 3

TAG_INT32 = 1
TAG_INT64 = 2
TAG_FLOAT64 = 3
TAG_TEXT = 4
TAG_BOOL = 5

TAG_NAMES = {
    TAG_INT32: "int32",
    TAG_INT64: "int64",
    TAG_FLOAT64: "float64",
    TAG_TEXT: "text",
    TAG_BOOL: "bool",
}

NAME_TAGS = {
    "int32": TAG_INT32,
    "int4": TAG_INT32,
    "int64": TAG_INT64,
    "int8": TAG_INT64,
    "float64": TAG_FLOAT64,
    "float8": TAG_FLOAT64,
    "float32": TAG_FLOAT64,
    "float4": TAG_FLOAT64,
    "text": TAG_TEXT,
    "bool": TAG_BOOL,
    "boolean": TAG_BOOL,
}

_HEADER = struct.Struct("<4sBI")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_COLHEAD = struct.Struct("<BH")
_FIXED = {
    TAG_INT32: struct.Struct("<i"),
    TAG_INT64: struct.Struct("<q"),
    TAG_FLOAT64: struct.Struct("<d"),
}


class ProtocolError(Exception):
    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class Frame:
    __slots__ = ("kind", "schema", "rows", "message")

    def __init__(self, kind, schema=None, rows=None, message=""):
        self.kind = kind
        self.schema = schema or []  # list of (name, tag)
        self.rows = rows or []  # list of tuples
        self.message = message


def encode_rowgroup(schema: list, rows: list) -> bytes:
    """Encode one non-empty row group; schema is [(name, tag), ...]."""
    if not rows:
        raise ProtocolError("row-group frames must not be empty")
    payload = bytearray()
    payload += _U16.pack(len(schema))
    for name, tag in schema:
        encoded = name.encode("utf-8")
        payload += _COLHEAD.pack(tag, len(encoded))
        payload += encoded
    payload += _U32.pack(len(rows))
    for row in rows:
        for value, (name, tag) in zip(row, schema):
            if value is None:
                payload += b"\x01"
            elif tag == TAG_TEXT:
                data = value.encode("utf-8")
                payload += b"\x00" + _U32.pack(len(data)) + data
            elif tag == TAG_BOOL:
                payload += b"\x00" + (b"\x01" if value else b"\x00")
            else:
                payload += b"\x00" + _FIXED[tag].pack(value)
    return _HEADER.pack(MAGIC, FRAME_ROWGROUP, len(payload)) + bytes(payload)


def encode_end() -> bytes:
    return _HEADER.pack(MAGIC, FRAME_END, 0)


def encode_error(message: str) -> bytes:
    data = message.encode("utf-8")
    return _HEADER.pack(MAGIC, FRAME_ERROR, len(data)) + data


class FrameReader:
    """Reads frames from a binary stream, tracking absolute byte offsets."""

    def __init__(self, stream: BinaryIO, offset: int = 0):
        self.stream = stream
        self.offset = offset

    def _exact(self, n: int, allow_eof: bool) -> Optional[bytes]:
        chunks = []
        remaining = n
        while remaining:
            chunk = self.stream.read(remaining)
            if not chunk:
                if allow_eof and remaining == n:
                    return None
                raise ProtocolError("unexpected end of stream mid-frame", self.offset)
            chunks.append(chunk)
            remaining -= len(chunk)
            self.offset += len(chunk)
        return b"".join(chunks)

    def read_frame(self, allow_eof: bool = True) -> Optional[Frame]:
        start = self.offset
        header = self._exact(_HEADER.size, allow_eof)
        if header is None:
            return None
        magic, kind, payload_len = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ProtocolError(f"bad frame magic {magic!r}", start)
        payload = self._exact(payload_len, allow_eof=False) if payload_len else b""
        base = start + _HEADER.size
        if kind == FRAME_END:
            if payload:
                raise ProtocolError("end-of-stream frame carries a payload", base)
            return Frame(FRAME_END)
        if kind == FRAME_ERROR:
            try:
                return Frame(FRAME_ERROR, message=payload.decode("utf-8"))
            except UnicodeDecodeError:
                raise ProtocolError("error frame message is not valid UTF-8", base) from None
        if kind == FRAME_ROWGROUP:
            schema, rows = _decode_rowgroup(payload, base)
            return Frame(FRAME_ROWGROUP, schema=schema, rows=rows)
        raise ProtocolError(f"unknown frame type {kind}", start + 4)


def _decode_rowgroup(payload: bytes, base: int):
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(payload):
            raise ProtocolError("truncated row-group payload", base + pos)
        data = payload[pos : pos + n]
        pos += n
        return data

    ncols = _U16.unpack(take(2))[0]
    if ncols == 0:
        raise ProtocolError("row group declares zero columns", base + pos)
    schema = []
    for _ in range(ncols):
        at = base + pos
        tag, name_len = _COLHEAD.unpack(take(3))
        if tag not in TAG_NAMES:
            raise ProtocolError(f"unknown column type tag {tag}", at)
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("column name is not valid UTF-8", at) from None
        schema.append((name, tag))
    nrows = _U32.unpack(take(4))[0]
    if nrows == 0:
        raise ProtocolError("empty row group frame", base + pos)
    rows = []
    for _ in range(nrows):
        cells = []
        for _name, tag in schema:
            flag = take(1)[0]
            if flag == 1:
                cells.append(None)
                continue
            if flag != 0:
                raise ProtocolError(f"bad null flag {flag}", base + pos - 1)
            if tag == TAG_TEXT:
                n = _U32.unpack(take(4))[0]
                at = base + pos
                try:
                    cells.append(take(n).decode("utf-8"))
                except UnicodeDecodeError:
                    raise ProtocolError("text cell is not valid UTF-8", at) from None
            elif tag == TAG_BOOL:
                at = base + pos
                b = take(1)[0]
                if b not in (0, 1):
                    raise ProtocolError(f"bad bool byte {b}", at)
                cells.append(b == 1)
            else:
                st = _FIXED[tag]
                cells.append(st.unpack(take(st.size))[0])
        rows.append(tuple(cells))
    if pos != len(payload):
        raise ProtocolError(
            f"{len(payload) - pos} trailing bytes in row-group payload", base + pos
        )
    return schema, rows


def decode_stream(data: bytes) -> list:
    import io

    reader = FrameReader(io.BytesIO(data))
    frames = []
    while (frame := reader.read_frame(allow_eof=True)) is not None:
        frames.append(frame)
    return frames


def iter_frames(stream: BinaryIO) -> Iterator[Frame]:
    reader = FrameReader(stream)
    while (frame := reader.read_frame(allow_eof=True)) is not None:
        yield frame
