"""Binary frame codec for transducer pipes and cluster-to-cluster TCP.

Frame layout, little-endian throughout:

    magic "TDX1" | frame_type u8 | payload_len u32 | payload

Frame types: 1 = row group, 2 = end-of-stream (empty payload), 3 = error
(payload is a UTF-8 message).

Row-group payload:

    col_count u16
    per column: type tag u8 | name_len u16 | name bytes (UTF-8)
    row_count u32
    rows row-major; per cell: null flag u8 (1 = null, 0 = present),
    then for present cells the fixed-width value (int32 i, int64 q,
    float64 d, bool 1 byte) or len u32 + UTF-8 bytes for text.

The schema header repeats in every row-group frame so a child process can
decode without a handshake. Row-group frames are never empty; end of stream
is always signalled by its own frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

from .datamodel import Column, ColumnType, RowGroup, Schema
from .errors import ProtocolError

MAGIC = b"TDX1"
FRAME_ROWGROUP = 1
FRAME_END = 2
FRAME_ERROR = 3

_HEADER = struct.Struct("<4sBI")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_COLHEAD = struct.Struct("<BH")

_FIXED_CODE = {
    ColumnType.INT32: "i",
    ColumnType.INT64: "q",
    ColumnType.FLOAT64: "d",
    ColumnType.BOOL: "B",
}
_FIXED_STRUCT = {t: struct.Struct("<" + c) for t, c in _FIXED_CODE.items()}


@dataclass
class Frame:
    kind: int
    rowgroup: Optional[RowGroup] = None
    message: str = ""


def _encode_schema(schema: Schema, out: bytearray) -> None:
    out += _U16.pack(len(schema.columns))
    for col in schema.columns:
        name = col.name.encode("utf-8")
        out += _COLHEAD.pack(col.type.value, len(name))
        out += name


def encode_rowgroup(group: RowGroup) -> bytes:
    """Encode one non-empty row group as a complete frame."""
    if group.row_count == 0:
        raise ProtocolError("row-group frames must not be empty; send an end-of-stream frame")
    payload = bytearray()
    _encode_schema(group.schema, payload)
    payload += _U32.pack(group.row_count)
    types = group.schema.types
    if ColumnType.TEXT not in types:
        # Fast path: fixed-width columns pack in one struct call per row
        # unless the row contains a null.
        fmt = struct.Struct("<" + "".join("B" + _FIXED_CODE[t] for t in types))
        pack = fmt.pack
        for row in group.rows:
            if None not in row:
                args = []
                for v in row:
                    args.append(0)
                    args.append(v)
                payload += pack(*args)
            else:
                _encode_row_slow(row, types, payload)
    else:
        for row in group.rows:
            _encode_row_slow(row, types, payload)
    return _HEADER.pack(MAGIC, FRAME_ROWGROUP, len(payload)) + bytes(payload)


def _encode_row_slow(row, types, out: bytearray) -> None:
    for value, ctype in zip(row, types):
        if value is None:
            out += b"\x01"
        elif ctype is ColumnType.TEXT:
            data = value.encode("utf-8")
            out += b"\x00" + _U32.pack(len(data)) + data
        else:
            out += b"\x00" + _FIXED_STRUCT[ctype].pack(value)


def encode_end() -> bytes:
    return _HEADER.pack(MAGIC, FRAME_END, 0)


def encode_error(message: str) -> bytes:
    payload = message.encode("utf-8")
    return _HEADER.pack(MAGIC, FRAME_ERROR, len(payload)) + payload


def encode_frame(frame: Frame) -> bytes:
    if frame.kind == FRAME_ROWGROUP:
        return encode_rowgroup(frame.rowgroup)
    if frame.kind == FRAME_END:
        return encode_end()
    if frame.kind == FRAME_ERROR:
        return encode_error(frame.message)
    raise ProtocolError(f"unknown frame type {frame.kind}")


class _PayloadCursor:
    """Tracks position inside one payload, reporting absolute byte offsets."""

    def __init__(self, data: bytes, base_offset: int):
        self.data = data
        self.pos = 0
        self.base = base_offset

    def offset(self) -> int:
        return self.base + self.pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("truncated row-group payload", offset=self.offset())
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def decode_rowgroup_payload(payload: bytes, base_offset: int = 0) -> RowGroup:
    cur = _PayloadCursor(payload, base_offset)
    ncols = cur.u16()
    if ncols == 0:
        raise ProtocolError("row group declares zero columns", offset=cur.offset())
    cols = []
    for _ in range(ncols):
        at = cur.offset()
        tag = cur.u8()
        try:
            ctype = ColumnType(tag)
        except ValueError:
            raise ProtocolError(f"unknown column type tag {tag}", offset=at) from None
        name_len = cur.u16()
        name_bytes = cur.take(name_len)
        try:
            name = name_bytes.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("column name is not valid UTF-8", offset=at) from None
        cols.append(Column(name, ctype))
    try:
        schema = Schema(tuple(cols))
    except Exception as exc:
        raise ProtocolError(f"invalid schema in frame: {exc}", offset=base_offset) from None
    nrows = cur.u32()
    if nrows == 0:
        raise ProtocolError("empty row group frame", offset=cur.offset())
    types = schema.types
    rows = []
    for _ in range(nrows):
        cells = []
        for ctype in types:
            flag = cur.u8()
            if flag == 1:
                cells.append(None)
                continue
            if flag != 0:
                raise ProtocolError(f"bad null flag {flag}", offset=cur.offset() - 1)
            if ctype is ColumnType.TEXT:
                n = cur.u32()
                at = cur.offset()
                try:
                    cells.append(cur.take(n).decode("utf-8"))
                except UnicodeDecodeError:
                    raise ProtocolError("text cell is not valid UTF-8", offset=at) from None
            elif ctype is ColumnType.BOOL:
                at = cur.offset()
                b = cur.u8()
                if b not in (0, 1):
                    raise ProtocolError(f"bad bool byte {b}", offset=at)
                cells.append(b == 1)
            else:
                st = _FIXED_STRUCT[ctype]
                cells.append(st.unpack(cur.take(st.size))[0])
        rows.append(tuple(cells))
    if cur.pos != len(payload):
        raise ProtocolError(
            f"{len(payload) - cur.pos} trailing bytes in row-group payload", offset=cur.offset()
        )
    return RowGroup(schema, rows)


class FrameReader:
    """Reads frames from a byte stream, tracking absolute offsets."""

    def __init__(self, stream: BinaryIO, offset: int = 0):
        self.stream = stream
        self.offset = offset

    def _read_exact(self, n: int, allow_eof: bool) -> Optional[bytes]:
        chunks = []
        remaining = n
        while remaining:
            chunk = self.stream.read(remaining)
            if not chunk:
                if allow_eof and remaining == n:
                    return None
                raise ProtocolError("unexpected end of stream mid-frame", offset=self.offset)
            chunks.append(chunk)
            remaining -= len(chunk)
            self.offset += len(chunk)
        return b"".join(chunks)

    def read_frame(self, allow_eof: bool = True) -> Optional[Frame]:
        """Next frame, or None at a clean end-of-input boundary."""
        frame_start = self.offset
        header = self._read_exact(_HEADER.size, allow_eof)
        if header is None:
            return None
        magic, kind, payload_len = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ProtocolError(f"bad frame magic {magic!r}", offset=frame_start)
        payload = self._read_exact(payload_len, allow_eof=False) if payload_len else b""
        payload_base = frame_start + _HEADER.size
        if kind == FRAME_ROWGROUP:
            return Frame(FRAME_ROWGROUP, rowgroup=decode_rowgroup_payload(payload, payload_base))
        if kind == FRAME_END:
            if payload:
                raise ProtocolError("end-of-stream frame carries a payload", offset=payload_base)
            return Frame(FRAME_END)
        if kind == FRAME_ERROR:
            try:
                message = payload.decode("utf-8")
            except UnicodeDecodeError:
                raise ProtocolError("error frame message is not valid UTF-8", offset=payload_base) from None
            return Frame(FRAME_ERROR, message=message)
        raise ProtocolError(f"unknown frame type {kind}", offset=frame_start + 4)


def decode_stream(data: bytes) -> list[Frame]:
    """Decode a complete byte string into its frames."""
    import io

    reader = FrameReader(io.BytesIO(data))
    frames = []
    while True:
        frame = reader.read_frame(allow_eof=True)
        if frame is None:
            return frames
        frames.append(frame)


def iter_frames(stream: BinaryIO) -> Iterator[Frame]:
    reader = FrameReader(stream)
    while True:
        frame = reader.read_frame(allow_eof=True)
        if frame is None:
            return
        yield frame
