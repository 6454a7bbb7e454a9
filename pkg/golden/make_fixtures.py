#!/usr/bin/env python3
"""Regenerate the checked-in wire-frame fixtures and their manifest.

Each fixture is a complete frame stream; manifest.json documents the frames
(schema, rows, messages) every decoder must produce, and encoders must
reproduce the files byte for byte. Run from the repository root:

    python golden/make_fixtures.py
"""

from __future__ import annotations

import json
import os

from tdxdb.datamodel import RowGroup, Schema
from tdxdb.wire import encode_end, encode_error, encode_rowgroup

HERE = os.path.dirname(os.path.abspath(__file__))


def rowgroup(schema_pairs, rows):
    return {"type": "rowgroup", "schema": schema_pairs, "rows": rows}


END = {"type": "end"}


def error(message):
    return {"type": "error", "message": message}


FIXTURES = {
    "single_int32.bin": [
        rowgroup([["id", "int32"]], [[1], [2], [3]]),
        END,
    ],
    "all_types.bin": [
        rowgroup(
            [["i", "int32"], ["l", "int64"], ["f", "float64"], ["t", "text"], ["b", "bool"]],
            [
                [7, 9000000000, 2.5, "seven", True],
                [-7, -9000000000, -2.5, "minus", False],
            ],
        ),
        END,
    ],
    "nulls_everywhere.bin": [
        rowgroup(
            [["i", "int32"], ["l", "int64"], ["f", "float64"], ["t", "text"], ["b", "bool"]],
            [
                [None, None, None, None, None],
                [1, None, 3.0, None, True],
                [None, 2, None, "x", None],
            ],
        ),
        END,
    ],
    "unicode_text.bin": [
        rowgroup(
            [["s", "text"]],
            [["héllo"], ["☂ rain"], ["日本語"], ["emoji 💡"], ["quote \" and ' mix"]],
        ),
        END,
    ],
    "int_boundaries.bin": [
        rowgroup(
            [["i32", "int32"], ["i64", "int64"]],
            [
                [2147483647, 9223372036854775807],
                [-2147483648, -9223372036854775808],
                [0, 0],
            ],
        ),
        END,
    ],
    "float_values.bin": [
        rowgroup(
            [["f", "float64"]],
            [[0.0], [-0.0], [1e300], [5e-324], [3.141592653589793], [-1.5]],
        ),
        END,
    ],
    "bool_column.bin": [
        rowgroup([["flag", "bool"]], [[True], [False], [None], [True]]),
        END,
    ],
    "empty_text_vs_null.bin": [
        rowgroup([["t", "text"]], [[""], [None], ["non-empty"]]),
        END,
    ],
    "two_rowgroups.bin": [
        rowgroup([["n", "int64"]], [[1], [2]]),
        rowgroup([["n", "int64"]], [[3], [4], [5]]),
        END,
    ],
    "error_frame.bin": [
        error("transducer failed: ValueError: bad input"),
    ],
    "end_only.bin": [
        END,
    ],
    "wide_schema.bin": [
        rowgroup(
            [
                ["a", "int32"],
                ["b", "int32"],
                ["c", "int64"],
                ["d", "float64"],
                ["e", "float64"],
                ["f", "text"],
                ["g", "text"],
                ["h", "bool"],
            ],
            [
                [1, 2, 3, 4.0, 5.5, "six", "seven", True],
                [None, 20, 30, None, 50.5, None, "seventy", None],
            ],
        ),
        END,
    ],
}


def encode_frame_spec(spec) -> bytes:
    if spec["type"] == "end":
        return encode_end()
    if spec["type"] == "error":
        return encode_error(spec["message"])
    schema = Schema.of(*((name, tname) for name, tname in spec["schema"]))
    rows = [tuple(row) for row in spec["rows"]]
    return encode_rowgroup(RowGroup(schema, rows))


def main() -> None:
    manifest = {}
    for filename, frames in FIXTURES.items():
        data = b"".join(encode_frame_spec(f) for f in frames)
        with open(os.path.join(HERE, filename), "wb") as fh:
            fh.write(data)
        manifest[filename] = frames
        print(f"wrote {filename}: {len(data)} bytes, {len(frames)} frames")
    with open(os.path.join(HERE, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    print(f"wrote manifest.json with {len(manifest)} fixtures")


if __name__ == "__main__":
    main()
