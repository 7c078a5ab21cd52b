"""Bit files, side-information files and record output."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .context_stats import MalformedInputError

__all__ = [
    "InputParseError",
    "parse_bits",
    "read_bits",
    "write_bits",
    "parse_side",
    "read_side",
    "write_side",
    "write_records",
]

_WHITESPACE = np.frombuffer(b" \t\n\r\x0b\x0c", dtype=np.uint8)
_SPLIT = re.compile(r"[,;\s]+")


class InputParseError(MalformedInputError):
    def __init__(self, message: str, offset: int | None = None, line: int | None = None, column: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.offset = offset
        self.line = line
        self.column = column


def parse_bits(data: bytes, name: str = "<input>") -> np.ndarray:
    """Bits from ``'0'``/``'1'`` text; whitespace anywhere is ignored."""
    raw = np.frombuffer(data, dtype=np.uint8)
    space = np.isin(raw, _WHITESPACE)
    bad = ~space & (raw != ord("0")) & (raw != ord("1"))
    if bad.any():
        offset = int(np.argmax(bad))
        line = data.count(b"\n", 0, offset) + 1
        column = offset - (data.rfind(b"\n", 0, offset) + 1) + 1
        raise InputParseError(f"{name}: unexpected byte {data[offset:offset + 1]!r}", offset, line, column)
    bits = (raw[~space] - ord("0")).astype(np.int8)
    if bits.size == 0:
        raise InputParseError(f"{name}: no bits found")
    return bits


def read_bits(path: str | Path) -> np.ndarray:
    return parse_bits(Path(path).read_bytes(), str(path))


def write_bits(path: str | Path, bits: Iterable[int], width: int = 80) -> None:
    text = "".join("1" if b else "0" for b in bits)
    lines = [text[i : i + width] for i in range(0, len(text), width)]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_side(text: str, name: str = "<side>", dimension: int | None = None) -> np.ndarray:
    """One vector per line, columns split by commas, semicolons or whitespace.

    A first line that does not parse as numbers is taken as a header.
    """
    rows: list[list[float]] = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = [t for t in _SPLIT.split(stripped) if t]
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            if not rows and not header_seen:
                header_seen = True
                continue
            raise InputParseError(f"{name}: non-numeric field in {stripped!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise InputParseError(f"{name}: non-finite value", line=lineno)
        if rows and len(values) != len(rows[0]):
            raise InputParseError(f"{name}: expected {len(rows[0])} columns, got {len(values)}", line=lineno)
        rows.append(values)
    if not rows:
        raise InputParseError(f"{name}: no side vectors found")
    out = np.asarray(rows, dtype=float)
    if dimension is not None and out.shape[1] != dimension:
        raise InputParseError(f"{name}: expected dimension {dimension}, got {out.shape[1]}")
    return out


def read_side(path: str | Path, dimension: int | None = None) -> np.ndarray:
    return parse_side(Path(path).read_text(), str(path), dimension)


def write_side(path: str | Path, x: np.ndarray) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    buf = io.StringIO()
    buf.write(",".join(f"x{j}" for j in range(x.shape[1])) + "\n")
    for row in x:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_records(records: list[dict], fmt: str, stream: IO[str]) -> None:
    """CSV with the column order of the first record, or a JSON array of flat records."""
    records = [{k: _plain(v) for k, v in r.items()} for r in records]
    if fmt == "json":
        # strict JSON has no infinities; report them as null
        finite = [{k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in r.items()} for r in records]
        json.dump(finite, stream, allow_nan=False)
        stream.write("\n")
    elif fmt == "csv":
        if not records:
            return
        columns = list(records[0])
        for r in records[1:]:
            columns.extend(k for k in r if k not in columns)
        writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    else:
        raise ValueError(f"unknown format {fmt!r}")
