"""Parameter CSV files and atomic output writes."""

from __future__ import annotations

import os
import tempfile
from os import PathLike
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParseError


def atomic_write(path: str | PathLike, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    """Shortest round-trip text for a float (ints pass through)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return repr(float(x))


def format_table(columns: Sequence[str], rows, header: str = "") -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return header + "\n".join(lines) + "\n"


def write_table(path, columns: Sequence[str], rows, header: str = "") -> None:
    atomic_write(path, format_table(columns, rows, header))


def read_table(path: str | PathLike) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DomainError(f"no such file: {path}") from None
    lines = [(n, ln.rstrip("\r")) for n, ln in enumerate(text.split("\n"), 1)]
    lines = [(n, ln) for n, ln in lines if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty table", path=path)
    columns = lines[0][1].split(",")
    rows = []
    for n, ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(parts)}", line=n, path=path)
        rows.append(parts)
    return columns, rows


def read_values(path: str | PathLike, column: str | None = None) -> tuple[list[str], np.ndarray, str]:
    """Read an ``<id>,<value>,...`` CSV. Returns ids, float values and the value column name.

    Without ``column`` the second column is used.
    """
    columns, rows = read_table(path)
    if len(columns) < 2:
        raise ParseError("parameter file needs an id column and a value column", path=path)
    k = 1 if column is None else columns.index(column) if column in columns else -1
    if k < 0:
        raise ParseError(f"no column {column!r} (have {columns})", path=path)
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate ids", path=path)
    try:
        values = np.array([float(r[k]) for r in rows], dtype=np.float64)
    except ValueError as e:
        raise ParseError(f"non-numeric value ({e})", path=path) from None
    return ids, values, columns[k]
