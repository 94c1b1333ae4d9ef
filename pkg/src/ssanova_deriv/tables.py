"""Flat text tables: ``# key = json`` header lines, a column-name row, CSV rows.

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""
from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import InputError


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return str(value)


def render(header: Mapping[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]],
           footer: Iterable[Sequence[Any]] = ()) -> str:
    buf = io.StringIO()
    for key, val in header.items():
        buf.write(f"# {key} = {json.dumps(val, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    for row in footer:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write(path: str | os.PathLike, header, columns, rows, footer=()) -> None:
    Path(path).write_text(render(header, columns, rows, footer))


def read(path: str | os.PathLike) -> tuple[dict[str, Any], list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    header: dict[str, Any] = {}
    body = []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].partition("=")
            if not sep:
                raise InputError(f"{path}: malformed header line {line!r}")
            try:
                header[key.strip()] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: bad header value for {key.strip()!r}") from exc
        elif line.strip():
            body.append(line)
    if not body:
        raise InputError(f"{path}: missing column header")
    rows = list(csv.reader(body))
    return header, rows[0], rows[1:]
