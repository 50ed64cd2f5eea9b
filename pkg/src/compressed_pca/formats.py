"""Text formatting and parsing helpers for CSV outputs and inputs."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

NA = "NA"


def fmt(value) -> str:
    """Shortest round-trip text for a float; ``NA`` for NaN."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return NA
    return repr(value)


def write_rows(handle, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    for line in comments:
        handle.write(f"# {line}\n")
    handle.write(",".join(header) + "\n")
    for row in rows:
        handle.write(",".join(fmt(v) for v in row) + "\n")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_matrix(path: str | Path, expected_cols: int | Sequence[int] | None = None) -> np.ndarray:
    """Read a numeric CSV with an optional single header row.

    The header is detected by a non-numeric first token.  Rows whose column
    count is not in ``expected_cols`` raise :class:`DataError` naming the
    0-based data row.
    """
    if isinstance(expected_cols, int):
        expected_cols = (expected_cols,)
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        first = True
        for line in reader:
            if not line or (len(line) == 1 and not line[0].strip()):
                continue
            if line[0].lstrip().startswith("#"):
                continue
            if first:
                first = False
                if not _is_number(line[0].strip()):
                    continue
            index = len(rows)
            if expected_cols is not None and len(line) not in expected_cols:
                want = " or ".join(str(e) for e in expected_cols)
                raise DataError(
                    f"row {index}: expected {want} columns, found {len(line)}",
                    code="COLUMN_MISMATCH",
                )
            if width is None:
                width = len(line)
            elif len(line) != width:
                raise DataError(
                    f"row {index}: expected {width} columns, found {len(line)}",
                    code="COLUMN_MISMATCH",
                )
            try:
                rows.append([float(tok) for tok in line])
            except ValueError as exc:
                raise DataError(f"row {index}: non-numeric value ({exc})", code="BAD_NUMBER") from exc
    if not rows:
        return np.empty((0, width or (expected_cols[0] if expected_cols else 0)))
    return np.array(rows, dtype=float)
