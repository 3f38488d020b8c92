"""Shared reader helper for the delimited-text formats used by this package.

Every file the toolkit writes may carry leading ``#`` comment lines (for
example the run-manifest hash); readers must skip them while still
reporting accurate line numbers for malformed rows.
"""

from __future__ import annotations

import csv
from typing import IO, Iterator

__all__ = ["data_rows"]


def data_rows(handle: IO[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(lineno, row)`` for each data row of a delimited file.

    Blank rows and rows whose first field starts with ``#`` are skipped;
    line numbers refer to the physical file so error messages stay exact.
    """
    reader = csv.reader(handle)
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield lineno, row
