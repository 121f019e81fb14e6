"""
CSV output for trial results, summaries and solver traces.

Floats are written with ``repr`` (shortest round-trip form), booleans as
``true``/``false``, missing values as empty fields; lines end with ``\\n``.
"""

from typing import Iterable, Sequence, TextIO
import csv
import sys

import numpy as np

TRACE_FIELDS = ('iteration', 'residual_H', 'residual_P', 'objective')


def format_value(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(stream: TextIO, fieldnames: Sequence[str], rows: Iterable[dict]) -> None:
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([format_value(row.get(name)) for name in fieldnames])


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[dict], stdout: TextIO = None) -> None:
    """Write rows to ``path``; ``-`` means ``stdout`` (the process standard output by default)."""
    if path in (None, '-'):
        write_rows(stdout or sys.stdout, fieldnames, rows)
        return
    with open(path, 'w', newline='', encoding='ascii') as handle:
        write_rows(handle, fieldnames, rows)


def write_trace(path, trace_rows: Iterable[dict], stdout: TextIO = None) -> None:
    write_csv(path, TRACE_FIELDS, trace_rows, stdout)
