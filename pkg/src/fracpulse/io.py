"""CSV and JSON writers shared by the exporters and the command line."""

from __future__ import annotations

import csv
import io
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__


@contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    elif isinstance(path, io.TextIOBase):
        yield path
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    """Write a CSV table preceded by ``#`` comment lines naming the version and metadata.

    ``path`` may be a filename, an open text stream, or ``None``/``"-"`` for stdout.
    """
    with _open_out(path) as fh:
        fh.write(f"# fracpulse {__version__}\n")
        for key, val in (meta or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path):
    """Read a table written by :func:`write_csv`; returns ``(meta, columns, rows)``."""
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return meta, columns, [row for row in reader]


def write_json(path, payload: dict) -> None:
    payload = {"version": __version__, **payload}
    with _open_out(path) as fh:
        json.dump(payload, fh, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
