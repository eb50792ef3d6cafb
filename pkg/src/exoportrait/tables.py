"""Headered delimited text tables.

Layout::

    # key=value            (zero or more metadata lines)
    col_a,col_b,...        (header)
    unit_a,unit_b,...      (units row)
    ...data rows...

Sensor streams are written as integer counts with a per-column ``scale``
metadata entry (physical value = count * scale), which keeps multi-megasample
files fast to write and bit-exact to re-read.  Small result tables are
written as shortest round-trip floats or strings.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd


class TableFormatError(ValueError):
    pass


@dataclass
class Table:
    columns: list
    units: list
    frame: pd.DataFrame
    meta: dict = field(default_factory=dict)

    @property
    def data(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=float)

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy()


def _meta_lines(meta: Optional[dict]) -> str:
    if not meta:
        return ""
    out = []
    for k, v in meta.items():
        s = str(v)
        if "\n" in s or "=" in str(k):
            raise TableFormatError(f"metadata entry {k!r} is not single-line")
        out.append(f"# {k}={s}\n")
    return "".join(out)


def write_table(path, columns: Sequence[str], units: Sequence[str], data,
                meta: Optional[dict] = None, scales: Optional[Sequence[float]] = None) -> None:
    """Write a table; ``data`` is an array or a DataFrame with ``columns``.

    With ``scales`` the values are stored as ``round(value / scale)``.
    """
    columns, units = list(columns), list(units)
    if len(columns) != len(units):
        raise TableFormatError("one unit per column required")
    if isinstance(data, pd.DataFrame):
        frame = data[columns].copy()
    else:
        arr = np.asarray(data)
        if arr.ndim != 2 and arr.size:
            raise TableFormatError("data must be two-dimensional")
        frame = pd.DataFrame(arr.reshape(-1, len(columns)), columns=columns)
    meta = dict(meta or {})
    if scales is not None:
        sc = np.asarray(scales, dtype=float)
        counts = np.rint(frame.to_numpy(dtype=float) / sc).astype(np.int64)
        frame = pd.DataFrame(counts, columns=columns)
        meta["scale"] = ",".join(repr(float(s)) for s in sc)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(_meta_lines(meta))
        fh.write(",".join(columns) + "\n")
        fh.write(",".join(units) + "\n")
        frame.to_csv(fh, index=False, header=False, lineterminator="\n")


def read_table(path) -> Table:
    path = Path(path)
    meta = {}
    with open(path, "r") as fh:
        line = fh.readline()
        while line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise TableFormatError(f"{path}: malformed metadata line {line!r}")
            k, v = body.split("=", 1)
            meta[k.strip()] = v
            line = fh.readline()
        header = line.rstrip("\n")
        units_line = fh.readline().rstrip("\n")
        rest = fh.read()
    if not header:
        raise TableFormatError(f"{path}: missing header")
    columns = header.split(",")
    units = units_line.split(",")
    if len(units) != len(columns):
        raise TableFormatError(f"{path}: units row does not match header")
    if rest.strip():
        frame = pd.read_csv(io.StringIO(rest), header=None, names=columns,
                            float_precision="round_trip", keep_default_na=False,
                            na_values=["nan", "NaN"])
    else:
        frame = pd.DataFrame({c: pd.Series(dtype=float) for c in columns})
    if "scale" in meta:
        sc = np.array([float(s) for s in meta["scale"].split(",")])
        if len(sc) != len(columns):
            raise TableFormatError(f"{path}: scale entry does not match header")
        frame = pd.DataFrame(frame.to_numpy(dtype=np.int64) * sc, columns=columns)
    return Table(columns, units, frame, meta)
