"""
File outputs. Every writer goes through a temp file in the target directory followed
by os.replace, so a reader never sees a half-written file.
"""
import csv
import io
import json
import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from lib.errors import InputFileError

CURVATURE_HEADER = ["t", "x", "y", "z", "phi", "phi_c", "phi_t"]
SECTION_HEADER = ["t", "x", "y", "z", "rho"]
PAIRS_HEADER = ["rho_k", "rho_next", "branch"]


def write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".flowcurv-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def dump_json(data) -> str:
    return json.dumps(data, ensure_ascii=False, indent=4) + "\n"


def write_json(path: str, data):
    write_text(path, dump_json(data))


def format_csv(header: Sequence[str], rows, integer_columns: Iterable[int] = ()) -> str:
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    fmt = ["%.17g"] * len(header)
    for c in integer_columns:
        fmt[c] = "%d"
    buffer = io.StringIO()
    np.savetxt(buffer, rows, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return buffer.getvalue()


def write_csv(path: str, header: Sequence[str], rows, integer_columns: Iterable[int] = ()):
    write_text(path, format_csv(header, rows, integer_columns))


def read_csv(path: str, expected_header: Sequence[str]) -> np.ndarray:
    """Numeric CSV with a header row; extra columns after the expected ones are ignored."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = list(csv.reader(f))
    except OSError as e:
        raise InputFileError(f"cannot read {path}: {e.strerror or e}") from e

    if not lines:
        raise InputFileError(f"{path}: empty file (expected header {','.join(expected_header)})")
    header = [h.strip() for h in lines[0]]
    if header[:len(expected_header)] != list(expected_header):
        raise InputFileError(f"{path}: header {','.join(header)!r} does not start with "
                             f"{','.join(expected_header)!r}")

    width = len(expected_header)
    data = []
    for number, row in enumerate(lines[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < width:
            raise InputFileError(f"{path}: line {number} has {len(row)} field(s), expected {width}")
        try:
            values = [float(cell) for cell in row[:width]]
        except ValueError:
            raise InputFileError(f"{path}: line {number} is not numeric: {','.join(row)}") from None
        if not np.all(np.isfinite(values)):
            raise InputFileError(f"{path}: line {number} has a non-finite value")
        data.append(values)
    return np.array(data, dtype=float).reshape(-1, width)


def write_curvature_csv(path: str, traj, values: dict):
    rows = np.column_stack([traj.t, traj.states, values["phi"], values["phi_c"], values["phi_t"]])
    write_csv(path, CURVATURE_HEADER, rows)


def write_section_csv(path: str, points):
    rows = np.column_stack([points.times, points.states, points.rho]) if len(points) else np.empty((0, 5))
    write_csv(path, SECTION_HEADER, rows)


def read_section_csv(path: str) -> np.ndarray:
    """rho column of a section CSV, in file (time) order."""
    return read_csv(path, SECTION_HEADER)[:, 4]


def write_pairs_csv(path: str, rmap):
    """Consecutive pairs with the branch of rho_k; branch is -1 when the map is unpartitioned."""
    branch = rmap.symbols if rmap.partitioned else -np.ones(len(rmap.pairs), dtype=int)
    rows = np.column_stack([rmap.pairs, branch]) if len(rmap.pairs) else np.empty((0, 3))
    write_csv(path, PAIRS_HEADER, rows, integer_columns=(2,))
