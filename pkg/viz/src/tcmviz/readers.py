"""Readers for the tcm on-disk formats.

Snapshot layout (little-endian, no padding): magic "TCM1", version u32,
n u32, length f64, time f64, variant tag u8 (0 = p_eps_eta, 1 = p_eps,
2 = limit), eps f64, eta f64, alpha f64, then six n*n f64 row-major
fields in the order u1, u2, v1, v2, T, q.

The diagnostics CSV carries a fixed header; header mismatches are
reported as an explicit column diff.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TCM1"
VERSION = 1
_HEADER = struct.Struct("<4sIIddBddd")
_TAGS = ("p_eps_eta", "p_eps", "limit")

FIELD_NAMES = ("u1", "u2", "v1", "v2", "T", "q")

CSV_COLUMNS = (
    "time", "E",
    "l2_u", "l2_v", "l2_T", "l2_q",
    "grad_u", "grad_v", "grad_T", "grad_q",
    "h1_u", "h1_v", "h1_T", "h1_q",
    "sup_grad_u", "sup_grad_v",
    "sup_T", "dissipation", "precip_total",
    "sat_below", "sat_at", "sat_above",
    "energy_residual",
)


class FormatError(IOError):
    """Unreadable or malformed tcm output file."""


def read_snapshot(path) -> dict:
    """Snapshot -> dict of fields plus grid/time/variant metadata."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read snapshot {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FormatError(f"snapshot {path} is truncated (no header)")
    magic, version, n, length, time, tag, eps, eta, alpha = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"snapshot {path} has bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"snapshot {path} has unsupported version {version}")
    if tag >= len(_TAGS):
        raise FormatError(f"snapshot {path} has unknown variant tag {tag}")
    want = _HEADER.size + 6 * n * n * 8
    if len(blob) != want:
        raise FormatError(
            f"snapshot {path}: expected {want} bytes, found {len(blob)}"
        )
    fields = {}
    offset = _HEADER.size
    for name in FIELD_NAMES:
        fields[name] = np.frombuffer(
            blob, dtype="<f8", count=n * n, offset=offset
        ).reshape(n, n).astype(np.float64)
        offset += n * n * 8
    return {
        "n": int(n),
        "length": float(length),
        "time": float(time),
        "variant": _TAGS[tag],
        "eps": float(eps),
        "eta": float(eta),
        "alpha": float(alpha),
        "fields": fields,
    }


def read_diagnostics_csv(path) -> dict[str, np.ndarray]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"cannot read diagnostics CSV {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            extra = [c for c in header if c not in CSV_COLUMNS]
            raise FormatError(
                f"diagnostics CSV {path} header mismatch: "
                f"missing columns {missing}, unexpected columns {extra}"
            )
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=np.float64).reshape(-1, len(CSV_COLUMNS))
    return {col: data[:, i] for i, col in enumerate(CSV_COLUMNS)}


def read_manifest(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {path} is not valid JSON: {exc}") from exc
