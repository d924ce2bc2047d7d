"""Binary snapshots, the diagnostics CSV stream and experiment manifests.

Snapshot layout (fixed little-endian, no padding):
    magic   4s   b"TCM1"
    version u32  1
    n       u32  grid points per dimension
    length  f64  domain side
    time    f64  snapshot time
    tag     u8   0 = p_eps_eta, 1 = p_eps, 2 = limit
    eps     f64  (0 where not applicable)
    eta     f64  (0 where not applicable)
    alpha   f64  (0 where not applicable)
    payload 6 * n*n f64, row-major, in the order u1, u2, v1, v2, T, q

Write/read round trips are bitwise; the CSV stream is append-only with a
fixed, documented column order.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from tcm.diagnostics import DiagnosticsRecord
from tcm.model import FIELD_NAMES, State, SystemVariant
from tcm.spectral import Grid

MAGIC = b"TCM1"
VERSION = 1
_HEADER = struct.Struct("<4sIIddBddd")
_TAGS = ("p_eps_eta", "p_eps", "limit")

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


class SnapshotError(IOError):
    """Unreadable, truncated or version-mismatched snapshot file."""


def write_snapshot(path, state: State, time: float, variant: SystemVariant) -> None:
    g = state.grid
    header = _HEADER.pack(
        MAGIC, VERSION, g.n, g.length, time,
        _TAGS.index(variant.tag),
        variant.eps if variant.tag != "limit" else 0.0,
        variant.eta if variant.tag == "p_eps_eta" else 0.0,
        variant.alpha if variant.tag == "limit" else 0.0,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for f in state.fields():
            fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[State, dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise SnapshotError(f"snapshot {path} is truncated (no header)")
    magic, version, n, length, time, tag, eps, eta, alpha = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"snapshot {path} has bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(
            f"snapshot {path} has unsupported version {version} (expected {VERSION})"
        )
    if tag >= len(_TAGS):
        raise SnapshotError(f"snapshot {path} has unknown variant tag {tag}")
    want = _HEADER.size + 6 * n * n * 8
    if len(blob) != want:
        raise SnapshotError(
            f"snapshot {path} has payload {len(blob) - _HEADER.size} bytes, "
            f"expected {want - _HEADER.size}"
        )
    grid = Grid(int(n), float(length))
    fields = []
    offset = _HEADER.size
    for _ in range(6):
        arr = np.frombuffer(blob, dtype="<f8", count=n * n, offset=offset)
        fields.append(arr.astype(np.float64).reshape(n, n))
        offset += n * n * 8
    meta = {
        "time": time,
        "variant_tag": _TAGS[tag],
        "eps": eps,
        "eta": eta,
        "alpha": alpha,
    }
    return State(grid, *fields), meta


def snapshot_variant(meta: dict) -> SystemVariant:
    tag = meta["variant_tag"]
    if tag == "p_eps_eta":
        return SystemVariant.p_eps_eta(meta["eps"], meta["eta"])
    if tag == "p_eps":
        return SystemVariant.p_eps(meta["eps"])
    return SystemVariant.limit(meta["alpha"])


# -- diagnostics CSV ----------------------------------------------------------

def _row(rec: DiagnosticsRecord) -> list[str]:
    return [repr(float(getattr(rec, col))) for col in CSV_COLUMNS]


def write_diagnostics_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(_row(rec))


def append_diagnostics_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    """Append rows; writes the header only when the file does not exist."""
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(_row(rec))


def read_diagnostics_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise IOError(
                f"diagnostics CSV {path} has header {header}, expected "
                f"{list(CSV_COLUMNS)}"
            )
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=np.float64).reshape(-1, len(CSV_COLUMNS))
    return {col: data[:, i] for i, col in enumerate(CSV_COLUMNS)}


# -- manifests ----------------------------------------------------------------

def write_manifest(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


@dataclass(frozen=True)
class FieldStats:
    name: str
    minimum: float
    maximum: float
    mean: float
    l2: float


def snapshot_stats(state: State) -> list[FieldStats]:
    g = state.grid
    return [
        FieldStats(name, float(np.min(f)), float(np.max(f)), float(np.mean(f)),
                   g.l2(f))
        for name, f in zip(FIELD_NAMES, state.fields())
    ]
