"""File formats: FNS1 field snapshots, CSV reports and run manifests.

FNS1 layout (all little-endian)::

    b"FNS1" | u32 d | u32 n | f64 gamma | f64 time | u8 flags | payload

``flags`` bit 0 is mean_zero and bit 1 is div_free.  The payload holds the d
components one after another, each an n^d array in row-major order with
every axis running through ascending wavenumbers -n/2 .. n/2-1, stored as
interleaved (re, im) f64 pairs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral as sp
from .spectral import SpectralVectorField

__all__ = [
    "SnapshotError",
    "write_field_snapshot",
    "read_field_snapshot",
    "atomic_write_bytes",
    "format_float",
    "write_csv",
    "kernel_table_csv",
    "canonical_digest",
    "RunManifest",
]

MAGIC = b"FNS1"
_HEADER = struct.Struct("<4sIIddB")
_FLAG_MEAN_ZERO = 1
_FLAG_DIV_FREE = 2
_DIV_TOL = 1e-9
_MEAN_TOL = 1e-12


class SnapshotError(ValueError):
    """A snapshot file is malformed or contradicts its own flags."""

    def __init__(self, path, reason: str, expected=None, actual=None):
        detail = reason
        if expected is not None:
            detail += f" (expected {expected}, got {actual})"
        super().__init__(f"{path}: {detail}")
        self.path = str(path)
        self.reason = reason
        self.expected = expected
        self.actual = actual


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _spatial_axes(d: int) -> tuple[int, ...]:
    return tuple(range(1, d + 1))


def write_field_snapshot(u: SpectralVectorField, gamma: float, time: float, path) -> None:
    grid = u.grid
    flags = (_FLAG_MEAN_ZERO if u.mean_zero else 0) | (_FLAG_DIV_FREE if u.div_free else 0)
    header = _HEADER.pack(MAGIC, grid.dimension, grid.points_per_axis, float(gamma), float(time), flags)
    payload = np.fft.fftshift(u.coeffs, axes=_spatial_axes(grid.dimension))
    atomic_write_bytes(path, header + np.ascontiguousarray(payload, dtype="<c16").tobytes())


def read_field_snapshot(path) -> tuple[SpectralVectorField, float, float]:
    """Read an FNS1 file back into a field, with its gamma and time.

    Raises:
        SnapshotError: on a bad magic, short header or payload, unsupported
            grid, or a field that violates the mean_zero / div_free flags.
        FileNotFoundError: if ``path`` does not exist.
    """
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise SnapshotError(path, "not a FNS1 snapshot")
    if len(raw) < _HEADER.size:
        raise SnapshotError(path, "truncated header", f"{_HEADER.size} bytes", f"{len(raw)} bytes")
    _, d, n, gamma, time, flags = _HEADER.unpack_from(raw)
    try:
        grid = sp.make_grid(d, n)
    except ValueError as exc:
        raise SnapshotError(path, f"unsupported grid: {exc}") from None
    expected = _HEADER.size + d * n**d * 16
    if len(raw) != expected:
        raise SnapshotError(path, "payload size mismatch", f"{expected} bytes", f"{len(raw)} bytes")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape((d,) + grid.shape)
    coeffs = np.fft.ifftshift(data, axes=_spatial_axes(d)).astype(complex)
    u = SpectralVectorField(grid, coeffs, bool(flags & _FLAG_MEAN_ZERO), bool(flags & _FLAG_DIV_FREE))
    scale = float(np.abs(coeffs).max()) if coeffs.size else 0.0
    if u.div_free:
        div = sp.divergence_residual(u)
        if div > _DIV_TOL:
            raise SnapshotError(path, "div_free flag set but field has divergence", f"<= {_DIV_TOL}", div)
    if u.mean_zero and scale > 0:
        mean = float(np.abs(coeffs[(slice(None),) + (0,) * d]).max()) / scale
        if mean > _MEAN_TOL:
            raise SnapshotError(path, "mean_zero flag set but mean mode is nonzero", f"<= {_MEAN_TOL}", mean)
    return u, float(gamma), float(time)


def format_float(v) -> str:
    """17 significant digits, so every double round-trips."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows, units: dict | None = None) -> None:
    """Atomically write a CSV whose header cells read ``name [unit]``.

    Columns without a declared unit are marked dimensionless, ``[1]``.
    """
    units = units or {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"{c} [{units.get(c, '1')}]" for c in columns])
    for row in rows:
        writer.writerow([format_float(row.get(c) if isinstance(row, dict) else row[i])
                         for i, c in enumerate(columns)])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def kernel_table_csv(table, path) -> None:
    """Columns x1..xd, value, one row per window sample in row-major order."""
    d = table.dimension
    axes = np.meshgrid(*([table.axis_points()] * d), indexing="ij")
    cols = [f"x{i + 1}" for i in range(d)] + ["value"]
    flat = [a.ravel() for a in axes] + [table.values.ravel()]
    rows = zip(*flat)
    units = {f"x{i + 1}": "length" for i in range(d)}
    units["value"] = f"length^-{d + table.deriv_order + table.frac_order:g}"
    write_csv(path, cols, rows, units)


def _jsonable(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    return obj


def canonical_digest(config: dict) -> str:
    """sha256 of the config serialized with sorted keys and no whitespace."""
    text = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to the outputs of a command."""

    command: str
    config_digest: str
    tool_version: str
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def write(self, path) -> None:
        text = json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(path, text.encode("utf-8"))
