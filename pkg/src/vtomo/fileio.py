"""Binary container for fields and sinograms.

Layout: 8 magic bytes ``VTOMO01\\n``, a little-endian u32 header length, a
UTF-8 JSON header, then the payload as little-endian float64 in row-major,
component-major order.  Sinogram files may append one u8 mask byte per bin.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, ConfigError, FieldIOError, HeaderError, KindMismatchError, NaNPayloadError, PayloadLengthError
from .fields import CovectorField, Grid, MatrixField, ScalarField
from .geometry import LineGrid
from .projector import Sinogram

MAGIC = b"VTOMO01\n"
DTYPE = "<f8"
ORDER = "row-major,component-major"
COMPONENTS = {"scalar": 1, "covector": 2, "matrix": 4}


def _header_for(obj) -> tuple[dict, np.ndarray, np.ndarray | None]:
    if isinstance(obj, Sinogram):
        hdr = {"kind": "sinogram", **obj.grid.to_header(), "data_kind": obj.kind,
               "shape": list(obj.grid.shape), "mask": obj.mask is not None}
        mask = None if obj.mask is None else obj.mask.astype(np.uint8)
        return hdr, obj.values, mask
    if isinstance(obj, (ScalarField, CovectorField, MatrixField)):
        hdr = {"kind": obj.kind, **obj.grid.to_header(), "components": COMPONENTS[obj.kind]}
        return hdr, obj.data, None
    raise FieldIOError(f"cannot serialise {type(obj).__name__}")


def encode(obj) -> bytes:
    hdr, values, mask = _header_for(obj)
    hdr.update(dtype="f64le", order=ORDER)
    head = json.dumps(hdr, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(head)), head, np.ascontiguousarray(values, dtype=DTYPE).tobytes()]
    if mask is not None:
        parts.append(mask.tobytes())
    return b"".join(parts)


def write(obj, path) -> Path:
    """Write a field or sinogram; returns the path."""
    path = Path(path)
    try:
        path.write_bytes(encode(obj))
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc
    return path


def read_header(buf: bytes) -> tuple[dict, int]:
    """Parse the header; returns ``(header, payload_offset)``."""
    if len(buf) < len(MAGIC) + 4 or buf[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not a vtomo file (bad magic)")
    (n,) = struct.unpack_from("<I", buf, len(MAGIC))
    start = len(MAGIC) + 4
    if start + n > len(buf):
        raise PayloadLengthError("file truncated inside the header")
    try:
        hdr = json.loads(buf[start:start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"unreadable header: {exc}") from exc
    if not isinstance(hdr, dict) or "kind" not in hdr:
        raise HeaderError("header lacks a kind")
    if hdr.get("dtype", "f64le") != "f64le":
        raise HeaderError(f"unsupported dtype {hdr.get('dtype')!r}")
    return hdr, start + n


def _grid(hdr: dict) -> Grid:
    try:
        N = int(hdr["shape"][0])
        (lo, hi) = hdr["domain"][0]
        return Grid(N, lo, hi, int(hdr.get("n", 2)))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise HeaderError(f"bad grid description: {exc}") from exc


def _payload(buf: bytes, offset: int, count: int, extra: int = 0) -> np.ndarray:
    need = offset + 8 * count + extra
    if len(buf) != need:
        raise PayloadLengthError(f"payload is {len(buf) - offset} bytes, header implies {need - offset}")
    vals = np.frombuffer(buf, dtype=DTYPE, count=count, offset=offset).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise NaNPayloadError("payload contains NaN or infinite values")
    return vals


def decode(buf: bytes):
    try:
        return _decode(buf)
    except ConfigError as exc:
        # well-formed bytes describing an invalid object
        raise HeaderError(str(exc)) from exc


def _decode(buf: bytes):
    hdr, off = read_header(buf)
    kind = hdr["kind"]
    if kind == "sinogram":
        try:
            lines = LineGrid(int(hdr["n_angles"]), int(hdr["n_offsets"]), float(hdr["s_max"]))
            data_kind = hdr["data_kind"]
        except (KeyError, TypeError, ValueError) as exc:
            raise HeaderError(f"bad line-grid description: {exc}") from exc
        nbins = lines.n_angles * lines.n_offsets
        has_mask = bool(hdr.get("mask", False))
        vals = _payload(buf, off, nbins, nbins if has_mask else 0).reshape(lines.shape)
        mask = None
        if has_mask:
            mask = np.frombuffer(buf, dtype=np.uint8, count=nbins, offset=off + 8 * nbins).reshape(lines.shape) != 0
        return Sinogram(lines, vals, mask, data_kind)
    if kind not in COMPONENTS:
        raise HeaderError(f"unknown kind {kind!r}")
    ncomp = int(hdr.get("components", COMPONENTS[kind]))
    if ncomp != COMPONENTS[kind]:
        raise KindMismatchError(f"kind {kind!r} carries {COMPONENTS[kind]} components, header says {ncomp}")
    grid = _grid(hdr)
    vals = _payload(buf, off, ncomp * grid.N * grid.N).reshape((ncomp,) + grid.shape)
    if kind == "scalar":
        return ScalarField(grid, vals[0])
    if kind == "covector":
        return CovectorField(grid, vals)
    return MatrixField(grid, vals.reshape((2, 2) + grid.shape))


def read(path, expect: str | None = None):
    """Read a file; ``expect`` (a kind name) raises ``KindMismatchError`` on a different kind."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FieldIOError(f"cannot read {path}: {exc}") from exc
    obj = decode(buf)
    if expect is not None and kind_of(obj) != expect:
        raise KindMismatchError(f"{path} holds a {kind_of(obj)}, expected {expect}")
    return obj


def kind_of(obj) -> str:
    return "sinogram" if isinstance(obj, Sinogram) else obj.kind


def info(path) -> dict:
    """Header plus payload size, for the ``info`` subcommand."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FieldIOError(f"cannot read {path}: {exc}") from exc
    obj = decode(buf)
    hdr, off = read_header(buf)
    data = obj.values if isinstance(obj, Sinogram) else obj.data
    return {"path": str(path), "header": hdr, "payload_bytes": len(buf) - off,
            "min": float(np.min(data)), "max": float(np.max(data))}
