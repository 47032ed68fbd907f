"""Strict reader/writer for NPY version 1.0 array files.

Only the subset used by the embedding stores is supported: little-endian
float32 or int64 payloads, C order, NPY format version 1.0. Version 2/3
headers, other dtypes, and Fortran-ordered arrays are rejected outright.

On-disk layout::

    \\x93 N U M P Y          6 magic bytes
    \\x01 \\x00               format version 1.0
    <u2 header length>
    ascii header dict, space-padded so (10 + len) % 64 == 0, ending in \\n
    raw little-endian payload

The writer always emits the minimal canonical header for a given shape and
dtype, so writing the same array twice produces byte-identical files.
"""
from __future__ import annotations

import ast
import os
from typing import BinaryIO

import numpy as np

from .errors import NpyFormatError

MAGIC = b"\x93NUMPY"
VERSION = b"\x01\x00"
HEADER_ALIGN = 64

_SUPPORTED_DESCR = {"<f4": np.dtype("<f4"), "<i8": np.dtype("<i8")}


def header_bytes(shape: tuple[int, ...], descr: str) -> bytes:
    """Build the full preamble (magic + version + length + padded header)."""
    if descr not in _SUPPORTED_DESCR:
        raise NpyFormatError(f"unsupported dtype descr {descr!r}")
    shape_repr = repr(tuple(int(s) for s in shape))
    body = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, shape_repr)
    total = len(MAGIC) + len(VERSION) + 2 + len(body) + 1
    pad = (-total) % HEADER_ALIGN
    header = body + " " * pad + "\n"
    return MAGIC + VERSION + len(header).to_bytes(2, "little") + header.encode("ascii")


def write_array(path: str | os.PathLike, array: np.ndarray) -> None:
    """Write ``array`` to ``path`` as a canonical NPY v1.0 file."""
    arr = np.ascontiguousarray(array)
    descr = arr.dtype.str
    if descr not in _SUPPORTED_DESCR:
        raise NpyFormatError(f"refusing to write dtype {arr.dtype}; only <f4 and <i8 are supported")
    with open(path, "wb") as f:
        f.write(header_bytes(arr.shape, descr))
        f.write(arr.tobytes(order="C"))


def _parse_header(f: BinaryIO, path: str) -> tuple[tuple[int, ...], str]:
    preamble = f.read(len(MAGIC) + len(VERSION))
    if len(preamble) < 8 or preamble[: len(MAGIC)] != MAGIC:
        raise NpyFormatError(f"{path}: bad magic bytes")
    if preamble[len(MAGIC):] != VERSION:
        raise NpyFormatError(f"{path}: unsupported NPY version {preamble[6]}.{preamble[7]} (only 1.0)")
    len_bytes = f.read(2)
    if len(len_bytes) != 2:
        raise NpyFormatError(f"{path}: truncated header length field")
    header_len = int.from_bytes(len_bytes, "little")
    raw = f.read(header_len)
    if len(raw) != header_len:
        raise NpyFormatError(f"{path}: truncated header")
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise NpyFormatError(f"{path}: header is not ASCII") from exc
    if not text.endswith("\n"):
        raise NpyFormatError(f"{path}: header not newline-terminated")
    try:
        meta = ast.literal_eval(text)
    except (ValueError, SyntaxError, MemoryError, RecursionError) as exc:
        raise NpyFormatError(f"{path}: malformed header dictionary") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise NpyFormatError(f"{path}: header must have exactly descr/fortran_order/shape keys")
    descr = meta["descr"]
    if descr not in _SUPPORTED_DESCR:
        raise NpyFormatError(f"{path}: unsupported dtype descr {descr!r} (need <f4 or <i8)")
    if meta["fortran_order"] is not False:
        raise NpyFormatError(f"{path}: Fortran-ordered payloads are not supported")
    shape = meta["shape"]
    if (
        not isinstance(shape, tuple)
        or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in shape)
    ):
        raise NpyFormatError(f"{path}: invalid shape {shape!r}")
    return shape, descr


def read_shape(path: str | os.PathLike) -> tuple[tuple[int, ...], str]:
    """Read only the header of ``path``; returns (shape, dtype descr)."""
    with open(path, "rb") as f:
        return _parse_header(f, str(path))


def read_array(
    path: str | os.PathLike,
    expected_descr: str | None = None,
    expected_rank: int | None = None,
) -> np.ndarray:
    """Load an NPY v1.0 file, validating dtype/rank/payload length.

    The payload is read directly into the returned array (a single copy).
    """
    with open(path, "rb") as f:
        shape, descr = _parse_header(f, str(path))
        if expected_descr is not None and descr != expected_descr:
            raise NpyFormatError(f"{path}: dtype is {descr}, expected {expected_descr}")
        if expected_rank is not None and len(shape) != expected_rank:
            raise NpyFormatError(f"{path}: rank {len(shape)}, expected {expected_rank}")
        dtype = _SUPPORTED_DESCR[descr]
        count = 1
        for s in shape:
            count *= s
        expected_bytes = count * dtype.itemsize
        remaining = os.fstat(f.fileno()).st_size - f.tell()
        if remaining < expected_bytes:
            raise NpyFormatError(
                f"{path}: truncated payload ({remaining} bytes, header promises {expected_bytes})"
            )
        if remaining > expected_bytes:
            raise NpyFormatError(
                f"{path}: {remaining - expected_bytes} trailing bytes after payload"
            )
        if count == 0:
            return np.empty(shape, dtype=dtype)
        data = np.fromfile(f, dtype=dtype, count=count)
        if data.size != count:
            raise NpyFormatError(f"{path}: truncated payload")
        return data.reshape(shape)
