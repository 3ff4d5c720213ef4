"""Low-level helpers for the little-endian binary container files.

All on-disk formats in this package (channel dumps, network checkpoints,
Hessian estimates) share the same skeleton: a 4-byte ASCII magic, a u32
format version, then fixed-width fields and raw f64 arrays. Everything is
little-endian with no padding.
"""

import struct
from typing import BinaryIO

import numpy as np


class ContainerError(Exception):
    """Base class for binary container problems."""


class BadMagicError(ContainerError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(ContainerError):
    """File carries an unsupported format version."""


class TruncatedFileError(ContainerError):
    """File ended before the declared payload was read."""


def read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(
            f"expected {n} more bytes, got {len(buf)} (truncated file?)"
        )
    return buf


def expect_magic(fh: BinaryIO, magic: bytes) -> None:
    got = fh.read(len(magic))
    if got != magic:
        raise BadMagicError(f"bad magic: expected {magic!r}, got {got!r}")


def expect_version(fh: BinaryIO, supported: int) -> int:
    (version,) = struct.unpack("<I", read_exact(fh, 4))
    if version != supported:
        raise VersionMismatchError(
            f"unsupported format version {version} (supported: {supported})"
        )
    return version


def write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<I", value))


def write_u64(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<Q", value))


def write_f64(fh: BinaryIO, value: float) -> None:
    fh.write(struct.pack("<d", value))


def read_u32(fh: BinaryIO) -> int:
    return struct.unpack("<I", read_exact(fh, 4))[0]


def read_u64(fh: BinaryIO) -> int:
    return struct.unpack("<Q", read_exact(fh, 8))[0]


def read_f64(fh: BinaryIO) -> float:
    return struct.unpack("<d", read_exact(fh, 8))[0]


def write_str16(fh: BinaryIO, text: str) -> None:
    """u16 length-prefixed UTF-8 string."""
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for u16 length prefix: {len(raw)} bytes")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def read_str16(fh: BinaryIO) -> str:
    (length,) = struct.unpack("<H", read_exact(fh, 2))
    return read_exact(fh, length).decode("utf-8")


def write_f64_array(fh: BinaryIO, arr: np.ndarray) -> None:
    """Row-major f64 payload; shape is the caller's business."""
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_f64_array(fh: BinaryIO, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape)) if shape else 1
    raw = read_exact(fh, 8 * count)
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
