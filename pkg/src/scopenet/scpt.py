"""SCPT tensor container: the on-disk format for checkpoints and fixtures.

Layout (all integers little-endian):

    magic  "SCPT" (4 bytes)
    format version  u32         (currently 1)
    tensor count    u32
    per tensor:
        name length u32
        name        utf-8 bytes
        dims        4 x u32     (shorter shapes are padded with trailing 1s)
        dtype tag   u8          (0 = float32, 1 = float64)
        payload     raw little-endian values, row-major

Loading returns arrays with the stored 4-entry shape; callers that saved
lower-rank tensors reshape against their own metadata.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import ScopeError

MAGIC = b"SCPT"
FORMAT_VERSION = 1

_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_TAG_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class ContainerError(ScopeError):
    """Raised for malformed or truncated SCPT files."""


def _padded_shape(shape: tuple[int, ...]) -> tuple[int, int, int, int]:
    if len(shape) > 4:
        raise ContainerError(f"SCPT stores at most 4 dims, got shape {shape}")
    return tuple(shape) + (1,) * (4 - len(shape))  # type: ignore[return-value]


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Write named arrays to an SCPT container (insertion order preserved)."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _DTYPE_TAGS:
            raise ContainerError(
                f"tensor {name!r} has unsupported dtype {arr.dtype}")
        encoded = name.encode("utf-8")
        dims = _padded_shape(arr.shape)
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<4I", *dims))
        chunks.append(struct.pack("<B", _DTYPE_TAGS[arr.dtype]))
        chunks.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False)
                      .tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    """Read an SCPT container back into a name -> array mapping."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    if len(blob) < 12 or view[:4] != MAGIC:
        raise ContainerError(f"{path}: not an SCPT container")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: unsupported format version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            name = bytes(view[offset:offset + name_len]).decode("utf-8")
            offset += name_len
            dims = struct.unpack_from("<4I", blob, offset)
            offset += 16
            (tag,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            if tag not in _TAG_DTYPES:
                raise ContainerError(f"{path}: unknown dtype tag {tag}")
            dtype = _TAG_DTYPES[tag]
            nbytes = int(np.prod(dims)) * dtype.itemsize
            if offset + nbytes > len(blob):
                raise ContainerError(f"{path}: truncated payload for {name!r}")
            arr = np.frombuffer(view[offset:offset + nbytes], dtype=dtype)
            offset += nbytes
        except struct.error as exc:
            raise ContainerError(f"{path}: truncated header") from exc
        out[name] = arr.reshape(dims).astype(dtype.newbyteorder("="))
    return out
