"""
Binary tensor container for model checkpoints.

Layout (little-endian)::

    magic   b"SCASREC-CKPT"
    u32     format version
    u32     entry count
    entries:
        u32     name length, then UTF-8 name
        u32     ndim, then ndim x u32 dims
        f64     payload, row-major
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from scasrec.core.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"SCASREC-CKPT"
FORMAT_VERSION = 1


def encode_checkpoint(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named arrays; entry order is the mapping order."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        array = np.asarray(value, dtype="<f8")
        if array.ndim == 0:
            array = array.reshape(1)
        if any(d <= 0 for d in array.shape):
            raise CheckpointError(f"tensor {name} has an empty dimension: {array.shape}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
        chunks.append(np.ascontiguousarray(array).tobytes())
    return b"".join(chunks)


def decode_checkpoint(blob: bytes) -> Dict[str, np.ndarray]:
    """
    Parse a checkpoint produced by ``encode_checkpoint``.

    Raises:
        CheckpointError: On bad magic, unknown version or truncated data
    """
    if not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    offset = len(MAGIC)

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise CheckpointError("checkpoint is truncated")
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values

    version, count = take("<II")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<I")
        if offset + name_len > len(blob):
            raise CheckpointError("checkpoint is truncated")
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = take("<I")
        dims = take(f"<{ndim}I") if ndim else ()
        n_bytes = 8 * int(np.prod(dims, dtype=np.int64)) if dims else 8
        if offset + n_bytes > len(blob):
            raise CheckpointError(f"checkpoint is truncated inside tensor {name}")
        payload = np.frombuffer(blob, dtype="<f8", count=n_bytes // 8, offset=offset)
        offset += n_bytes
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name in checkpoint: {name}")
        tensors[name] = payload.astype(np.float64).reshape(dims if dims else (1,))

    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes after last tensor")
    return tensors


def save_checkpoint(path: Path, tensors: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors))
    logger.debug("wrote checkpoint %s (%d tensors)", path, len(tensors))


def load_checkpoint(path: Path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())
