"""Named-parameter checkpoint files.

Layout (little-endian): magic ``RCNN1``, then per parameter: u32 name
length, utf-8 name, u32 rank, u32 extents, f32 data in row-major order.
"""

from collections.abc import Mapping
from pathlib import Path

import numpy as np

from src.exceptions import ArtifactVersionMismatch, IoFailure

CHECKPOINT_MAGIC = b"RCNN1"


def encode_parameters(params: Mapping[str, np.ndarray]) -> bytes:
    """Serialize parameters in insertion order."""
    chunks = [CHECKPOINT_MAGIC]
    for name, value in params.items():
        raw = name.encode("utf-8")
        value = np.asarray(value)
        chunks.append(np.array([len(raw)], dtype="<u4").tobytes())
        chunks.append(raw)
        chunks.append(
            np.array([value.ndim, *value.shape], dtype="<u4").tobytes()
        )
        chunks.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_parameters(raw: bytes) -> dict[str, np.ndarray]:
    """Parse bytes written by :func:`encode_parameters`.

    Raises
    ------
        ArtifactVersionMismatch: On a bad magic or truncated data
    """
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ArtifactVersionMismatch("not a checkpoint (bad magic)")
    offset = len(CHECKPOINT_MAGIC)
    params: dict[str, np.ndarray] = {}

    def take(dtype: str, count: int) -> np.ndarray:
        nonlocal offset
        size = np.dtype(dtype).itemsize * count
        if offset + size > len(raw):
            raise ArtifactVersionMismatch("checkpoint is truncated")
        values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        offset += size
        return values

    while offset < len(raw):
        length = int(take("<u4", 1)[0])
        name = bytes(take("u1", length)).decode("utf-8")
        rank = int(take("<u4", 1)[0])
        shape = tuple(int(e) for e in take("<u4", rank))
        params[name] = take("<f4", int(np.prod(shape))).reshape(shape).copy()
    return params


def save_parameters(path: Path, params: Mapping[str, np.ndarray]) -> None:
    """Write a checkpoint file."""
    try:
        path.write_bytes(encode_parameters(params))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_parameters(path: Path) -> dict[str, np.ndarray]:
    """Read a checkpoint file."""
    if not path.exists():
        raise ArtifactVersionMismatch(f"missing checkpoint {path}")
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_parameters(raw)
