"""Human-readable key-value text for extrinsics and intrinsics.

Format, one entry per line::

    H_gt = h00 h01 h02 h03 h10 ... h33     # 16 values, row-major
    K = fx fy cx cy width height           # 6 values

Values use ``repr`` precision so parsing restores them bit-exactly.
Blank lines and ``#`` comments are ignored.
"""

import numpy as np

from src.exceptions import ConfigInvalid
from src.geometry.camera import CameraIntrinsics
from src.geometry.transforms import Extrinsic


def format_extrinsic(name: str, h: Extrinsic) -> str:
    """Render ``name = <16 values>``."""
    values = " ".join(repr(float(v)) for v in h.matrix.reshape(-1))
    return f"{name} = {values}"


def format_intrinsics(name: str, k: CameraIntrinsics) -> str:
    """Render ``name = fx fy cx cy width height``."""
    values = [repr(float(k.fx)), repr(float(k.fy))]
    values += [repr(float(k.cx)), repr(float(k.cy))]
    values += [str(k.width), str(k.height)]
    return f"{name} = {' '.join(values)}"


def parse_block(text: str) -> dict[str, list[str]]:
    """Split a text block into ``key -> tokens``."""
    entries: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected 'key = values'")
        key, values = line.split("=", 1)
        entries[key.strip()] = values.split()
    return entries


def parse_extrinsic(tokens: list[str], name: str = "H") -> Extrinsic:
    """Parse the 16 tokens of a row-major 4x4 matrix."""
    if len(tokens) != 16:
        raise ConfigInvalid(f"{name}: expected 16 values, got {len(tokens)}")
    try:
        matrix = np.array([float(t) for t in tokens]).reshape(4, 4)
    except ValueError as exc:
        raise ConfigInvalid(f"{name}: {exc}") from exc
    return Extrinsic.from_matrix(matrix)


def parse_intrinsics(tokens: list[str], name: str = "K") -> CameraIntrinsics:
    """Parse ``fx fy cx cy width height``."""
    if len(tokens) != 6:
        raise ConfigInvalid(f"{name}: expected 6 values, got {len(tokens)}")
    try:
        fx, fy, cx, cy = (float(t) for t in tokens[:4])
        width, height = int(tokens[4]), int(tokens[5])
    except ValueError as exc:
        raise ConfigInvalid(f"{name}: {exc}") from exc
    return CameraIntrinsics(fx, fy, cx, cy, width, height)
