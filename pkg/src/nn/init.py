"""Weight initialization."""

import math

import numpy as np

from src.nn.tensor import Tensor


def orthogonal_init(
    shape: tuple[int, ...], gain: float, rng: np.random.Generator
) -> Tensor:
    """Orthogonal weights for a parameter of ``shape``.

    Trailing axes are flattened, so a ``(o, c, kh, kw)`` kernel is treated as
    an ``o x (c * kh * kw)`` matrix. Its rows are orthonormal when there are
    no more rows than columns and its columns otherwise.

    Args:
        shape: Parameter shape, at least 2-d
        gain: Scale applied to the orthogonal matrix
        rng: Random generator

    Returns
    -------
        Trainable tensor of ``shape``
    """
    if len(shape) < 2:
        raise ValueError(f"orthogonal_init needs a 2-d shape, got {shape}")
    rows = shape[0]
    cols = math.prod(shape[1:])
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    # Sign fix makes the result uniformly distributed.
    q = q * np.where(np.diag(r) < 0.0, -1.0, 1.0)
    if rows < cols:
        q = q.T
    return Tensor(gain * q.reshape(shape), requires_grad=True)
