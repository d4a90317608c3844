"""Finite-difference gradient checks."""

from collections.abc import Callable, Sequence

import numpy as np

from src.nn.tensor import Tensor, backward, no_grad, precision


def grad_check(
    f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-4
) -> float:
    """Compare reverse-mode gradients against central differences.

    Parameters are promoted to float64 in place and ``f`` is evaluated
    under f64 precision.

    Args:
        f: Builds the scalar loss from ``params``
        params: Tensors to differentiate
        h: Finite-difference step

    Returns
    -------
        Maximum elementwise relative error over all parameters
    """
    with precision(np.float64):
        for param in params:
            param.data = param.data.astype(np.float64)
            param.requires_grad = True
            param.zero_grad()
        backward(f())
        analytic = [
            np.zeros(p.shape) if p.grad is None else p.grad.copy()
            for p in params
        ]
        worst = 0.0
        for param, grad in zip(params, analytic, strict=True):
            flat = param.data.reshape(-1)
            numeric = np.zeros(flat.size)
            for i in range(flat.size):
                saved = flat[i]
                with no_grad():
                    flat[i] = saved + h
                    upper = f().item()
                    flat[i] = saved - h
                    lower = f().item()
                flat[i] = saved
                numeric[i] = (upper - lower) / (2.0 * h)
            exact = grad.reshape(-1)
            scale = np.maximum(np.maximum(np.abs(exact), np.abs(numeric)), 1e-6)
            worst = max(worst, float(np.max(np.abs(exact - numeric) / scale)))
    return worst
