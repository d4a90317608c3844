"""Adam optimizer."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from src.exceptions import ShapeMismatch
from src.nn.tensor import Tensor


@dataclass
class AdamState:
    """Moment buffers and hyperparameters of Adam."""

    learning_rate: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(
        cls, params: Sequence[Tensor], learning_rate: float = 0.002
    ) -> "AdamState":
        """Zero moments shaped like ``params``."""
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p.data, dtype=np.float64) for p in params],
            v=[np.zeros_like(p.data, dtype=np.float64) for p in params],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray | None],
    state: AdamState,
) -> Sequence[Tensor]:
    """Apply one bias-corrected Adam update in place.

    Args:
        params: Parameters to update
        grads: Gradient per parameter; ``None`` counts as zero
        state: Optimizer state, advanced by one step

    Returns
    -------
        The updated parameters

    Raises
    ------
        ShapeMismatch: If gradients or moments do not match the parameters
    """
    if not state.m:
        state.m = [np.zeros_like(p.data, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p.data, dtype=np.float64) for p in params]
    if not len(params) == len(grads) == len(state.m):
        raise ShapeMismatch(
            f"{len(params)} params, {len(grads)} grads, "
            f"{len(state.m)} moment buffers"
        )
    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for i, (param, grad) in enumerate(zip(params, grads, strict=True)):
        g = np.zeros(param.shape) if grad is None else np.asarray(grad)
        if g.shape != param.shape or state.m[i].shape != param.shape:
            raise ShapeMismatch(
                f"gradient {g.shape} for parameter {param.shape}"
            )
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype)
    return params
