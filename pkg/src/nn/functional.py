"""Differentiable layers on NCHW tensors."""

from collections.abc import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.exceptions import ShapeMismatch
from src.nn.tensor import Tensor, as_tensor


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """Output extent of a convolution along one axis."""
    return (size + 2 * padding - kernel) // stride + 1


def _windows(
    padded: np.ndarray, kernel: tuple[int, int], stride: int
) -> np.ndarray:
    """``(n, c, out_h, out_w, kh, kw)`` strided view over ``padded``."""
    view = sliding_window_view(padded, kernel, axis=(2, 3))
    return view[:, :, ::stride, ::stride]


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    groups: int = 1,
) -> Tensor:
    """Cross-correlate ``x`` with ``weight``.

    Args:
        x: Input ``(n, c, h, w)``
        weight: Kernels ``(o, c / groups, kh, kw)``
        bias: Optional ``(o,)`` offsets
        stride: Step in both directions
        padding: Zero padding on every side
        groups: ``1`` for a dense convolution, ``c`` for a depthwise one

    Returns
    -------
        ``(n, o, out_h, out_w)`` with ``out = (in + 2p - k) // s + 1``

    Raises
    ------
        ShapeMismatch: If channels, groups or sizes do not fit
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeMismatch(
            f"conv2d expects 4-d input and weight, got {x.shape} and "
            f"{weight.shape}"
        )
    n, c, h, w = x.shape
    out_c, in_per_group, kh, kw = weight.shape
    if c % groups or out_c % groups or in_per_group != c // groups:
        raise ShapeMismatch(
            f"weight {weight.shape} does not match {c} input channels in "
            f"{groups} groups"
        )
    if bias is not None and bias.shape != (out_c,):
        raise ShapeMismatch(f"bias {bias.shape} for {out_c} output channels")
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(
            f"kernel {kh}x{kw} does not fit input {h}x{w} with padding "
            f"{padding}"
        )
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(x.data, pad)
    windows = _windows(padded, (kh, kw), stride)
    depthwise = groups == c and out_c == c and groups > 1
    out_per_group = out_c // groups

    if depthwise:
        out = np.einsum("nchwij,cij->nchw", windows, weight.data[:, 0])
    else:
        parts = []
        for g in range(groups):
            ci = slice(g * in_per_group, (g + 1) * in_per_group)
            co = slice(g * out_per_group, (g + 1) * out_per_group)
            part = np.tensordot(
                windows[:, ci], weight.data[co], axes=([1, 4, 5], [1, 2, 3])
            )
            parts.append(part.transpose(0, 3, 1, 2))
        out = np.concatenate(parts, axis=1)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def grad_fn(result: Tensor) -> None:
        grad = result.grad
        if bias is not None:
            bias.accumulate(grad.sum(axis=(0, 2, 3)))
        if depthwise:
            weight.accumulate(
                np.einsum("nchw,nchwij->cij", grad, windows)[:, None]
            )
        else:
            d_weight = np.zeros_like(weight.data)
            for g in range(groups):
                ci = slice(g * in_per_group, (g + 1) * in_per_group)
                co = slice(g * out_per_group, (g + 1) * out_per_group)
                d_weight[co] = np.tensordot(
                    grad[:, co], windows[:, ci], axes=([0, 2, 3], [0, 2, 3])
                )
            weight.accumulate(d_weight)
        if not x.requires_grad:
            return
        d_padded = np.zeros_like(padded)
        for i in range(kh):
            rows = slice(i, i + stride * (out_h - 1) + 1, stride)
            for j in range(kw):
                cols = slice(j, j + stride * (out_w - 1) + 1, stride)
                if depthwise:
                    d_padded[:, :, rows, cols] += (
                        grad * weight.data[None, :, 0, i, j, None, None]
                    )
                    continue
                for g in range(groups):
                    ci = slice(g * in_per_group, (g + 1) * in_per_group)
                    co = slice(g * out_per_group, (g + 1) * out_per_group)
                    d_padded[:, ci, rows, cols] += np.einsum(
                        "nohw,oc->nchw", grad[:, co], weight.data[co, :, i, j]
                    )
        x.accumulate(
            d_padded[:, :, padding : padding + h, padding : padding + w]
        )

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, grad_fn)


def depthwise_conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Per-channel convolution with ``weight`` of shape ``(c, 1, kh, kw)``."""
    return conv2d(x, weight, bias, stride, padding, groups=x.shape[1])


def conv1x1(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Pointwise convolution with ``weight`` of shape ``(o, c, 1, 1)``."""
    if weight.ndim != 4 or weight.shape[2:] != (1, 1):
        raise ShapeMismatch(f"conv1x1 expects (o, c, 1, 1), got {weight.shape}")
    return conv2d(x, weight, bias)


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2.

    Odd extents are padded with ``-inf``. The gradient goes to the first
    maximum of each block in row-major order.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"maxpool2x2 expects 4-d input, got {x.shape}")
    n, c, h, w = x.shape
    ph, pw = h % 2, w % 2
    data = x.data
    if ph or pw:
        data = np.pad(
            data, ((0, 0), (0, 0), (0, ph), (0, pw)), constant_values=-np.inf
        )
    oh, ow = data.shape[2] // 2, data.shape[3] // 2
    blocks = (
        data.reshape(n, c, oh, 2, ow, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh, ow, 4)
    )
    winner = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def grad_fn(result: Tensor) -> None:
        routed = np.zeros(blocks.shape, dtype=x.data.dtype)
        np.put_along_axis(routed, winner[..., None], result.grad[..., None], -1)
        full = (
            routed.reshape(n, c, oh, ow, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, 2 * oh, 2 * ow)
        )
        x.accumulate(full[:, :, :h, :w])

    return Tensor.from_op(out, (x,), grad_fn)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ W^T + b`` with ``W`` of shape ``(out, in)``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(
            f"dense input {x.shape} does not match weight {weight.shape}"
        )
    out = x @ weight.T
    if bias is None:
        return out
    if bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f"bias {bias.shape} for weight {weight.shape}")
    return out + bias


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """``x`` where positive, ``slope * x`` elsewhere (scalar ``slope``)."""
    if slope.size != 1:
        raise ShapeMismatch(f"prelu slope must be scalar, got {slope.shape}")
    a = slope.data.reshape(())
    positive = x.data > 0.0

    def grad_fn(out: Tensor) -> None:
        x.accumulate(np.where(positive, out.grad, a * out.grad))
        slope.accumulate(
            np.sum(np.where(positive, 0.0, out.grad * x.data)).reshape(
                slope.shape
            )
        )

    return Tensor.from_op(
        np.where(positive, x.data, a * x.data), (x, slope), grad_fn
    )


def dropout(
    x: Tensor, p: float, rng: np.random.Generator | None, training: bool
) -> Tensor:
    """Inverted dropout: kept units are scaled by ``1 / (1 - p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0, 1)")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.shape) >= p
    return x * Tensor(keep / (1.0 - p))


def flatten(x: Tensor) -> Tensor:
    """Collapse every axis after the batch axis."""
    return x.reshape(x.shape[0], -1)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Join tensors along ``axis``."""
    tensors = [as_tensor(t) for t in tensors]
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad_fn(out: Tensor) -> None:
        for tensor, part in zip(
            tensors, np.split(out.grad, bounds, axis=axis), strict=True
        ):
            tensor.accumulate(part)

    return Tensor.from_op(
        np.concatenate([t.data for t in tensors], axis=axis), tensors, grad_fn
    )
