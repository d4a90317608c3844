"""Reverse-mode differentiable tensor.

Each operation returns a new :class:`Tensor` holding its parents and a
``_backward`` closure that pushes the output gradient to them. Calling
:func:`backward` on a scalar sorts the graph topologically into a
:class:`Tape` and runs the closures in reverse order.
"""

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar

import numpy as np

from src.exceptions import NonScalarLoss, ShapeMismatch

_DTYPE: ContextVar[type[np.floating]] = ContextVar("dtype", default=np.float32)
_GRAD_ENABLED: ContextVar[bool] = ContextVar("grad_enabled", default=True)


def default_dtype() -> type[np.floating]:
    """Floating type of newly created tensors."""
    return _DTYPE.get()


@contextmanager
def precision(dtype: type[np.floating]) -> Iterator[None]:
    """Create tensors with ``dtype`` inside the block (f64 for grad checks)."""
    token = _DTYPE.set(dtype)
    try:
        yield
    finally:
        _DTYPE.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Do not record operations inside the block."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """An n-dimensional array taking part in gradient recording."""

    def __init__(
        self,
        data: np.ndarray | float | Sequence[float],
        requires_grad: bool = False,
        name: str = "",
    ) -> None:
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._prev: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] = lambda: None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: Callable[["Tensor"], None],
    ) -> "Tensor":
        """Wrap an op result; ``backward(out)`` runs during the reverse pass."""
        tracked = _GRAD_ENABLED.get() and any(p.requires_grad for p in parents)
        out = cls(data, requires_grad=tracked)
        if tracked:
            out._prev = tuple(parents)
            out._backward = lambda: backward(out)
        return out

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.data.dtype})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, grad: np.ndarray) -> None:
        """Add ``grad`` into this tensor's gradient buffer."""
        if not self.requires_grad:
            return
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            grad = unbroadcast(grad, self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> "Tape":
        """Backpropagate from this scalar."""
        return backward(self)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "Tensor | float") -> "Tensor":
        other = as_tensor(other)

        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad)
            other.accumulate(out.grad)

        return Tensor.from_op(self.data + other.data, (self, other), grad_fn)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def grad_fn(out: Tensor) -> None:
            self.accumulate(-out.grad)

        return Tensor.from_op(-self.data, (self,), grad_fn)

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: "Tensor | float") -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        other = as_tensor(other)

        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad * other.data)
            other.accumulate(out.grad * self.data)

        return Tensor.from_op(self.data * other.data, (self, other), grad_fn)

    __rmul__ = __mul__

    def __truediv__(self, other: "Tensor | float") -> "Tensor":
        other = as_tensor(other)

        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad / other.data)
            other.accumulate(-out.grad * self.data / np.square(other.data))

        return Tensor.from_op(self.data / other.data, (self, other), grad_fn)

    def __rtruediv__(self, other: "Tensor | float") -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        def grad_fn(out: Tensor) -> None:
            self.accumulate(
                out.grad * exponent * np.power(self.data, exponent - 1)
            )

        return Tensor.from_op(np.power(self.data, exponent), (self,), grad_fn)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeMismatch(
                f"cannot multiply {self.shape} by {other.shape}"
            )

        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad @ other.data.T)
            other.accumulate(self.data.T @ out.grad)

        return Tensor.from_op(self.data @ other.data, (self, other), grad_fn)

    # -- elementwise --------------------------------------------------------

    def abs(self) -> "Tensor":
        """Absolute value; the subgradient at 0 is 0."""

        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad * np.sign(self.data))

        return Tensor.from_op(np.abs(self.data), (self,), grad_fn)

    def sqrt(self) -> "Tensor":
        """Square root; the gradient at 0 is taken as 0."""
        root = np.sqrt(self.data)

        def grad_fn(out: Tensor) -> None:
            safe = np.where(root > 0.0, root, 1.0)
            self.accumulate(np.where(root > 0.0, 0.5 * out.grad / safe, 0.0))

        return Tensor.from_op(root, (self,), grad_fn)

    # -- reductions and shape ----------------------------------------------

    def sum(self, axis: int | tuple[int, ...] | None = None) -> "Tensor":
        def grad_fn(out: Tensor) -> None:
            grad = out.grad
            if axis is not None:
                grad = np.expand_dims(grad, axis)
            self.accumulate(np.broadcast_to(grad, self.shape))

        return Tensor.from_op(self.data.sum(axis=axis), (self,), grad_fn)

    def mean(self, axis: int | None = None) -> "Tensor":
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis) * (1.0 / count)

    def reshape(self, *shape: int) -> "Tensor":
        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad.reshape(self.shape))

        return Tensor.from_op(self.data.reshape(shape), (self,), grad_fn)

    @property
    def T(self) -> "Tensor":  # noqa: N802
        def grad_fn(out: Tensor) -> None:
            self.accumulate(out.grad.T)

        return Tensor.from_op(self.data.T, (self,), grad_fn)


def as_tensor(value: "Tensor | float | np.ndarray") -> Tensor:
    """Wrap constants; tensors pass through."""
    return value if isinstance(value, Tensor) else Tensor(value)


class Tape:
    """Recorded operations in topological order (inputs first)."""

    def __init__(self, nodes: list[Tensor]) -> None:
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        """Topologically sort every tracked node reachable from ``root``."""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def run(self) -> None:
        """Visit each node once in reverse topological order."""
        for node in reversed(self.nodes):
            if node.grad is not None:
                node._backward()


def backward(loss: Tensor) -> Tape:
    """Accumulate gradients of a scalar loss into every tracked tensor.

    Returns
    -------
        The tape that was run

    Raises
    ------
        NonScalarLoss: If ``loss`` has more than one element
    """
    if loss.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    tape = Tape.record(loss)
    loss.grad = np.ones_like(loss.data)
    tape.run()
    return tape
