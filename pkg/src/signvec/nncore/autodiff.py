"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
replays the recording in reverse topological order and accumulates
gradients into every tensor that requires them. Only the primitives the
sequence encoder needs are implemented.
"""

from __future__ import annotations

import numpy as np


_grad_enabled = True
_margin_tracker = None


class relu_margin_tracker:
    """Records how close ReLU inputs come to their kink during forwards.

    Central finite differences are only a valid gradient oracle where the
    function is locally smooth; a probe point whose pre-activations sit
    within the step size of zero invalidates the comparison. min_margin
    holds the smallest |input| seen by any relu() while active.
    """

    def __init__(self):
        self.min_margin = float("inf")

    def __enter__(self):
        global _margin_tracker
        self._prev = _margin_tracker
        _margin_tracker = self
        return self

    def __exit__(self, *exc):
        global _margin_tracker
        _margin_tracker = self._prev
        return False


class no_grad:
    """Context manager that disables recording; forward values only."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """An n-dimensional value with an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents: tuple = (), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        tracked = requires_grad or any(p.requires_grad for p in parents)
        self.requires_grad = tracked and _grad_enabled
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this tensor; its gradient is seeded with ones."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named leaf tensor that always tracks its gradient."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- primitives ----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    if out.requires_grad:
        out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    if out.requires_grad:
        out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with at least 2 dimensions")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    if out.requires_grad:
        out._backward = backward
    return out


def relu(a) -> Tensor:
    a = as_tensor(a)
    if _margin_tracker is not None and a.data.size:
        margin = float(np.abs(a.data).min())
        if margin < _margin_tracker.min_margin:
            _margin_tracker.min_margin = margin
    out = Tensor(np.maximum(a.data, 0.0), parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (a.data > 0.0))

    if out.requires_grad:
        out._backward = backward
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.data)
    out = Tensor(value, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * value)

    if out.requires_grad:
        out._backward = backward
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.data), parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    if out.requires_grad:
        out._backward = backward
    return out


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data ** exponent, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * exponent * a.data ** (exponent - 1.0))

    if out.requires_grad:
        out._backward = backward
    return out


def _normalize_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = Tensor(a.data.sum(axis=axes, keepdims=keepdims), parents=(a,))

    def backward(g):
        if a.requires_grad:
            if not keepdims:
                g = np.expand_dims(g, axes)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    if out.requires_grad:
        out._backward = backward
    return out


def tensor_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = 1
    for ax in axes:
        count *= a.data.shape[ax]
    return mul(tensor_sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    if out.requires_grad:
        out._backward = backward
    return out


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(a.data.transpose(axes), parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.transpose(inverse))

    if out.requires_grad:
        out._backward = backward
    return out


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stable softmax along one axis (max-subtraction)."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    y = ex / ex.sum(axis=axis, keepdims=True)
    out = Tensor(y, parents=(a,))

    def backward(g):
        if a.requires_grad:
            inner = (g * y).sum(axis=axis, keepdims=True)
            a._accumulate(y * (g - inner))

    if out.requires_grad:
        out._backward = backward
    return out


def dropout(a, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; the identity when not training or rate is 0."""
    a = as_tensor(a)
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("training-mode dropout requires a random generator")
    scale = 1.0 / (1.0 - rate)
    mask = (rng.random(a.data.shape) >= rate) * scale
    out = Tensor(a.data * mask, parents=(a,))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    if out.requires_grad:
        out._backward = backward
    return out


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(xhat * gamma.data + beta.data, parents=(x, gamma, beta))

    def backward(g):
        if gamma.requires_grad:
            axes = tuple(range(g.ndim - 1))
            gamma._accumulate((g * xhat).sum(axis=axes))
        if beta.requires_grad:
            axes = tuple(range(g.ndim - 1))
            beta._accumulate(g.sum(axis=axes))
        if x.requires_grad:
            gx_hat = g * gamma.data
            m1 = gx_hat.mean(axis=-1, keepdims=True)
            m2 = (gx_hat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate((gx_hat - m1 - xhat * m2) * inv_std)

    if out.requires_grad:
        out._backward = backward
    return out


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be [N, C], got shape {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels must be [N], got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c})")

    z = logits.data
    m = z.max(axis=1, keepdims=True)
    ex = np.exp(z - m)
    total = ex.sum(axis=1, keepdims=True)
    log_probs = (z - m) - np.log(total)
    loss = -log_probs[np.arange(n), labels].mean()
    out = Tensor(loss, parents=(logits,))

    def backward(g):
        if logits.requires_grad:
            grad = ex / total
            grad[np.arange(n), labels] -= 1.0
            logits._accumulate(grad * (float(g) / n))

    if out.requires_grad:
        out._backward = backward
    return out
