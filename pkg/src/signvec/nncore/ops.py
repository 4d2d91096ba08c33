"""Network-level operations built on the autodiff primitives."""

from __future__ import annotations

import numpy as np

from . import kernels
from .autodiff import (
    Tensor,
    as_tensor,
    dropout,
    matmul,
    mul,
    reshape,
    softmax,
    tensor_sum,
    transpose,
)

_MASKED_SCORE = -1e30  # exp() underflows to exactly 0 after max-subtraction


def linear(x, weight, bias) -> Tensor:
    """Affine map y = x @ W + b on the last axis."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    if bias.shape != (weight.shape[1],):
        raise ValueError(f"linear: bias shape {bias.shape} != ({weight.shape[1]},)")
    return matmul(x, weight) + bias


def conv1d_temporal(x, weight, bias) -> Tensor:
    """Same-length temporal convolution; accepts [T, C_in] or [N, T, C_in]."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    squeeze = x.ndim == 2
    data = x.data[None] if squeeze else x.data
    value = kernels.conv1d_forward(data, weight.data, bias.data)
    out = Tensor(value[0] if squeeze else value, parents=(x, weight, bias))

    def backward(g):
        grad_out = g[None] if squeeze else g
        gx, gw, gb = kernels.conv1d_backward(data, weight.data, grad_out)
        if x.requires_grad:
            x._accumulate(gx[0] if squeeze else gx)
        if weight.requires_grad:
            weight._accumulate(gw)
        if bias.requires_grad:
            bias._accumulate(gb)

    if out.requires_grad:
        out._backward = backward
    return out


def multi_head_self_attention(
    x,
    heads: int,
    mask: np.ndarray,
    *,
    wq, bq, wk, wv, bv, wo, bo,
    attn_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> Tensor:
    """Scaled dot-product self-attention over time with padding masks.

    x: [N, T, d]; mask: [N, T] booleans, True at real frames. Masked
    positions are excluded as keys (score -inf) and zeroed as queries.
    Heads are concatenated and passed through the output projection.
    The key projection has no bias: a bias shifts every score of a query
    by the same amount and cancels in the softmax.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"attention input must be [N, T, d], got shape {x.shape}")
    n, t, d = x.shape
    if d % heads != 0:
        raise ValueError(f"width {d} not divisible by {heads} heads")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n, t):
        raise ValueError(f"mask must be [N, T] = ({n}, {t}), got {mask.shape}")
    if not mask.any(axis=1).all():
        raise ValueError("every sequence needs at least one unmasked position")
    dh = d // heads

    def split_heads(y: Tensor) -> Tensor:
        return transpose(reshape(y, (n, t, heads, dh)), (0, 2, 1, 3))  # [N, h, T, dh]

    q = split_heads(linear(x, wq, bq))
    k = split_heads(matmul(x, as_tensor(wk)))
    v = split_heads(linear(x, wv, bv))

    scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    key_bias = np.where(mask, 0.0, _MASKED_SCORE)[:, None, None, :]
    weights = softmax(scores + key_bias, axis=-1)
    weights = dropout(weights, attn_dropout, rng, train)

    context = matmul(weights, v)  # [N, h, T, dh]
    merged = reshape(transpose(context, (0, 2, 1, 3)), (n, t, d))
    out = linear(merged, wo, bo)
    return mul(out, mask[:, :, None].astype(np.float64))


def masked_mean_pool(x, mask: np.ndarray) -> Tensor:
    """Mean over the time axis restricted to valid positions.

    x: [N, T, d]; mask: [N, T] booleans with at least one True per row.
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("every sequence needs at least one valid frame to pool")
    weights = (mask / counts[:, None])[:, :, None]
    return tensor_sum(mul(x, weights), axis=1)


def sinusoidal_positions(length: int, width: int) -> np.ndarray:
    """Fixed sine/cosine position table of shape [length, width]."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    index = np.arange(0, width, 2, dtype=np.float64)
    rates = 1.0 / np.power(10000.0, index / width)
    table = np.zeros((length, width), dtype=np.float64)
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates)[:, : table[:, 1::2].shape[1]]
    return table
