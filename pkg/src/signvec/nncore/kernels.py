"""Temporal-convolution kernels with selectable backends.

Two implementations exist: a vectorized numpy path (one BLAS matmul per
kernel tap) and a compiled Cython loop. Benchmarks on the shapes this
model actually runs (see benchmarks/bench_kernels.py) show the BLAS path
is 4-9x faster at realistic channel counts, so numpy is the default; the
compiled backend remains available for measurement and for environments
where it wins, via SIGNVEC_BACKEND=cython. Both produce identical results
up to float64 rounding and are parity-tested.

Convolutions are same-length cross-correlations along time with zero
padding of (k - 1) / 2 on both ends; k must be odd.
"""

from __future__ import annotations

import os

import numpy as np


def load_compiled():
    """The compiled extension module, or None when it is not built."""
    try:
        from . import _convkernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _convkernels


_requested = os.environ.get("SIGNVEC_BACKEND", "numpy").strip().lower()
if _requested in ("cython", "compiled"):
    _compiled = load_compiled()
    BACKEND = "cython" if _compiled is not None else "numpy"
elif _requested in ("", "numpy", "pure"):
    _compiled = None
    BACKEND = "numpy"
else:
    raise ValueError(f"SIGNVEC_BACKEND must be 'numpy' or 'cython', got {_requested!r}")


def _check_shapes(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> int:
    if x.ndim != 3:
        raise ValueError(f"input must be [N, T, C_in], got shape {x.shape}")
    if kernels.ndim != 3:
        raise ValueError(f"kernels must be [k, C_in, C_out], got shape {kernels.shape}")
    k, c_in, c_out = kernels.shape
    if k % 2 == 0:
        raise ValueError(f"kernel length must be odd, got {k}")
    if x.shape[2] != c_in:
        raise ValueError(f"channel mismatch: input has {x.shape[2]}, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise ValueError(f"bias must be [{c_out}], got shape {bias.shape}")
    return k


def _f64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-length temporal cross-correlation: [N, T, C_in] -> [N, T, C_out]."""
    x, kernels, bias = _f64(x), _f64(kernels), _f64(bias)
    k = _check_shapes(x, kernels, bias)
    n, t, c_in = x.shape
    c_out = kernels.shape[2]
    if _compiled is not None:
        out = np.empty((n, t, c_out), dtype=np.float64)
        _compiled.conv1d_forward(x, kernels, bias, out)
        return out
    pad = (k - 1) // 2
    padded = np.zeros((n, t + k - 1, c_in), dtype=np.float64)
    padded[:, pad:pad + t] = x
    out = np.empty((n, t, c_out), dtype=np.float64)
    out[:] = bias
    for tap in range(k):
        out += padded[:, tap:tap + t] @ kernels[tap]
    return out


def conv1d_backward(
    x: np.ndarray, kernels: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_forward w.r.t. input, kernels and bias."""
    x, kernels, grad_out = _f64(x), _f64(kernels), _f64(grad_out)
    n, t, c_in = x.shape
    k, _, c_out = kernels.shape
    if grad_out.shape != (n, t, c_out):
        raise ValueError(f"grad shape {grad_out.shape} does not match output ({n}, {t}, {c_out})")
    if _compiled is not None:
        grad_x = np.zeros_like(x)
        grad_w = np.zeros_like(kernels)
        grad_b = np.zeros(c_out, dtype=np.float64)
        _compiled.conv1d_backward(x, kernels, grad_out, grad_x, grad_w, grad_b)
        return grad_x, grad_w, grad_b
    pad = (k - 1) // 2
    padded = np.zeros((n, t + k - 1, c_in), dtype=np.float64)
    padded[:, pad:pad + t] = x
    grad_padded = np.zeros_like(padded)
    grad_w = np.empty_like(kernels)
    for tap in range(k):
        grad_padded[:, tap:tap + t] += grad_out @ kernels[tap].T
        grad_w[tap] = np.tensordot(padded[:, tap:tap + t], grad_out, axes=((0, 1), (0, 1)))
    grad_b = grad_out.sum(axis=(0, 1))
    return grad_padded[:, pad:pad + t].copy(), grad_w, grad_b
