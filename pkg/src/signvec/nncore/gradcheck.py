"""Central-finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .autodiff import Tensor


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    *,
    h: float = 1e-5,
    samples_per_param: int = 4,
    seed: int = 0,
    analytic: Mapping[str, np.ndarray] | None = None,
) -> float:
    """Compare analytic gradients against central differences.

    loss_fn evaluates the scalar loss from the current parameter values
    (it must read the same arrays that params holds). For each parameter
    a few coordinates are sampled and perturbed by +/-h; the result is the
    maximum over sampled coordinates of

        |analytic - numeric| / max(1e-8, |analytic| + |numeric|)

    Passing `analytic` overrides the backward-pass gradients (used to
    validate that the check itself detects corrupted gradients).
    """
    if analytic is None:
        for p in params.values():
            p.zero_grad()
        loss = loss_fn()
        if loss.data.ndim != 0:
            raise ValueError("loss_fn must return a scalar tensor")
        loss.backward()
        analytic = {
            name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
            for name, p in params.items()
        }

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        grads = np.asarray(analytic[name]).reshape(-1)
        n_coords = min(samples_per_param, flat.size)
        coords = rng.choice(flat.size, size=n_coords, replace=False)
        for i in coords:
            original = flat[i]
            flat[i] = original + h
            f_plus = float(loss_fn().data)
            flat[i] = original - h
            f_minus = float(loss_fn().data)
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grads[i])
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
    return worst
