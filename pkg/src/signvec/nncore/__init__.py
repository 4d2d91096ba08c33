"""Minimal differentiable-computation layer for the sequence encoder."""

from .autodiff import (
    Parameter,
    Tensor,
    cross_entropy,
    dropout,
    layer_norm,
    no_grad,
    relu,
    softmax,
)
from .gradcheck import finite_difference_check
from .kernels import BACKEND as KERNEL_BACKEND
from .ops import (
    conv1d_temporal,
    linear,
    masked_mean_pool,
    multi_head_self_attention,
    sinusoidal_positions,
)
from .optim import OptimizerState, adam_step, init_adam
from .weights_io import (
    WeightFormatError,
    deserialize_weights,
    serialize_weights,
    weight_fingerprint,
)

__all__ = [
    "Parameter",
    "Tensor",
    "cross_entropy",
    "dropout",
    "layer_norm",
    "no_grad",
    "relu",
    "softmax",
    "finite_difference_check",
    "KERNEL_BACKEND",
    "conv1d_temporal",
    "linear",
    "masked_mean_pool",
    "multi_head_self_attention",
    "sinusoidal_positions",
    "OptimizerState",
    "adam_step",
    "init_adam",
    "WeightFormatError",
    "deserialize_weights",
    "serialize_weights",
    "weight_fingerprint",
]
