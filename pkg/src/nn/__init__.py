"""From-scratch reverse-mode tensor core and the layers the model needs."""

from src.nn.checkpoint import load_parameters, save_parameters
from src.nn.functional import (
    concat,
    conv1x1,
    conv2d,
    depthwise_conv2d,
    dense,
    dropout,
    flatten,
    maxpool2x2,
    prelu,
)
from src.nn.gradcheck import grad_check
from src.nn.init import orthogonal_init
from src.nn.optim import AdamState, adam_step
from src.nn.tensor import Tape, Tensor, backward, no_grad, precision

__all__ = [
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "concat",
    "conv1x1",
    "conv2d",
    "depthwise_conv2d",
    "dense",
    "dropout",
    "flatten",
    "grad_check",
    "load_parameters",
    "maxpool2x2",
    "no_grad",
    "orthogonal_init",
    "precision",
    "prelu",
    "save_parameters",
]
