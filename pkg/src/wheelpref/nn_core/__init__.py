from .autodiff import (
    ShapeError,
    Tensor,
    backward,
    conv2d,
    conv2d_transpose,
    exp,
    gather,
    log,
    maximum,
    no_grad,
    relu,
    sigmoid,
    softmax,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import gradient_check
from .layers import Conv2d, ConvTranspose2d, Dense, flatten
from .losses import bce, kl_diag_gaussian, mse
from .optim import Adam

__all__ = [
    "Adam",
    "Conv2d",
    "ConvTranspose2d",
    "Dense",
    "ShapeError",
    "Tensor",
    "backward",
    "bce",
    "conv2d",
    "conv2d_transpose",
    "exp",
    "flatten",
    "gather",
    "gradient_check",
    "kl_diag_gaussian",
    "load_checkpoint",
    "log",
    "maximum",
    "mse",
    "no_grad",
    "relu",
    "save_checkpoint",
    "sigmoid",
    "softmax",
]
