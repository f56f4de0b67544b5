"""Parameterized layers built on the autodiff ops."""

import numpy as np

from .autodiff import ShapeError, Tensor, conv2d, conv2d_transpose


class Dense:
    def __init__(self, n_in, n_out, rng, scale=None):
        scale = np.sqrt(1.0 / n_in) if scale is None else scale
        self.w = Tensor(rng.normal(0.0, scale, (n_in, n_out)), requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x):
        if x.data.shape[-1] != self.w.data.shape[0]:
            raise ShapeError(
                f"dense: input width {x.data.shape[-1]} != {self.w.data.shape[0]}"
            )
        return x @ self.w + self.b

    def params(self, prefix):
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class Conv2d:
    """3x3 kernel, stride 2, padding 1: halves spatial size (ceil)."""

    def __init__(self, c_in, c_out, rng, k=3):
        scale = np.sqrt(2.0 / (c_in * k * k))
        self.w = Tensor(rng.normal(0.0, scale, (c_out, c_in, k, k)), requires_grad=True)
        self.b = Tensor(np.zeros(c_out), requires_grad=True)

    def __call__(self, x):
        return conv2d(x, self.w, self.b, stride=2, pad=1)

    def params(self, prefix):
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class ConvTranspose2d:
    """3x3 kernel, stride 2: doubles spatial size (mirror of Conv2d)."""

    def __init__(self, c_in, c_out, rng, k=3):
        scale = np.sqrt(2.0 / (c_in * k * k))
        self.w = Tensor(rng.normal(0.0, scale, (c_in, c_out, k, k)), requires_grad=True)
        self.b = Tensor(np.zeros(c_out), requires_grad=True)

    def __call__(self, x):
        return conv2d_transpose(x, self.w, self.b, stride=2, pad=1)

    def params(self, prefix):
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def flatten(x):
    """Collapse all but the leading (batch) axis."""
    n = x.data.shape[0]
    return x.reshape(n, -1)
