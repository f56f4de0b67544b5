"""Loss functions.

Reductions: bce sums over elements, mse averages over elements, kl sums
over every entry (latent dims and batch rows alike).
"""

import numpy as np

from .autodiff import Tensor, _accum, _as_tensor


def bce(p, target):
    """Binary cross entropy, summed. p is clamped to [1e-7, 1 - 1e-7]."""
    p = _as_tensor(p)
    t = np.asarray(target, dtype=np.float64)
    pc = np.clip(p.data, 1e-7, 1.0 - 1e-7)
    val = -np.sum(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc))

    def bwd(g):
        inside = (p.data > 1e-7) & (p.data < 1.0 - 1e-7)
        _accum(p, g * np.where(inside, (pc - t) / (pc * (1.0 - pc)), 0.0))

    return Tensor(val, op="bce", parents=(p,), backward_fn=bwd)


def mse(pred, target):
    """Mean squared error over all elements."""
    pred = _as_tensor(pred)
    t = np.asarray(target, dtype=np.float64)
    n = pred.data.size
    diff = pred.data - t

    def bwd(g):
        _accum(pred, g * 2.0 * diff / n)

    return Tensor(np.sum(diff * diff) / n, op="mse", parents=(pred,), backward_fn=bwd)


def kl_diag_gaussian(mu, sigma):
    """KL(N(mu, diag(sigma^2)) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - ln sigma^2 - 1)."""
    mu = _as_tensor(mu)
    sigma = _as_tensor(sigma)
    var = sigma.data * sigma.data
    val = 0.5 * np.sum(mu.data * mu.data + var - np.log(var) - 1.0)

    def bwd(g):
        _accum(mu, g * mu.data)
        _accum(sigma, g * (sigma.data - 1.0 / sigma.data))

    return Tensor(val, op="kl", parents=(mu, sigma), backward_fn=bwd)
