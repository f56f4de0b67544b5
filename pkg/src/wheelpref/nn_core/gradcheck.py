"""Finite-difference gradient verification."""

import numpy as np

from .autodiff import backward


def gradient_check(loss_fn, params, h=1e-5, n_coords=200, rng=None):
    """Compare analytic gradients against central finite differences.

    loss_fn() must rebuild the graph from ``params`` (name -> Tensor) and
    return a scalar Tensor. Samples ``n_coords`` coordinates across all
    parameters (all of them if fewer exist) and returns the worst relative
    error, |ad - fd| / max(|ad|, |fd|, 1e-3).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params.values():
        p.grad = None
    out = loss_fn()
    backward(out)
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for k, p in params.items()}

    flat = [(k, i) for k, p in params.items() for i in range(p.data.size)]
    if len(flat) > n_coords:
        picks = rng.choice(len(flat), size=n_coords, replace=False)
        flat = [flat[i] for i in picks]

    worst = 0.0
    for name, i in flat:
        view = params[name].data.reshape(-1)
        saved = view[i]
        view[i] = saved + h
        f_plus = float(loss_fn().data)
        view[i] = saved - h
        f_minus = float(loss_fn().data)
        view[i] = saved
        fd = (f_plus - f_minus) / (2.0 * h)
        ad = analytic[name].reshape(-1)[i]
        err = abs(ad - fd) / max(abs(ad), abs(fd), 1e-3)
        worst = max(worst, err)
    return worst
