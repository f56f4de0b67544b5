"""Adam optimizer over a flat name -> Tensor parameter dict."""

import numpy as np


class Adam:
    """Adam with optional per-name-prefix learning rates.

    lr_map maps a name prefix to a learning rate; the longest matching
    prefix wins, falling back to ``lr``. Parameters whose grad is None
    after backward are left untouched (zero gradient).
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, lr_map=None):
        self.params = dict(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.lr_map = dict(lr_map or {})
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def _lr_for(self, name):
        best = None
        for prefix, lr in self.lr_map.items():
            if name.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, lr)
        return self.lr if best is None else best[1]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[name] = self.b1 * self.m[name] + (1.0 - self.b1) * g
            self.v[name] = self.b2 * self.v[name] + (1.0 - self.b2) * g * g
            mhat = self.m[name] / c1
            vhat = self.v[name] / c2
            p.data -= self._lr_for(name) * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
