"""Adam optimizer (decoupled from any layer structure)."""

import numpy as np


class Adam:
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, grad_clip=None):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.grad_clip = grad_clip
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                 for p in self.params]
        if self.grad_clip is not None:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if total > self.grad_clip:
                scale = self.grad_clip / (total + 1e-12)
                grads = [g * scale for g in grads]
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
