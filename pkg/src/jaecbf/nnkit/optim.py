"""Adam optimizer and global-norm gradient clipping on a ParamTree."""

import numpy as np


class AdamState:
    def __init__(self, tree, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in tree}
        self.v = {name: np.zeros_like(p.data) for name, p in tree}


def clip_grad_norm(tree, max_norm=10.0):
    """Scale all gradients so the global L2 norm is at most `max_norm`.

    Returns the scale factor applied (1.0 when untouched).
    """
    total = 0.0
    for _, p in tree:
        if p.grad is None:
            raise ValueError("gradients not populated")
        total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm
    for _, p in tree:
        p.grad = (p.grad * scale).astype(p.data.dtype)
    return scale


def adam_step(tree, state):
    """One bias-corrected Adam update; increments the step counter."""
    state.t += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in tree:
        g = p.grad
        if g is None:
            raise ValueError(f"gradient not populated for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = p.data - update.astype(p.data.dtype)
