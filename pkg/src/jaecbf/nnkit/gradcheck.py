"""Finite-difference verification of analytic gradients."""

import numpy as np


def grad_check(loss_fn, tree, h=1e-5, sample=None, seed=0, corrupt=None):
    """Compare backward-pass gradients against central differences.

    loss_fn  : () -> scalar Tensor, rebuilt from `tree`'s current values
    sample   : max entries checked per parameter (None = all of them)
    corrupt  : parameter name whose analytic gradient gets an injected
               error (negative-control hook for the CLI)

    Returns {"per_param": {name: rel_err}, "max_rel_err": float, "ok": bool}.
    The error is ||a - n|| / max(1, ||a|| + ||n||) over checked entries; the
    floor keeps structurally-zero gradients (which finite differences see as
    pure rounding noise) from reading as spurious relative error.
    """
    rng = np.random.default_rng(seed)
    tree.zero_grad()
    out = loss_fn()
    out.backward()
    analytic = {}
    for name, p in tree:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        analytic[name] = np.asarray(g, dtype=np.float64).ravel().copy()
        if corrupt == name:
            analytic[name] = analytic[name] + 1e-2

    per_param = {}
    ok = True
    for name, p in tree:
        a = analytic[name]
        if not np.all(np.isfinite(a)):
            per_param[name] = float("inf")
            ok = False
            continue
        size = p.data.size
        if sample is not None and size > sample:
            idx = rng.choice(size, size=sample, replace=False)
        else:
            idx = np.arange(size)
        flat = p.data.reshape(-1)
        num = np.empty(len(idx), dtype=np.float64)
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(loss_fn().data)
            flat[i] = orig - h
            fm = float(loss_fn().data)
            flat[i] = orig
            num[k] = (fp - fm) / (2.0 * h)
        av = a[idx]
        denom = max(1.0, np.linalg.norm(av) + np.linalg.norm(num))
        err = float(np.linalg.norm(av - num) / denom)
        per_param[name] = err

    max_err = max(per_param.values()) if per_param else 0.0
    return {"per_param": per_param, "max_rel_err": max_err, "ok": ok and np.isfinite(max_err)}
