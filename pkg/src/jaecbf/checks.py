"""Finite-difference gradient suites, shared by the CLI and the test gate.

Each suite returns a list of (name, max_rel_err, tolerance) triples; a suite
passes when every error is below its tolerance.  All checks run in float64
on purpose-built small cases so central differences are trustworthy.
"""

import numpy as np

from .audio import AudioClip
from .nnkit import (Tensor, ParamTree, grad_check, dense, layer_norm,
                    gru_forward, init_gru, conv2d, conv2d_transpose, mhsa,
                    init_mhsa, init_dense, overlap_add, concat, stack, pad,
                    broadcast_to, softmax)
from .model import ModelConfig, build_params, model_forward
from .model.network import istft_tensor

TOL_ELEMENTWISE = 1e-6
TOL_COMPOUND = 1e-4
TOL_FULL_MODEL = 1e-3

MODULES = ("all", "stft", "nnkit", "aec", "bf")


def _tree(seed, **arrays):
    tree = ParamTree(seed=seed, dtype=np.float64)
    for name, shape in arrays.items():
        tree.add(name, tree.rng.standard_normal(shape))
    return tree


def _run(name, loss_fn, tree, tol, sample=None, corrupt=None):
    res = grad_check(loss_fn, tree, sample=sample, corrupt=corrupt)
    return (name, res["max_rel_err"], tol)


def nnkit_suite(corrupt=None):
    """One check per differentiable primitive."""
    checks = []
    rng = np.random.default_rng(0)

    t = _tree(1, a=(3, 4), b=(3, 4), c=(4, 5))
    t["b"].data += 2.5  # keep div/log/sqrt away from the origin
    cases = [
        ("add", lambda: (t["a"] + t["b"]).square().sum()),
        ("sub", lambda: (t["a"] - t["b"]).square().sum()),
        ("mul", lambda: (t["a"] * t["b"]).square().sum()),
        ("div", lambda: (t["a"] / t["b"]).square().sum()),
        ("neg", lambda: (-t["a"]).square().sum()),
        ("matmul", lambda: (t["a"] @ t["c"]).square().sum()),
        ("getitem", lambda: t["a"][1:, ::2].square().sum()),
        ("exp", lambda: t["a"].exp().sum()),
        ("log", lambda: t["b"].log().sum()),
        ("tanh", lambda: t["a"].tanh().square().sum()),
        ("sigmoid", lambda: t["a"].sigmoid().square().sum()),
        ("sqrt", lambda: t["b"].sqrt().sum()),
        ("square", lambda: t["a"].square().sum()),
        ("relu", lambda: (t["a"] + 0.05).relu().square().sum()),
        ("sum_axis", lambda: t["a"].sum(axis=1).square().sum()),
        ("mean", lambda: t["a"].mean(axis=0).square().sum()),
        ("reshape", lambda: t["a"].reshape(4, 3).square().sum()),
        ("transpose", lambda: t["a"].transpose(1, 0).square().sum()),
        ("concat", lambda: concat([t["a"], t["b"]], axis=1).square().sum()),
        ("stack", lambda: stack([t["a"], t["b"]], axis=0).square().sum()),
        ("pad", lambda: pad(t["a"], ((1, 2), (0, 1))).square().sum()),
        ("broadcast_to", lambda: broadcast_to(t["a"].reshape(3, 1, 4), (3, 2, 4)).square().sum()),
        ("softmax", lambda: (softmax(t["a"], axis=-1) * t["b"]).sum()),
    ]
    for name, fn in cases:
        checks.append(_run(name, fn, t, TOL_ELEMENTWISE, corrupt=corrupt))

    td = _tree(2, x=(5, 3), w=(3, 4), b=(4,), gamma=(3,), beta=(3,))
    checks.append(_run("dense", lambda: dense(td["x"], td["w"], td["b"]).square().sum(),
                       td, TOL_ELEMENTWISE, corrupt=corrupt))
    checks.append(_run("layer_norm",
                       lambda: layer_norm(td["x"], td["gamma"], td["beta"]).square().sum(),
                       td, TOL_COMPOUND, corrupt=corrupt))

    tg = ParamTree(seed=3, dtype=np.float64)
    init_gru(tg, "g", 3, 4)
    tg.add("gx", tg.rng.standard_normal((6, 2, 3)))
    checks.append(_run("gru", lambda: gru_forward(tg["gx"], tg, "g").square().sum(),
                       tg, TOL_COMPOUND, corrupt=corrupt))

    tc = _tree(4, x=(2, 6, 5), w=(3, 2, 3, 3), b=(3,), wt=(2, 3, 3, 3))
    checks.append(_run("conv2d",
                       lambda: conv2d(tc["x"], tc["w"], tc["b"], stride=(2, 1),
                                      padding=(1, 1)).square().sum(),
                       tc, TOL_COMPOUND, corrupt=corrupt))
    checks.append(_run("conv2d_transpose",
                       lambda: conv2d_transpose(tc["x"], tc["wt"], tc["b"], stride=(2, 1),
                                                padding=(1, 1),
                                                output_padding=(1, 0)).square().sum(),
                       tc, TOL_COMPOUND, corrupt=corrupt))

    tm = ParamTree(seed=5, dtype=np.float64)
    init_mhsa(tm, "att", 8)
    tm.add("q", tm.rng.standard_normal((7, 8)))
    checks.append(_run("mhsa",
                       lambda: mhsa(tm["q"], tm["q"], tm["q"], tm, "att", heads=2)
                       .square().sum(),
                       tm, TOL_COMPOUND, corrupt=corrupt))

    to = _tree(6, fr=(4, 8))
    checks.append(_run("overlap_add", lambda: overlap_add(to["fr"], 4).square().sum(),
                       to, TOL_ELEMENTWISE, corrupt=corrupt))
    return checks


def stft_suite(corrupt=None):
    """Differentiable synthesis path against finite differences."""
    cfg = ModelConfig(mics=2, dtype="float64")
    n_frames, bins = 4, cfg.bins
    t = _tree(7, s_re=(n_frames, bins), s_im=(n_frames, bins))
    out_len = (n_frames - 1) * cfg.hop + cfg.fft_size

    def loss():
        sig = istft_tensor(t["s_re"], t["s_im"], cfg, out_len)
        return sig.square().sum()

    return [_run("istft", loss, t, TOL_COMPOUND, sample=40, corrupt=corrupt)]


def _toy_case(width, seconds, seed=0):
    cfg = ModelConfig(mics=2, width=width, heads=4, dtype="float64")
    params = build_params(cfg, seed=seed)
    rng = np.random.default_rng(seed + 100)
    # jitter every parameter so zero-initialized layers don't leave whole
    # branches of the graph with structurally zero gradients
    for _, p in params:
        p.data += 0.05 * rng.standard_normal(p.data.shape)
    n_frames = max(2, int(seconds * 16000) // cfg.hop - 1)
    shape = (cfg.mics + 1, n_frames, cfg.bins)
    y_re = Tensor(rng.standard_normal(shape) * 0.1)
    y_im = Tensor(rng.standard_normal(shape) * 0.1)
    return cfg, params, y_re, y_im


def aec_suite(corrupt=None):
    from .model import aec_forward
    cfg, params, y_re, y_im = _toy_case(width=16, seconds=0.1)

    def loss():
        t_re, t_im = aec_forward(y_re, y_im, params, cfg)
        return t_re.square().sum() + t_im.square().sum()

    return [_run("aec_forward", loss, params, TOL_FULL_MODEL, sample=2, corrupt=corrupt)]


def bf_suite(corrupt=None):
    from .model import aec_forward, beamformer_forward
    cfg, params, y_re, y_im = _toy_case(width=16, seconds=0.1)
    t_re, t_im = aec_forward(y_re, y_im, params, cfg)
    t_re = Tensor(t_re.data.copy())  # beamformer checked in isolation
    t_im = Tensor(t_im.data.copy())

    def loss():
        s_re, s_im, p = beamformer_forward(t_re, t_im, params, cfg, dtd=True)
        return s_re.square().sum() + s_im.square().sum() + p.sum()

    return [_run("beamformer_forward", loss, params, TOL_FULL_MODEL, sample=2,
                 corrupt=corrupt)]


def full_model_suite(corrupt=None, width=32, seconds=0.5, sample=1):
    cfg, params, y_re, y_im = _toy_case(width=width, seconds=seconds)

    def loss():
        s_re, s_im, p = model_forward(y_re, y_im, params, cfg, dtd=True)
        return s_re.square().sum() + s_im.square().sum() + p.sum()

    return [_run("full_model", loss, params, TOL_FULL_MODEL, sample=sample,
                 corrupt=corrupt)]


def run_suite(module, corrupt=None, include_full_model=False):
    suites = {
        "nnkit": nnkit_suite,
        "stft": stft_suite,
        "aec": aec_suite,
        "bf": bf_suite,
    }
    if module == "all":
        checks = []
        for fn in suites.values():
            checks.extend(fn(corrupt=corrupt))
        if include_full_model:
            checks.extend(full_model_suite(corrupt=corrupt))
        return checks
    if module not in suites:
        raise ValueError(f"unknown gradcheck module {module!r}; choose from {MODULES}")
    return suites[module](corrupt=corrupt)
