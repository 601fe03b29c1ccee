"""Autodiff core: finite-difference oracles, graph rules, optimizer math."""

import numpy as np
import pytest

from jaecbf.nnkit import (Tensor, Tape, ParamTree, AdamState, adam_step,
                          clip_grad_norm, grad_check, gru_forward, init_gru,
                          softmax)
from jaecbf.checks import nnkit_suite


def test_every_primitive_matches_finite_differences():
    for name, err, tol in nnkit_suite():
        assert err < tol, f"{name}: {err} >= {tol}"


def test_backward_twice_raises():
    x = Tensor(np.ones(3), requires_grad=True)
    y = x.square().sum()
    y.backward()
    with pytest.raises(RuntimeError):
        y.backward()


def test_tape_guard_single_use():
    x = Tensor(np.ones(3), requires_grad=True)
    tape = Tape(x.square().sum())
    tape.backward()
    with pytest.raises(RuntimeError):
        tape.backward()


def test_gradients_accumulate_across_reuse():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x + x * 3.0  # dy/dx = 2x + 3 = 7
    y.sum().backward()
    assert np.allclose(x.grad, [7.0])


def test_broadcast_gradient_shapes():
    a = Tensor(np.ones((3, 1)), requires_grad=True)
    b = Tensor(np.ones((1, 4)), requires_grad=True)
    (a * b).sum().backward()
    assert a.grad.shape == (3, 1) and b.grad.shape == (1, 4)
    assert np.allclose(a.grad, 4.0) and np.allclose(b.grad, 3.0)


def test_softmax_rows_sum_to_one(rng):
    s = softmax(Tensor(rng.standard_normal((5, 7)) * 30.0), axis=-1)
    assert np.allclose(s.data.sum(axis=-1), 1.0)
    assert np.all(s.data >= 0.0)


def test_gru_zero_weights_fixed_point():
    tree = ParamTree(seed=0, dtype=np.float64)
    init_gru(tree, "g", 3, 4)
    for name in ("g.wx", "g.u_rz", "g.u_n", "g.b"):
        tree[name].data[:] = 0.0
    out = gru_forward(Tensor(np.random.default_rng(1).standard_normal((5, 3))), tree, "g")
    assert np.allclose(out.data, 0.0)


def test_adam_first_step_size():
    # with bias correction the first update is exactly lr per coordinate
    tree = ParamTree(seed=0, dtype=np.float64)
    p = tree.add("w", np.zeros(4))
    adam = AdamState(tree, lr=0.01)
    p.grad = np.array([1.0, -2.0, 0.5, -0.1])
    adam_step(tree, adam)
    assert np.allclose(p.data, -0.01 * np.sign([1.0, -2.0, 0.5, -0.1]), atol=1e-6)


def test_clip_grad_norm_scales_to_max():
    tree = ParamTree(seed=0, dtype=np.float64)
    a = tree.add("a", np.zeros(3))
    b = tree.add("b", np.zeros(4))
    a.grad = np.full(3, 10.0)
    b.grad = np.full(4, 10.0)
    clip_grad_norm(tree, max_norm=1.0)
    total = np.sqrt(np.sum(a.grad ** 2) + np.sum(b.grad ** 2))
    assert np.isclose(total, 1.0)


def test_clip_grad_norm_noop_under_limit():
    tree = ParamTree(seed=0, dtype=np.float64)
    a = tree.add("a", np.zeros(3))
    a.grad = np.full(3, 0.1)
    clip_grad_norm(tree, max_norm=10.0)
    assert np.allclose(a.grad, 0.1)


def test_grad_check_negative_control():
    tree = ParamTree(seed=0, dtype=np.float64)
    tree.add("w", np.random.default_rng(0).standard_normal(5))
    loss = lambda: tree["w"].square().sum()
    clean = grad_check(loss, tree)
    broken = grad_check(loss, tree, corrupt="w")
    assert clean["max_rel_err"] < 1e-8
    assert broken["max_rel_err"] > 1e-4


def test_param_tree_rejects_duplicates_and_bad_shapes():
    tree = ParamTree(seed=0)
    tree.add("w", np.zeros(3))
    with pytest.raises(ValueError):
        tree.add("w", np.zeros(3))
    with pytest.raises(ValueError):
        tree.load_values({"w": np.zeros(4)})
