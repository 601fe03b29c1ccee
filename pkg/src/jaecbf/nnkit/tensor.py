"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ndarray and remembers how it was produced.
Calling :meth:`Tensor.backward` (or going through :class:`Tape`) walks the
recorded graph once in reverse topological order and accumulates gradients
into every reachable leaf that has ``requires_grad`` set.

Only the operations the surrounding package needs are implemented; there is
no general broadcasting beyond what numpy's rules give us for free.
"""

import numpy as np

__all__ = ["Tensor", "Tape", "constant", "concat", "stack", "pad", "broadcast_to", "softmax"]


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd", "_done")

    def __init__(self, data, requires_grad=False, _parents=(), _bwd=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._bwd = _bwd
        self._done = False

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _lift(x, like=None):
        if isinstance(x, Tensor):
            return x
        dtype = like.data.dtype if like is not None else np.float64
        return Tensor(np.asarray(x, dtype=dtype))

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    # -- backward pass ------------------------------------------------------

    def backward(self, grad=None):
        """Accumulate gradients of self w.r.t. every reachable leaf.

        A second backward through the same graph raises; build a fresh
        forward pass instead.
        """
        if self._done:
            raise RuntimeError("backward() already ran on this graph; rerun the forward pass")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = self._toposort()
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in order:
            node._done = True
            if node._bwd is None or node.grad is None:
                continue
            parent_grads = node._bwd(node.grad)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg

    def _toposort(self):
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        return list(reversed(order))

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other, self)
        return _op(self.data + other.data, (self, other),
                   lambda g: (_unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        other = Tensor._lift(other, self)
        return _op(self.data - other.data, (self, other),
                   lambda g: (_unbroadcast(g, self.data.shape), _unbroadcast(-g, other.data.shape)))

    def __rsub__(self, other):
        return Tensor._lift(other, self).__sub__(self)

    def __mul__(self, other):
        other = Tensor._lift(other, self)
        return _op(self.data * other.data, (self, other),
                   lambda g: (_unbroadcast(g * other.data, self.data.shape),
                              _unbroadcast(g * self.data, other.data.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other, self)
        return _op(self.data / other.data, (self, other),
                   lambda g: (_unbroadcast(g / other.data, self.data.shape),
                              _unbroadcast(-g * self.data / (other.data * other.data),
                                           other.data.shape)))

    def __rtruediv__(self, other):
        return Tensor._lift(other, self).__truediv__(self)

    def __neg__(self):
        return _op(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        other = Tensor._lift(other, self)
        a, b = self.data, other.data

        def bwd(g):
            if b.ndim == 1:
                ga = np.outer(g, b) if a.ndim > 1 else g * b
                gb = a.T @ g if a.ndim > 1 else a * g
            elif a.ndim == 1:
                ga = g @ b.swapaxes(-1, -2)
                gb = np.outer(a, g)
            else:
                ga = _unbroadcast(g @ b.swapaxes(-1, -2), a.shape)
                gb = _unbroadcast(a.swapaxes(-1, -2) @ g, b.shape)
            return ga, gb

        return _op(a @ b, (self, other), bwd)

    def __getitem__(self, idx):
        # indices used here never repeat, so += is a safe scatter-add
        def bwd(g):
            out = np.zeros_like(self.data)
            out[idx] += g
            return (out,)
        return _op(self.data[idx], (self,), bwd)

    # -- elementwise nonlinearities ----------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return _op(out, (self,), lambda g: (g * out,))

    def log(self):
        return _op(np.log(self.data), (self,), lambda g: (g / self.data,))

    def tanh(self):
        out = np.tanh(self.data)
        return _op(out, (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self):
        out = 1.0 / (1.0 + np.exp(-self.data))
        return _op(out, (self,), lambda g: (g * out * (1.0 - out),))

    def sqrt(self):
        out = np.sqrt(self.data)
        return _op(out, (self,), lambda g: (g * (0.5 / out),))

    def square(self):
        return _op(self.data * self.data, (self,), lambda g: (2.0 * g * self.data,))

    def relu(self):
        mask = self.data > 0
        return _op(self.data * mask, (self,), lambda g: (g * mask,))

    # -- reductions / shape ops --------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def bwd(g):
            if axis is None:
                return (np.broadcast_to(g, self.data.shape).astype(self.data.dtype),)
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.data.shape).astype(self.data.dtype),)
        return _op(self.data.sum(axis=axis, keepdims=keepdims), (self,), bwd)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return _op(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = tuple(np.argsort(axes))
        return _op(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def swapaxes(self, a, b):
        return _op(self.data.swapaxes(a, b), (self,), lambda g: (g.swapaxes(a, b),))


def _op(data, parents, bwd):
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _bwd=bwd)
    return Tensor(data)


def constant(x, dtype=np.float64):
    return Tensor(np.asarray(x, dtype=dtype))


def concat(tensors, axis=0):
    tensors = list(tensors)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd)


def stack(tensors, axis=0):
    tensors = list(tensors)

    def bwd(g):
        pieces = np.split(g, len(tensors), axis=axis)
        return tuple(np.squeeze(p, axis=axis) for p in pieces)

    return _op(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), bwd)


def pad(t, pad_width):
    """Zero padding; `pad_width` as for np.pad."""
    pw = tuple(tuple(p) for p in pad_width)

    def bwd(g):
        sl = tuple(slice(b, g.shape[i] - a) for i, (b, a) in enumerate(pw))
        return (g[sl],)

    return _op(np.pad(t.data, pw), (t,), bwd)


def broadcast_to(t, shape):
    old = t.data.shape

    def bwd(g):
        return (_unbroadcast(g, old),)

    return _op(np.broadcast_to(t.data, shape).copy(), (t,), bwd)


def softmax(t, axis=-1):
    # max shift is treated as a constant: softmax is shift invariant
    shifted = t - t.data.max(axis=axis, keepdims=True)
    e = shifted.exp()
    return e / e.sum(axis=axis, keepdims=True)


class Tape:
    """Guard around one forward pass; backward may run exactly once."""

    def __init__(self, output):
        self.output = output
        self._used = False

    def backward(self, grad=None):
        if self._used:
            raise RuntimeError("this tape was already consumed by a backward pass")
        self._used = True
        self.output.backward(grad)
