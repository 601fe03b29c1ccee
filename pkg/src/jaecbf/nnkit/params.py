"""Named trainable parameters with matching gradient storage."""

import numpy as np

from .tensor import Tensor


class ParamTree:
    """Ordered mapping name -> leaf Tensor (value + grad, same shape).

    Creation order is the iteration order, so checkpoints and optimizer
    state line up deterministically.
    """

    def __init__(self, seed=0, dtype=np.float32):
        self._params = {}
        self.rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)

    # -- creation -----------------------------------------------------------

    def add(self, name, values):
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(values, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def glorot(self, name, shape):
        fan_in, fan_out = shape[-2] if len(shape) > 1 else shape[-1], shape[-1]
        if len(shape) > 2:  # conv kernels [out, in, kh, kw]
            receptive = int(np.prod(shape[2:]))
            fan_out, fan_in = shape[0] * receptive, shape[1] * receptive
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, self.rng.uniform(-limit, limit, size=shape))

    def recurrent(self, name, shape):
        # uniform +-1/sqrt(d_h), d_h = hidden width = first axis
        limit = 1.0 / np.sqrt(shape[0])
        return self.add(name, self.rng.uniform(-limit, limit, size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    # -- access -------------------------------------------------------------

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def count(self):
        return int(sum(t.data.size for _, t in self))

    def zero_grad(self):
        for _, t in self:
            t.grad = None

    def grads_populated(self):
        return all(t.grad is not None for _, t in self)

    def copy_values(self):
        return {name: t.data.copy() for name, t in self}

    def load_values(self, values):
        for name, t in self:
            if name not in values:
                raise KeyError(f"missing parameter: {name}")
            arr = np.asarray(values[name], dtype=self.dtype)
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()
