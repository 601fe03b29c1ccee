from .tensor import Tensor, Tape, constant, concat, stack, pad, broadcast_to, softmax
from .params import ParamTree
from .ops import (dense, layer_norm, gru_seq, gru_forward, init_gru, conv2d,
                  conv2d_transpose, mhsa, init_mhsa, init_dense, overlap_add)
from .optim import AdamState, adam_step, clip_grad_norm
from .gradcheck import grad_check

__all__ = [
    "Tensor", "Tape", "constant", "concat", "stack", "pad", "broadcast_to",
    "softmax", "ParamTree", "dense", "layer_norm", "gru_seq", "gru_forward",
    "init_gru", "conv2d", "conv2d_transpose", "mhsa", "init_mhsa",
    "init_dense", "overlap_add", "AdamState", "adam_step", "clip_grad_norm",
    "grad_check",
]
