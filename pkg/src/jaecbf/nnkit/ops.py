"""Neural network building blocks on top of the autodiff core.

Shapes follow the conventions used by the model code:
  dense:   [..., d_in] @ [d_in, d_out] + [d_out]
  conv2d:  [C_in, H, W] -> [C_out, H', W']   (no batch axis; one utterance)
  gru:     [steps, batch, d_in] -> [steps, batch, d_h]
  mhsa:    [steps, d] -> [steps, d]
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, _op, softmax

__all__ = [
    "dense", "layer_norm", "gru_seq", "gru_forward", "conv2d",
    "conv2d_transpose", "mhsa", "overlap_add",
]


def dense(x, w, b=None):
    out = x @ w
    if b is not None:
        out = out + b
    return out


def layer_norm(x, gamma, beta, eps=1e-5):
    """Zero-mean unit-variance over the last axis, then learnable affine."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = xc.square().mean(axis=-1, keepdims=True)
    y = xc / (var + eps).sqrt()
    return y * gamma + beta


# ---------------------------------------------------------------------------
# GRU: fused recurrence with hand-written backprop through time.  Gate order
# in the projected input is (r, z, n).
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_seq(xp, u_rz, u_n, h0):
    """Run the gated recurrence over axis 0 of `xp`.

    xp   : Tensor [T, B, 3h], the input projections x @ Wx + b
    u_rz : Tensor [h, 2h], recurrent weights for reset/update gates
    u_n  : Tensor [h, h], recurrent weights for the candidate
    h0   : Tensor [B, h] initial state
    returns Tensor [T, B, h] of hidden states.
    """
    T, B, three_h = xp.data.shape
    h = three_h // 3
    ur, uz = u_rz.data[:, :h], u_rz.data[:, h:]
    un = u_n.data
    xs = xp.data
    hs = np.empty((T, B, h), dtype=xs.dtype)
    rs = np.empty_like(hs)
    zs = np.empty_like(hs)
    cs = np.empty_like(hs)
    ans = np.empty_like(hs)
    hprev = h0.data
    for t in range(T):
        xr, xz, xn = xs[t, :, :h], xs[t, :, h:2 * h], xs[t, :, 2 * h:]
        r = _sigmoid(xr + hprev @ ur)
        z = _sigmoid(xz + hprev @ uz)
        a = hprev @ un
        c = np.tanh(xn + r * a)
        hs[t] = z * hprev + (1.0 - z) * c
        rs[t], zs[t], cs[t], ans[t] = r, z, c, a
        hprev = hs[t]

    def bwd(g):
        dxp = np.empty_like(xs)
        dur = np.zeros_like(ur)
        duz = np.zeros_like(uz)
        dun = np.zeros_like(un)
        dh = np.zeros((B, h), dtype=xs.dtype)
        for t in range(T - 1, -1, -1):
            dh = dh + g[t]
            r, z, c, a = rs[t], zs[t], cs[t], ans[t]
            hp = hs[t - 1] if t > 0 else h0.data
            dz = dh * (hp - c)
            dc = dh * (1.0 - z)
            dhp = dh * z
            dpre_n = dc * (1.0 - c * c)
            da = dpre_n * r
            dr = dpre_n * a
            dpre_r = dr * r * (1.0 - r)
            dpre_z = dz * z * (1.0 - z)
            dxp[t, :, :h] = dpre_r
            dxp[t, :, h:2 * h] = dpre_z
            dxp[t, :, 2 * h:] = dpre_n
            dhp = dhp + da @ un.T + dpre_r @ ur.T + dpre_z @ uz.T
            dun += hp.T @ da
            dur += hp.T @ dpre_r
            duz += hp.T @ dpre_z
            dh = dhp
        return dxp, np.concatenate([dur, duz], axis=1), dun, dh

    return _op(hs, (xp, u_rz, u_n, h0), bwd)


def gru_forward(x_seq, params, prefix, h0=None):
    """Standard GRU over a [steps, d_in] or [steps, batch, d_in] sequence."""
    squeeze = x_seq.ndim == 2
    if squeeze:
        x_seq = x_seq.reshape(x_seq.shape[0], 1, x_seq.shape[1])
    wx = params[prefix + ".wx"]
    b = params[prefix + ".b"]
    u_rz = params[prefix + ".u_rz"]
    u_n = params[prefix + ".u_n"]
    hdim = u_n.shape[0]
    if h0 is None:
        h0 = Tensor(np.zeros((x_seq.shape[1], hdim), dtype=x_seq.dtype))
    xp = x_seq @ wx + b
    hs = gru_seq(xp, u_rz, u_n, h0)
    if squeeze:
        hs = hs.reshape(hs.shape[0], hs.shape[2])
    return hs


def init_gru(tree, prefix, d_in, d_h):
    tree.glorot(prefix + ".wx", (d_in, 3 * d_h))
    tree.zeros(prefix + ".b", (3 * d_h,))
    tree.recurrent(prefix + ".u_rz", (d_h, 2 * d_h))
    tree.recurrent(prefix + ".u_n", (d_h, d_h))


# ---------------------------------------------------------------------------
# 2-D convolution (cross-correlation convention) via im2col
# ---------------------------------------------------------------------------

def conv2d(x, w, b, stride=(1, 1), padding=(0, 0)):
    """x: [C_in, H, W]; w: [C_out, C_in, kh, kw]; b: [C_out]."""
    sh, sw = stride
    ph, pw = padding
    c_out, c_in, kh, kw = w.data.shape
    xd = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    hp, wp = xd.shape[1], xd.shape[2]
    if kh > hp or kw > wp:
        raise ValueError("kernel larger than padded input")
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    win = sliding_window_view(xd, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    cols = np.ascontiguousarray(win.transpose(1, 2, 0, 3, 4)).reshape(ho * wo, c_in * kh * kw)
    wmat = w.data.reshape(c_out, -1)
    out = (cols @ wmat.T + b.data).T.reshape(c_out, ho, wo)

    def bwd(g):
        g2 = g.reshape(c_out, -1).T  # [ho*wo, c_out]
        dw = (g2.T @ cols).reshape(w.data.shape)
        db = g.sum(axis=(1, 2))
        dcols = (g2 @ wmat).reshape(ho, wo, c_in, kh, kw)
        dxp = np.zeros_like(xd)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i:i + (ho - 1) * sh + 1:sh, j:j + (wo - 1) * sw + 1:sw] += \
                    dcols[:, :, :, i, j].transpose(2, 0, 1)
        dx = dxp[:, ph:ph + x.data.shape[1], pw:pw + x.data.shape[2]]
        return dx, dw, db

    return _op(out, (x, w, b), bwd)


def conv2d_transpose(x, w, b, stride=(1, 1), padding=(0, 0), output_padding=(0, 0)):
    """x: [C_in, H, W]; w: [C_in, C_out, kh, kw]; mirrors conv2d."""
    sh, sw = stride
    ph, pw = padding
    oph, opw = output_padding
    c_in, c_out, kh, kw = w.data.shape
    _, h, wdt = x.data.shape
    hp = (h - 1) * sh + kh + oph
    wp = (wdt - 1) * sw + kw + opw
    x2 = x.data.reshape(c_in, -1).T  # [h*w, c_in]
    wmat = w.data.reshape(c_in, -1)  # [c_in, c_out*kh*kw]
    cols = (x2 @ wmat).reshape(h, wdt, c_out, kh, kw)
    yp = np.zeros((c_out, hp, wp), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            yp[:, i:i + (h - 1) * sh + 1:sh, j:j + (wdt - 1) * sw + 1:sw] += \
                cols[:, :, :, i, j].transpose(2, 0, 1)
    out = yp[:, ph:hp - ph, pw:wp - pw] + b.data[:, None, None]

    def bwd(g):
        gp = np.zeros_like(yp)
        gp[:, ph:hp - ph, pw:wp - pw] = g
        win = sliding_window_view(gp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
        dcols = np.ascontiguousarray(win.transpose(1, 2, 0, 3, 4)).reshape(h * wdt, -1)
        dx = (dcols @ wmat.T).T.reshape(x.data.shape)
        dw = (x2.T @ dcols).reshape(w.data.shape)
        db = g.sum(axis=(1, 2))
        return dx, dw, db

    return _op(out, (x, w, b), bwd)


# ---------------------------------------------------------------------------
# Multi-head self-attention over the step axis
# ---------------------------------------------------------------------------

def mhsa(q, k, v, params, prefix, heads):
    """Scaled dot-product attention; q/k/v: [steps, d]."""
    d = q.shape[-1]
    if d % heads != 0:
        raise ValueError(f"width {d} not divisible by {heads} heads")
    dh = d // heads
    steps = q.shape[0]

    def proj(x, name):
        return dense(x, params[prefix + "." + name + ".w"], params[prefix + "." + name + ".b"])

    def split_heads(x):
        return x.reshape(steps, heads, dh).transpose(1, 0, 2)

    qh = split_heads(proj(q, "q"))
    kh = split_heads(proj(k, "k"))
    vh = split_heads(proj(v, "v"))
    scores = (qh @ kh.transpose(0, 2, 1)) * (1.0 / np.sqrt(dh))
    att = softmax(scores, axis=-1)
    ctx = (att @ vh).transpose(1, 0, 2).reshape(steps, d)
    return proj(ctx, "o")


def init_mhsa(tree, prefix, d):
    for name in ("q", "k", "v", "o"):
        tree.glorot(prefix + "." + name + ".w", (d, d))
        tree.zeros(prefix + "." + name + ".b", (d,))


def init_dense(tree, prefix, d_in, d_out):
    tree.glorot(prefix + ".w", (d_in, d_out))
    tree.zeros(prefix + ".b", (d_out,))


# ---------------------------------------------------------------------------
# Overlap-add for the differentiable synthesis path
# ---------------------------------------------------------------------------

def overlap_add(frames, hop):
    """frames: Tensor [n_frames, win] -> Tensor [(n-1)*hop + win]."""
    n, win = frames.data.shape
    out = np.zeros((n - 1) * hop + win, dtype=frames.data.dtype)
    for i in range(n):
        out[i * hop:i * hop + win] += frames.data[i]

    def bwd(g):
        return (sliding_window_view(g, win)[::hop].copy(),)

    return _op(out, (frames,), bwd)
