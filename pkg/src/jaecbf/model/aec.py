"""Multichannel neural echo suppression stage.

Two convolutional encoders (mixture planes; far-end planes plus attended
correlation features), a frequency-then-time recurrence with residual
connections, and two transposed-convolution decoders that emit complex
ratio filters for the mixture channels and the far-end channel.
"""

import numpy as np

from .. import nnkit
from ..nnkit import Tensor, dense, conv2d, conv2d_transpose, gru_forward, broadcast_to, concat
from .features import attentive_corr_features, init_corr_stage


# ---------------------------------------------------------------------------
# complex ratio filters
# ---------------------------------------------------------------------------

def apply_crf(s_re, s_im, crf_re, crf_im, half_time, half_freq=0):
    """Per-channel multiply-accumulate over neighbouring TF bins.

    s_*   : [C, N, F] spectra
    crf_* : [C, N, F, taps] with taps ordered time-major over the
            (2K+1) x (2L+1) neighbourhood; bins outside the plane are zero.
    """
    c, n, f = s_re.shape
    k, l = half_time, half_freq
    pad_spec = ((0, 0), (k, k), (l, l))
    sp_re = nnkit.pad(s_re, pad_spec)
    sp_im = nnkit.pad(s_im, pad_spec)
    out_re = None
    out_im = None
    t = 0
    for dt in range(-k, k + 1):
        for df in range(-l, l + 1):
            sh_re = sp_re[:, k + dt:k + dt + n, l + df:l + df + f]
            sh_im = sp_im[:, k + dt:k + dt + n, l + df:l + df + f]
            c_re = crf_re[:, :, :, t]
            c_im = crf_im[:, :, :, t]
            term_re = c_re * sh_re - c_im * sh_im
            term_im = c_re * sh_im + c_im * sh_re
            out_re = term_re if out_re is None else out_re + term_re
            out_im = term_im if out_im is None else out_im + term_im
            t += 1
    return out_re, out_im


def apply_crf_reference(s, crf, half_time, half_freq=0):
    """Brute-force loop oracle on complex numpy arrays; same contract."""
    c, n, f = s.shape
    out = np.zeros_like(s)
    for ch in range(c):
        for ni in range(n):
            for fi in range(f):
                t = 0
                acc = 0.0 + 0.0j
                for dt in range(-half_time, half_time + 1):
                    for df in range(-half_freq, half_freq + 1):
                        nn_, ff = ni + dt, fi + df
                        if 0 <= nn_ < n and 0 <= ff < f:
                            acc += crf[ch, ni, fi, t] * s[ch, nn_, ff]
                        t += 1
                out[ch, ni, fi] = acc
    return out


def stack_outputs(y_re, y_im, d_re, d_im, x_re, x_im):
    """Channel order: original (M+1), echo-suppressed mixture (M), aligned far end (1)."""
    return concat([y_re, d_re, x_re], axis=0), concat([y_im, d_im, x_im], axis=0)


def unstack_outputs(t_re, t_im, mics):
    m = mics
    return ((t_re[:m + 1], t_im[:m + 1]),
            (t_re[m + 1:2 * m + 1], t_im[m + 1:2 * m + 1]),
            (t_re[2 * m + 1:], t_im[2 * m + 1:]))


# ---------------------------------------------------------------------------
# encoder / recurrence / decoder
# ---------------------------------------------------------------------------

def _conv_stack(x, params, prefix, layers):
    for i in range(layers):
        x = conv2d(x, params[f"{prefix}.l{i}.w"], params[f"{prefix}.l{i}.b"],
                   stride=(2, 1), padding=(1, 1)).tanh()
    return x


def _deconv_stack(x, params, prefix, layers):
    for i in range(layers):
        last = i == layers - 1
        x = conv2d_transpose(x, params[f"{prefix}.l{i}.w"], params[f"{prefix}.l{i}.b"],
                             stride=(2, 1), padding=(1, 1), output_padding=(0, 0))
        if not last:
            x = x.tanh()
    return x


def ft_gru(u, params, prefix):
    """Frequency-scan GRU then time-scan GRU, each with FC + residual.

    u: [C, F, N] -> same shape.
    """
    c, f, n = u.shape
    seq_f = u.transpose(1, 2, 0)                       # [F, N, C]
    h_f = gru_forward(seq_f, params, prefix + ".f")
    z = seq_f + dense(h_f, params[prefix + ".f_fc.w"], params[prefix + ".f_fc.b"])
    seq_t = z.transpose(1, 0, 2)                       # [N, F, C]
    h_t = gru_forward(seq_t, params, prefix + ".t")
    out = seq_t + dense(h_t, params[prefix + ".t_fc.w"], params[prefix + ".t_fc.b"])
    return out.transpose(2, 1, 0)                      # [C, F, N]


def _to_planes(t_re, t_im):
    """[C, N, F] re/im -> conv planes [2C, F, N]."""
    return concat([t_re.transpose(0, 2, 1), t_im.transpose(0, 2, 1)], axis=0)


def _taps_from_planes(planes, channels, taps):
    """[2*channels*taps, F, N] -> (re, im) each [channels, N, F, taps]."""
    f, n = planes.shape[1], planes.shape[2]
    t = planes.reshape(2, channels, taps, f, n).transpose(0, 1, 4, 3, 2)
    return t[0], t[1]


def estimate_crfs(y_re, y_im, params, cfg):
    """Filter estimation for the echo-suppression stage.

    y_*: [M+1, N, F] with the far-end channel last.  Returns
    (crf_mix_re, crf_mix_im, crf_echo_re, crf_echo_im).
    """
    m = cfg.mics
    if y_re.shape[0] != m + 1:
        raise ValueError(f"expected {m + 1} channels, got {y_re.shape[0]}")
    n = y_re.shape[1]
    layers = len(cfg.conv_channels)

    feat_seq, _ = attentive_corr_features(y_re, y_im, params, "aec.corr", cfg.heads)

    mix_planes = _to_planes(y_re[:m], y_im[:m])
    enc_mix = _conv_stack(mix_planes, params, "aec.enc_mix", layers)

    far_feat = dense(feat_seq, params["aec.farfeat.w"], params["aec.farfeat.b"]).tanh()
    far_planes = far_feat.transpose(1, 0).reshape(cfg.far_planes, 1, n)
    far_planes = broadcast_to(far_planes, (cfg.far_planes, cfg.bins, n))
    far_in = concat([_to_planes(y_re[m:], y_im[m:]), far_planes], axis=0)
    enc_far = _conv_stack(far_in, params, "aec.enc_far", layers)

    u = ft_gru(enc_mix + enc_far, params, "aec.ftgru")

    mix_taps = _deconv_stack(u, params, "aec.dec_mix", layers)
    echo_taps = _deconv_stack(u, params, "aec.dec_echo", layers)
    if cfg.crf_tanh_bound:
        mix_taps = mix_taps.tanh()
        echo_taps = echo_taps.tanh()
    crf_mix = _taps_from_planes(mix_taps, m, cfg.taps)
    crf_echo = _taps_from_planes(echo_taps, 1, cfg.taps)
    return crf_mix + crf_echo


def aec_forward(y_re, y_im, params, cfg):
    """Full echo-suppression stage: Y [M+1] -> stacked channels [2M+2]."""
    m = cfg.mics
    cm_re, cm_im, ce_re, ce_im = estimate_crfs(y_re, y_im, params, cfg)
    d_re, d_im = apply_crf(y_re[:m], y_im[:m], cm_re, cm_im,
                           cfg.crf_half_time, cfg.crf_half_freq)
    x_re, x_im = apply_crf(y_re[m:], y_im[m:], ce_re, ce_im,
                           cfg.crf_half_time, cfg.crf_half_freq)
    return stack_outputs(y_re, y_im, d_re, d_im, x_re, x_im)


def init_aec(tree, cfg):
    m = cfg.mics
    ch = cfg.conv_channels
    w, taps = cfg.width, cfg.taps
    init_corr_stage(tree, "aec.corr", m + 1, cfg.bins, cfg.bin_proj, w)
    tree.glorot("aec.farfeat.w", (w, cfg.far_planes))
    tree.zeros("aec.farfeat.b", (cfg.far_planes,))

    def conv_chain(prefix, c_in, cs):
        prev = c_in
        for i, c in enumerate(cs):
            tree.glorot(f"{prefix}.l{i}.w", (c, prev, 3, 3))
            tree.zeros(f"{prefix}.l{i}.b", (c,))
            prev = c

    def deconv_chain(prefix, cs, c_out, center_bias):
        chain = list(cs[::-1][1:]) + [c_out]
        prev = cs[-1]
        for i, c in enumerate(chain):
            last = i == len(chain) - 1
            b = np.zeros(c)
            if last:
                # zero weights + center-tap bias: the stage starts as an
                # exact pass-through and only departs from it by training
                tree.zeros(f"{prefix}.l{i}.w", (prev, c, 3, 3))
                if center_bias is not None:
                    b[center_bias] = 1.0
            else:
                tree.glorot(f"{prefix}.l{i}.w", (prev, c, 3, 3))
            tree.add(f"{prefix}.l{i}.b", b)
            prev = c

    conv_chain("aec.enc_mix", 2 * m, ch)
    conv_chain("aec.enc_far", 2 + cfg.far_planes, ch)
    c3 = ch[-1]
    nnkit.init_gru(tree, "aec.ftgru.f", c3, c3)
    tree.glorot("aec.ftgru.f_fc.w", (c3, c3))
    tree.zeros("aec.ftgru.f_fc.b", (c3,))
    nnkit.init_gru(tree, "aec.ftgru.t", c3, c3)
    tree.glorot("aec.ftgru.t_fc.w", (c3, c3))
    tree.zeros("aec.ftgru.t_fc.b", (c3,))

    center = cfg.taps // 2
    # start the filters at identity so the stage begins as a pass-through
    mix_center = [c * taps + center for c in range(m)]
    deconv_chain("aec.dec_mix", ch, 2 * m * taps, mix_center)
    deconv_chain("aec.dec_echo", ch, 2 * taps, [center])
