"""Recurrent beamformer over the stacked channels, with double-talk gating.

Speech and noise spectra are estimated with complex ratio filters, turned
into frame-wise rank-1 covariances, normalized, and fed to a causal GRU
that predicts per-bin complex combination weights.  A self-attentive gate
rescales the weights in frames dominated by far-end speech.
"""

import numpy as np

from .. import nnkit
from ..nnkit import Tensor, dense, mhsa, gru_forward, conv2d, concat, broadcast_to
from .features import attentive_corr_features, init_corr_stage, corr_feature_dim
from .aec import apply_crf


def estimate_speech_noise(t_re, t_im, params, cfg):
    """Stacked channels [C, N, F] -> speech and noise spectra, same shape."""
    c, n, f = t_re.shape
    if c != cfg.stacked_channels:
        raise ValueError(f"expected {cfg.stacked_channels} channels, got {c}")
    seq, per_bin = attentive_corr_features(t_re, t_im, params, "bf.corr", cfg.heads)
    h = gru_forward(seq, params, "bf.sn.gru")
    h = dense(h, params["bf.sn.fc.w"], params["bf.sn.fc.b"]).tanh()   # [N, W]

    # per-bin emission: broadcast the temporal summary over frequency and
    # convolve along the frequency axis together with the bin features
    planes_seq = broadcast_to(h.transpose(1, 0).reshape(cfg.width, 1, n),
                              (cfg.width, f, n))
    planes_bin = per_bin.transpose(2, 1, 0)                            # [p, F, N]
    x = concat([planes_bin, planes_seq], axis=0)
    x = conv2d(x, params["bf.sn.conv1.w"], params["bf.sn.conv1.b"],
               stride=(1, 1), padding=(1, 0)).tanh()
    taps = conv2d(x, params["bf.sn.conv2.w"], params["bf.sn.conv2.b"],
                  stride=(1, 1), padding=(1, 0))
    if cfg.crf_tanh_bound:
        taps = taps.tanh()
    # [2 filters, 2 re/im, C, taps, F, N] -> per filter [C, N, F, taps]
    t = taps.reshape(2, 2, c, cfg.taps, f, n).transpose(0, 1, 2, 5, 4, 3)
    crf_s_re, crf_s_im = t[0][0], t[0][1]
    crf_n_re, crf_n_im = t[1][0], t[1][1]
    s_re, s_im = apply_crf(t_re, t_im, crf_s_re, crf_s_im,
                           cfg.crf_half_time, cfg.crf_half_freq)
    nz_re, nz_im = apply_crf(t_re, t_im, crf_n_re, crf_n_im,
                             cfg.crf_half_time, cfg.crf_half_freq)
    return s_re, s_im, nz_re, nz_im


def covariance(s_re, s_im, params, prefix):
    """Frame-wise rank-1 channel covariance, flattened and layer-normalized.

    s_*: [C, N, F] -> (features [N, F, 2C^2], raw (phi_re, phi_im) [N, F, C, C]).
    """
    c, n, f = s_re.shape
    a_re = s_re.transpose(1, 2, 0)   # [N, F, C]
    a_im = s_im.transpose(1, 2, 0)
    r1 = a_re.reshape(n, f, c, 1)
    i1 = a_im.reshape(n, f, c, 1)
    r2 = a_re.reshape(n, f, 1, c)
    i2 = a_im.reshape(n, f, 1, c)
    phi_re = r1 * r2 + i1 * i2       # Re(s s^H)
    phi_im = i1 * r2 - r1 * i2       # Im(s s^H)
    flat = concat([phi_re.reshape(n, f, c * c), phi_im.reshape(n, f, c * c)], axis=-1)
    feats = nnkit.layer_norm(flat, params[prefix + ".gamma"], params[prefix + ".beta"])
    return feats, (phi_re, phi_im)


def predict_weights(feat_s, feat_n, params, cfg):
    """Causal per-bin weight prediction from the two covariance streams.

    feat_*: [N, F, 2C^2] -> (w_re, w_im) each [N, F, C].  The GRU runs over
    frames with parameters shared across bins, so w(n) only sees frames 0..n.
    """
    c = cfg.stacked_channels
    x = concat([feat_s, feat_n], axis=-1)            # [N, F, 4C^2]
    h = gru_forward(x, params, "bf.w.gru")           # [N, F, h]
    w = dense(h, params["bf.w.fc.w"], params["bf.w.fc.b"])
    return w[:, :, :c], w[:, :, c:]


def dtd_scale(w_re, w_im, params, cfg):
    """Attention-refined weights and a per-frame double-talk gate.

    Returns (refined_re, refined_im, scaled_re, scaled_im, p) with
    p: [N] in [0, 1]; scaled = p * refined.
    """
    n, f, c = w_re.shape
    q = cfg.dtd_bin_proj
    wflat = concat([w_re, w_im], axis=-1)            # [N, F, 2C]
    z_bin = dense(wflat, params["bf.dtd.binproj.w"], params["bf.dtd.binproj.b"]).tanh()
    z = dense(z_bin.reshape(n, f * q), params["bf.dtd.proj.w"],
              params["bf.dtd.proj.b"]).tanh()        # [N, W]
    att = mhsa(z, z, z, params, "bf.dtd.mhsa", cfg.heads)
    delta = dense(att, params["bf.dtd.unproj.w"], params["bf.dtd.unproj.b"])
    delta = dense(delta.reshape(n, f, q), params["bf.dtd.binunproj.w"],
                  params["bf.dtd.binunproj.b"])      # [N, F, 2C]
    ref_re = w_re + delta[:, :, :c]
    ref_im = w_im + delta[:, :, c:]
    g = gru_forward(z, params, "bf.dtd.gate_gru")
    p = dense(g, params["bf.dtd.gate.w"], params["bf.dtd.gate.b"]).sigmoid()  # [N, 1]
    gate = p.reshape(n, 1, 1)
    return ref_re, ref_im, ref_re * gate, ref_im * gate, p.reshape(n)


def apply_beamformer(w_re, w_im, t_re, t_im):
    """S(n,f) = w(n,f)^H y(n,f); w,y as [N, F, C] / [C, N, F]."""
    if w_re.shape[2] != t_re.shape[0]:
        raise ValueError("weight / channel count mismatch")
    y_re = t_re.transpose(1, 2, 0)
    y_im = t_im.transpose(1, 2, 0)
    out_re = (w_re * y_re + w_im * y_im).sum(axis=-1)
    out_im = (w_re * y_im - w_im * y_re).sum(axis=-1)
    return out_re, out_im   # [N, F]


def beamformer_forward(t_re, t_im, params, cfg, dtd=True):
    """Stacked channels -> (s_hat_re, s_hat_im [N, F], gate p [N])."""
    s_re, s_im, nz_re, nz_im = estimate_speech_noise(t_re, t_im, params, cfg)
    feat_s, _ = covariance(s_re, s_im, params, "bf.cov.s")
    feat_n, _ = covariance(nz_re, nz_im, params, "bf.cov.n")
    w_re, w_im = predict_weights(feat_s, feat_n, params, cfg)
    ref_re, ref_im, sc_re, sc_im, p = dtd_scale(w_re, w_im, params, cfg)
    if dtd:
        out_re, out_im = apply_beamformer(sc_re, sc_im, t_re, t_im)
    else:
        out_re, out_im = apply_beamformer(ref_re, ref_im, t_re, t_im)
    return out_re, out_im, p


def init_beamformer(tree, cfg):
    c = cfg.stacked_channels
    w, q = cfg.width, cfg.dtd_bin_proj
    init_corr_stage(tree, "bf.corr", c, cfg.bins, cfg.bin_proj, w)
    nnkit.init_gru(tree, "bf.sn.gru", w, w)
    nnkit.init_dense(tree, "bf.sn.fc", w, w)
    tree.glorot("bf.sn.conv1.w", (w, cfg.bin_proj + w, 3, 1))
    tree.zeros("bf.sn.conv1.b", (w,))
    # zero weights + identity bias: the speech estimate starts as an exact
    # channel pass-through and the noise estimate at zero
    tree.zeros("bf.sn.conv2.w", (4 * c * cfg.taps, w, 3, 1))
    b2 = np.zeros(4 * c * cfg.taps)
    center = cfg.taps // 2
    for ch in range(c):
        b2[ch * cfg.taps + center] = 1.0
    tree.add("bf.sn.conv2.b", b2)
    for name in ("bf.cov.s", "bf.cov.n"):
        tree.add(name + ".gamma", np.ones(2 * c * c))
        tree.zeros(name + ".beta", (2 * c * c,))
    nnkit.init_gru(tree, "bf.w.gru", 4 * c * c, cfg.bf_hidden)
    # zero weights + unit bias on the reference channel: the beamformer
    # starts as an exact reference-channel selector
    tree.zeros("bf.w.fc.w", (cfg.bf_hidden, 2 * c))
    tree.zeros("bf.w.fc.b", (2 * c,))
    tree["bf.w.fc.b"].data[0] = 1.0
    nnkit.init_dense(tree, "bf.dtd.binproj", 2 * c, q)
    nnkit.init_dense(tree, "bf.dtd.proj", cfg.bins * q, w)
    nnkit.init_mhsa(tree, "bf.dtd.mhsa", w)
    nnkit.init_dense(tree, "bf.dtd.unproj", w, cfg.bins * q)
    # zero refinement at init so the attention branch starts silent
    tree.zeros("bf.dtd.binunproj.w", (q, 2 * c))
    tree.zeros("bf.dtd.binunproj.b", (2 * c,))
    nnkit.init_gru(tree, "bf.dtd.gate_gru", w, w)
    nnkit.init_dense(tree, "bf.dtd.gate", w, 1)
    tree["bf.dtd.gate.b"].data[0] = 2.0  # open gate at init
