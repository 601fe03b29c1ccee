"""Cross-channel correlation features with attention over time.

Per TF bin the channel outer product Y Y^H is Hermitian, so the feature
vector keeps the diagonal (real) plus real and imaginary parts of the
upper triangle: C^2 reals per bin for C channels.
"""

import numpy as np

from .. import nnkit
from ..nnkit import Tensor, dense, mhsa, stack, broadcast_to


def corr_feature_dim(channels):
    return channels * channels


def corr_features_per_bin(y_re, y_im):
    """[C, N, F] re/im -> Tensor [N, F, C^2].

    Order: diagonal powers, then upper-triangle real parts, then
    upper-triangle imaginary parts (R[a,b] = Y_a * conj(Y_b), a < b).
    """
    c = y_re.shape[0]
    parts = []
    for a in range(c):
        parts.append(y_re[a].square() + y_im[a].square())
    for a in range(c):
        for b in range(a + 1, c):
            parts.append(y_re[a] * y_re[b] + y_im[a] * y_im[b])
    for a in range(c):
        for b in range(a + 1, c):
            parts.append(y_im[a] * y_re[b] - y_re[a] * y_im[b])
    return stack(parts, axis=-1)  # [N, F, C^2]


def corr_matrix(y):
    """Plain numpy R(n,f) = y y^H per bin; y: complex [C, N, F] -> [N, F, C, C]."""
    yt = np.moveaxis(y, 0, -1)  # [N, F, C]
    return yt[..., :, None] * np.conj(yt[..., None, :])


def flatten_corr(y):
    """Numpy reference flattening matching `corr_features_per_bin`."""
    c = y.shape[0]
    r = corr_matrix(y)
    cols = [np.real(r[..., a, a]) for a in range(c)]
    cols += [np.real(r[..., a, b]) for a in range(c) for b in range(a + 1, c)]
    cols += [np.imag(r[..., a, b]) for a in range(c) for b in range(a + 1, c)]
    feat = np.stack(cols, axis=-1)  # [N, F, C^2]
    return feat.reshape(feat.shape[0], -1)  # [N, F*C^2]


def attentive_corr_features(y_re, y_im, params, prefix, heads):
    """Correlation features -> projected sequence [N, width] after MHSA.

    Returns (sequence, per_bin) where per_bin is the shared low-rank bin
    projection [N, F, bin_proj] reused by downstream per-bin stages.
    """
    feat = corr_features_per_bin(y_re, y_im)       # [N, F, C^2]
    per_bin = dense(feat, params[prefix + ".binproj.w"],
                    params[prefix + ".binproj.b"]).tanh()
    n, f, p = per_bin.shape
    flat = per_bin.reshape(n, f * p)
    seq = dense(flat, params[prefix + ".proj.w"], params[prefix + ".proj.b"]).tanh()
    seq = mhsa(seq, seq, seq, params, prefix + ".mhsa", heads)
    return seq, per_bin


def init_corr_stage(tree, prefix, channels, bins, bin_proj, width):
    tree.glorot(prefix + ".binproj.w", (corr_feature_dim(channels), bin_proj))
    tree.zeros(prefix + ".binproj.b", (bin_proj,))
    tree.glorot(prefix + ".proj.w", (bins * bin_proj, width))
    tree.zeros(prefix + ".proj.b", (width,))
    nnkit.init_mhsa(tree, prefix + ".mhsa", width)
