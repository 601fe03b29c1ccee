"""End-to-end model: spectra in, enhanced time-domain speech out."""

import numpy as np

from ..audio import AudioClip
from ..stft import StftConfig, Spectrogram, stft, window_envelope
from ..nnkit import Tensor, ParamTree, overlap_add
from .config import ModelConfig
from .aec import aec_forward, init_aec
from .beamformer import beamformer_forward, init_beamformer


def build_params(cfg, seed=0):
    tree = ParamTree(seed=seed, dtype=cfg.np_dtype)
    init_aec(tree, cfg)
    init_beamformer(tree, cfg)
    return tree


def stft_config(cfg):
    return StftConfig(fft_size=cfg.fft_size, win_length=cfg.fft_size, hop=cfg.hop)


# ---------------------------------------------------------------------------
# differentiable synthesis: one-sided spectrum -> time signal
# ---------------------------------------------------------------------------

_synth_cache = {}


def _synthesis_matrices(fft_size, dtype):
    key = (fft_size, np.dtype(dtype).name)
    if key not in _synth_cache:
        bins = fft_size // 2 + 1
        t = np.arange(fft_size)
        f = np.arange(bins)
        scale = np.full(bins, 2.0)
        scale[0] = 1.0
        scale[-1] = 1.0
        ang = 2.0 * np.pi * np.outer(f, t) / fft_size
        c = (scale[:, None] * np.cos(ang)) / fft_size
        s = (-scale[:, None] * np.sin(ang)) / fft_size
        _synth_cache[key] = (c.astype(dtype), s.astype(dtype))
    return _synth_cache[key]


def istft_tensor(s_re, s_im, cfg, out_len):
    """Differentiable inverse STFT for a single channel; s_*: [N, F]."""
    scfg = stft_config(cfg)
    n = s_re.shape[0]
    cmat, smat = _synthesis_matrices(cfg.fft_size, s_re.dtype)
    frames = s_re @ cmat + s_im @ smat          # [N, fft_size]
    win = scfg.window().astype(str(s_re.dtype))
    frames = frames[:, :scfg.win_length] * win
    full = overlap_add(frames, scfg.hop)
    env = np.maximum(window_envelope(scfg, n, full.shape[0]), 1e-12).astype(str(s_re.dtype))
    sig = full / env
    if out_len > sig.shape[0]:
        from ..nnkit import pad
        return pad(sig, ((0, out_len - sig.shape[0]),))
    return sig[:out_len]


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def spectra_to_tensors(spec, dtype):
    data = spec.data
    return (Tensor(np.ascontiguousarray(data.real).astype(dtype)),
            Tensor(np.ascontiguousarray(data.imag).astype(dtype)))


def model_forward(y_re, y_im, params, cfg, dtd=True):
    """Y [M+1, N, F] re/im -> (s_hat_re, s_hat_im [N, F], gate p [N])."""
    t_re, t_im = aec_forward(y_re, y_im, params, cfg)
    return beamformer_forward(t_re, t_im, params, cfg, dtd=dtd)


def enhance_to_tensor(mixture, far_end, params, cfg, dtd=True):
    """Differentiable chain ending in a time-domain Tensor."""
    if mixture.rate != far_end.rate:
        raise ValueError("sample-rate mismatch between mixture and far end")
    if mixture.channels != cfg.mics:
        raise ValueError(f"model expects {cfg.mics} mics, got {mixture.channels}")
    scfg = stft_config(cfg)
    stacked = AudioClip(np.concatenate([mixture.data, far_end.data], axis=0),
                        mixture.rate)
    spec = stft(stacked, scfg)
    y_re, y_im = spectra_to_tensors(spec, cfg.np_dtype)
    s_re, s_im, p = model_forward(y_re, y_im, params, cfg, dtd=dtd)
    sig = istft_tensor(s_re, s_im, cfg, mixture.samples)
    return sig, (s_re, s_im), p


def enhance(mixture, far_end, params, cfg, dtd=True):
    """Full chain, numpy out: returns a single-channel AudioClip."""
    sig, _, _ = enhance_to_tensor(mixture, far_end, params, cfg, dtd=dtd)
    return AudioClip(sig.data.astype(np.float64), mixture.rate)
