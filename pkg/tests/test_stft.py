"""Analysis/synthesis: exact interior reconstruction, linearity, windowing."""

import numpy as np
import pytest

from jaecbf.audio import AudioClip
from jaecbf.stft import StftConfig, stft, istft, frame_signal, window_envelope
from jaecbf.model import ModelConfig
from jaecbf.model.network import istft_tensor
from jaecbf.nnkit import Tensor


def _random_clip(rng, seconds, channels=1):
    n = int(seconds * 16000)
    return AudioClip(rng.standard_normal((channels, n)), 16000)


def test_roundtrip_interior_exact(rng):
    cfg = StftConfig()
    for seconds in (1.0, 1.7, 3.2):
        clip = _random_clip(rng, seconds, channels=2)
        rec = istft(stft(clip, cfg), cfg, out_len=clip.samples)
        # interior: skip one window at each edge where overlap is partial
        w = cfg.win_length
        a = clip.data[:, w:-w]
        b = rec.data[:, w:-w]
        err = np.linalg.norm(a - b) / np.linalg.norm(a)
        assert err < 1e-10


def test_roundtrip_many_random_lengths():
    rng = np.random.default_rng(42)
    cfg = StftConfig()
    for _ in range(20):
        n = int(rng.uniform(1.0, 4.0) * 16000)
        clip = AudioClip(rng.standard_normal(n), 16000)
        rec = istft(stft(clip, cfg), cfg, out_len=n)
        w = cfg.win_length
        err = np.linalg.norm(clip.data[0, w:-w] - rec.data[0, w:-w])
        err /= np.linalg.norm(clip.data[0, w:-w])
        assert err < 1e-6


def test_linearity(rng):
    cfg = StftConfig()
    a = _random_clip(rng, 1.0)
    b = _random_clip(rng, 1.0)
    sa = stft(a, cfg).data
    sb = stft(b, cfg).data
    sab = stft(AudioClip(2.0 * a.data - 3.0 * b.data, 16000), cfg).data
    assert np.allclose(sab, 2.0 * sa - 3.0 * sb)


def test_frame_count_formula():
    cfg = StftConfig()
    for n in (512, 513, 768, 16000):
        assert cfg.num_frames(n) == 1 + (n - cfg.win_length) // cfg.hop
    with pytest.raises(ValueError):
        cfg.num_frames(511)


def test_window_cola_at_half_overlap():
    cfg = StftConfig()
    win = cfg.window()
    # periodic Hann at 50% overlap sums to exactly 1 on the overlap grid
    assert np.allclose(win[:cfg.hop] + win[cfg.hop:], 1.0)


def test_frame_signal_strides(rng):
    cfg = StftConfig()
    x = rng.standard_normal(2048)
    frames = frame_signal(x, cfg)
    assert frames.shape == (cfg.num_frames(2048), cfg.win_length)
    assert np.array_equal(frames[1], x[cfg.hop:cfg.hop + cfg.win_length])


def test_envelope_positive_on_interior():
    cfg = StftConfig()
    env = window_envelope(cfg, 8, 7 * cfg.hop + cfg.win_length)
    interior = env[cfg.win_length:-cfg.win_length]
    assert np.all(interior > 0.1)


def test_differentiable_synthesis_matches_numpy(rng):
    cfg = ModelConfig(mics=2, dtype="float64")
    clip = _random_clip(rng, 1.0)
    from jaecbf.model.network import stft_config
    scfg = stft_config(cfg)
    spec = stft(clip, scfg)
    sig = istft_tensor(Tensor(np.ascontiguousarray(spec.data[0].real)),
                       Tensor(np.ascontiguousarray(spec.data[0].imag)),
                       cfg, clip.samples)
    ref = istft(spec, scfg, out_len=clip.samples).data[0]
    assert np.max(np.abs(sig.data - ref)) < 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        StftConfig(win_length=512, hop=100)
    with pytest.raises(ValueError):
        StftConfig(fft_size=256, win_length=512)
