"""Short-time Fourier analysis and synthesis.

512-point FFT, 32 ms Hann window, 16 ms hop at 16 kHz by default.  The
Hann window at 50% overlap satisfies the constant-overlap-add condition,
so `istft(stft(x))` reconstructs the interior of `x` exactly up to float
rounding.
"""

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    win_length: int = 512
    hop: int = 256
    sample_rate: int = 16000

    def __post_init__(self):
        if self.win_length % self.hop != 0:
            raise ValueError("hop must divide win_length")
        if self.win_length > self.fft_size:
            raise ValueError("window longer than FFT size")

    @property
    def bins(self):
        return self.fft_size // 2 + 1

    def window(self):
        # periodic Hann: exact COLA at 50% overlap
        n = np.arange(self.win_length)
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / self.win_length))

    def num_frames(self, n_samples):
        if n_samples < self.win_length:
            raise ValueError(f"clip of {n_samples} samples shorter than one window")
        return 1 + (n_samples - self.win_length) // self.hop


@dataclass
class Spectrogram:
    """Complex array [channels, frames, bins]."""

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ValueError(f"expected [channels, frames, bins], got {arr.shape}")
        if arr.shape[-1] != self.config.bins:
            raise ValueError(f"bin count {arr.shape[-1]} != {self.config.bins}")
        self.data = arr

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def frames(self):
        return self.data.shape[1]

    @property
    def bins(self):
        return self.data.shape[2]


def frame_signal(x, cfg):
    """[T] -> [frames, win_length] strided view copies at hop intervals."""
    n = cfg.num_frames(len(x))
    idx = np.arange(cfg.win_length)[None, :] + cfg.hop * np.arange(n)[:, None]
    return x[idx]


def stft(clip, cfg=None):
    cfg = cfg or StftConfig()
    if clip.rate != cfg.sample_rate:
        raise ValueError(f"clip rate {clip.rate} != config rate {cfg.sample_rate}")
    win = cfg.window()
    specs = []
    for ch in clip.data:
        frames = frame_signal(ch, cfg) * win
        specs.append(np.fft.rfft(frames, n=cfg.fft_size, axis=-1))
    return Spectrogram(np.stack(specs), cfg)


def window_envelope(cfg, n_frames, length):
    """Summed squared analysis window over the overlap-add grid."""
    win_sq = cfg.window() ** 2
    env = np.zeros(length)
    for i in range(n_frames):
        start = i * cfg.hop
        env[start:start + cfg.win_length] += win_sq[:max(0, min(cfg.win_length, length - start))]
    return env


def istft(spec, cfg=None, out_len=None):
    cfg = cfg or spec.config
    if cfg != spec.config:
        raise ValueError("spectrogram was produced with a different config")
    n = spec.frames
    full_len = (n - 1) * cfg.hop + cfg.win_length
    if out_len is None:
        out_len = full_len
    win = cfg.window()
    out = np.zeros((spec.channels, full_len))
    for c in range(spec.channels):
        frames = np.fft.irfft(spec.data[c], n=cfg.fft_size, axis=-1)[:, :cfg.win_length]
        frames = frames * win
        for i in range(n):
            out[c, i * cfg.hop:i * cfg.hop + cfg.win_length] += frames[i]
    env = window_envelope(cfg, n, full_len)
    out /= np.maximum(env, 1e-12)
    if out_len <= full_len:
        out = out[:, :out_len]
    else:
        out = np.pad(out, ((0, 0), (0, out_len - full_len)))
    return AudioClip(out, cfg.sample_rate)
