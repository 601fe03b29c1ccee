"""Multichannel time-domain audio container and WAV I/O."""

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile


@dataclass
class AudioClip:
    """Samples shaped [channels, length] at a fixed rate."""

    data: np.ndarray
    rate: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError(f"expected 1-D or 2-D samples, got shape {arr.shape}")
        self.data = arr

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def samples(self):
        return self.data.shape[1]

    @property
    def duration(self):
        return self.samples / self.rate

    def channel(self, i):
        return AudioClip(self.data[i:i + 1].copy(), self.rate)

    def rms(self):
        return float(np.sqrt(np.mean(self.data ** 2)))


def write_wav(path, clip):
    """IEEE float-32 WAV, interleaved multichannel."""
    samples = clip.data.T.astype(np.float32)
    if samples.shape[1] == 1:
        samples = samples[:, 0]
    wavfile.write(path, clip.rate, samples)


def read_wav(path):
    rate, samples = wavfile.read(path)
    if samples.dtype == np.int16:
        samples = samples.astype(np.float64) / 32768.0
    elif samples.dtype == np.int32:
        samples = samples.astype(np.float64) / 2147483648.0
    else:
        samples = samples.astype(np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    return AudioClip(samples.T, rate)
