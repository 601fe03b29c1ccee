"""Model hyperparameters; toy defaults keep the network under 100k weights."""

from dataclasses import dataclass, asdict

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    mics: int = 2
    fft_size: int = 512
    hop: int = 256
    width: int = 16            # shared feature width for MHSA/GRU stages
    heads: int = 4
    conv_channels: tuple = (6, 12, 16)
    bin_proj: int = 4          # shared per-bin correlation projection
    far_planes: int = 6        # attention features broadcast into the far encoder
    crf_half_time: int = 1     # K: taps span n-K .. n+K
    crf_half_freq: int = 0     # L: taps span f-L .. f+L
    bf_hidden: int = 16        # weight-prediction GRU width
    dtd_bin_proj: int = 2
    crf_tanh_bound: bool = False  # bound estimated filter taps with tanh
    dtype: str = "float32"

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ValueError("width must be divisible by heads")
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))

    @property
    def bins(self):
        return self.fft_size // 2 + 1

    @property
    def stacked_channels(self):
        # mixture + far end, echo-suppressed mixture, aligned far end
        return 2 * self.mics + 2

    @property
    def taps(self):
        return (2 * self.crf_half_time + 1) * (2 * self.crf_half_freq + 1)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self):
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["conv_channels"] = tuple(d.get("conv_channels", (6, 12, 16)))
        return cls(**d)
