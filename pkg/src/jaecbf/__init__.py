"""Joint neural acoustic echo cancellation and beamforming."""

__version__ = "0.1.0"

from .audio import AudioClip, read_wav, write_wav
from .stft import StftConfig, Spectrogram, stft, istft

__all__ = ["AudioClip", "read_wav", "write_wav", "StftConfig", "Spectrogram",
           "stft", "istft", "__version__"]
