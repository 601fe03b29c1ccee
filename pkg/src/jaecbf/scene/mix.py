"""Scene mixing: reverberant near end + scaled echo + scaled noise."""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ..audio import AudioClip
from .room import RoomSpec, RirSet
from .signals import apply_nonlinearity, NONLINEARITIES

ACTIVITY_THRESH_DB = -40.0  # below per-component peak frame energy
HOP = 256

LABELS = ("s", "n", "f", "d")  # silence, near-only, far-only, double-talk


@dataclass
class SceneSpec:
    room: RoomSpec
    ser_db: float
    snr_db: float
    nonlinearity: str
    near_utterance: AudioClip
    far_utterance: AudioClip
    noise: AudioClip
    chunk_seconds: float = 4.0

    def __post_init__(self):
        if not -10.0 <= self.ser_db <= 10.0:
            raise ValueError(f"ser_db {self.ser_db} outside [-10, 10]")
        if not 0.0 <= self.snr_db <= 40.0:
            raise ValueError(f"snr_db {self.snr_db} outside [0, 40]")
        if self.chunk_seconds <= 0:
            raise ValueError("chunk_seconds must be positive")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity}")


@dataclass
class SceneAudio:
    mixture: AudioClip          # M channels
    far_end: AudioClip          # clean far-end, 1 channel
    target: AudioClip           # reverberant near end at the reference mic
    echo_ref: AudioClip         # scaled reverberant echo, M channels
    activity: list              # per-frame labels from LABELS
    near_all: AudioClip = None  # reverberant near end, all M channels
    noise_part: AudioClip = None  # scaled reverberant noise, M channels


def _convolve_multi(h, x, out_len):
    out = np.empty((h.shape[0], out_len))
    for m in range(h.shape[0]):
        out[m] = fftconvolve(h[m], x)[:out_len]
    return out


def frame_energies(x, hop=HOP):
    n_frames = int(np.ceil(len(x) / hop))
    padded = np.pad(x, (0, n_frames * hop - len(x)))
    return (padded.reshape(n_frames, hop) ** 2).sum(axis=1)


def active_mask(x, hop=HOP, thresh_db=ACTIVITY_THRESH_DB):
    e = frame_energies(x, hop)
    peak = e.max()
    if peak == 0.0:
        return np.zeros(len(e), dtype=bool)
    return e > peak * 10.0 ** (thresh_db / 10.0)


def _active_rms(x, hop=HOP):
    mask = active_mask(x, hop)
    if not mask.any():
        return 0.0
    n_frames = len(mask)
    padded = np.pad(x, (0, n_frames * hop - len(x)))
    frames = padded.reshape(n_frames, hop)
    return float(np.sqrt(np.mean(frames[mask] ** 2)))


def mix_scene(spec, rirs):
    """Convolve, scale to the requested SER/SNR, and sum the components."""
    room = spec.room
    fs = room.sample_rate
    for clip in (spec.near_utterance, spec.far_utterance, spec.noise):
        if clip.rate != fs:
            raise ValueError("sample-rate mismatch between clips and room")
    if rirs.h_near.shape[0] != room.mics:
        raise ValueError("RIR channel count does not match microphone count")

    n = int(round(spec.chunk_seconds * fs))
    s = spec.near_utterance.data[0]
    x = spec.far_utterance.data[0]
    v = spec.noise.data[0]
    if len(s) < n or len(x) < n or len(v) < n:
        raise ValueError("utterances shorter than chunk_seconds")
    s, x, v = s[:n], x[:n], v[:n]
    if np.max(np.abs(s)) == 0.0:
        raise ValueError("silent near-end utterance: SER undefined")

    s_multi = _convolve_multi(rirs.h_near, s, n)
    x_nl = apply_nonlinearity(AudioClip(x, fs), spec.nonlinearity).data[0]
    e_multi = _convolve_multi(rirs.h_loud, x_nl, n)
    v_multi = _convolve_multi(rirs.h_noise, v, n)

    rms_s = _active_rms(s_multi[0])
    rms_e = _active_rms(e_multi[0])
    if rms_e > 0.0:
        e_multi *= (rms_s / rms_e) * 10.0 ** (-spec.ser_db / 20.0)
    rms_v = _active_rms(v_multi[0])
    if rms_v > 0.0:
        v_multi *= (rms_s / rms_v) * 10.0 ** (-spec.snr_db / 20.0)

    mixture = s_multi + e_multi + v_multi

    near_act = active_mask(s_multi[0])
    far_act = active_mask(e_multi[0])
    labels = []
    for na, fa in zip(near_act, far_act):
        labels.append("d" if (na and fa) else "n" if na else "f" if fa else "s")

    return SceneAudio(
        mixture=AudioClip(mixture, fs),
        far_end=AudioClip(x, fs),
        target=AudioClip(s_multi[0], fs),
        echo_ref=AudioClip(e_multi, fs),
        activity=labels,
        near_all=AudioClip(s_multi, fs),
        noise_part=AudioClip(v_multi, fs),
    )


def encode_activity(labels):
    """Run-length encode, e.g. ['n','n','d'] -> '2n1d'."""
    if not labels:
        return ""
    out = []
    prev, count = labels[0], 1
    for lab in labels[1:]:
        if lab == prev:
            count += 1
        else:
            out.append(f"{count}{prev}")
            prev, count = lab, 1
    out.append(f"{count}{prev}")
    return "".join(out)


def decode_activity(rle):
    import re
    labels = []
    for count, lab in re.findall(r"(\d+)([snfd])", rle):
        labels.extend([lab] * int(count))
    return labels
