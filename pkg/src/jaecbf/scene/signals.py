"""Loudspeaker nonlinearities and synthetic source material."""

import numpy as np

from ..audio import AudioClip

NONLINEARITIES = ("none", "clip", "sigmoid")


def apply_nonlinearity(clip, kind):
    """Memoryless loudspeaker distortion applied to a mono clip."""
    if clip.channels != 1:
        raise ValueError("nonlinearity expects a single-channel clip")
    if clip.samples == 0:
        raise ValueError("empty clip")
    x = clip.data[0]
    if kind == "none":
        return AudioClip(x.copy(), clip.rate)
    if kind == "clip":
        thresh = 0.8 * np.max(np.abs(x))
        return AudioClip(np.clip(x, -thresh, thresh), clip.rate)
    if kind == "sigmoid":
        peak = np.max(np.abs(x))
        if peak == 0.0:
            return AudioClip(x.copy(), clip.rate)
        b = 1.5 * x - 0.3 * x * x
        a = np.where(b > 0.0, 4.0, 0.5)
        gamma = 2.0 * peak
        y = gamma * (2.0 / (1.0 + np.exp(-a * b)) - 1.0)
        rms_in = np.sqrt(np.mean(x * x))
        rms_out = np.sqrt(np.mean(y * y))
        if rms_out > 0.0:
            y = y * (rms_in / rms_out)
        return AudioClip(y, clip.rate)
    raise ValueError(f"unknown nonlinearity kind: {kind}")


def synth_utterance(rng, seconds, rate=16000, f0_range=(90.0, 240.0)):
    """Speech-like harmonic bursts with pauses; peak-normalized to 0.5.

    Stands in for real corpora: voiced segments with a wandering pitch and
    a rolled-off harmonic stack, separated by short pauses so double-talk
    and single-talk regions both occur when two utterances overlap.
    """
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    out = np.zeros(n)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.15, 0.5) * rate)
        seg = min(seg, n - pos)
        if rng.uniform() < 0.75:  # voiced burst
            f0 = rng.uniform(*f0_range)
            drift = rng.uniform(-20.0, 20.0)
            tt = t[pos:pos + seg] - t[pos]
            phase = 2.0 * np.pi * (f0 * tt + 0.5 * drift * tt * tt / max(tt[-1], 1e-6))
            sig = np.zeros(seg)
            for k in range(1, 9):
                sig += (1.0 / k) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
            # syllable-rate amplitude modulation + onset/offset ramp
            env = 0.6 + 0.4 * np.sin(2.0 * np.pi * rng.uniform(2.0, 6.0) * tt)
            ramp = np.minimum(1.0, np.minimum(tt, tt[-1] - tt) / 0.02)
            sig *= env * ramp
            sig += 0.02 * rng.standard_normal(seg)
            out[pos:pos + seg] = sig
        pos += seg
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= 0.5 / peak
    return AudioClip(out, rate)


def synth_noise(rng, seconds, rate=16000):
    """Pink-ish stationary noise."""
    n = int(round(seconds * rate))
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.maximum(np.fft.rfftfreq(n, 1.0 / rate), 1.0)
    spec /= np.sqrt(freqs)
    noise = np.fft.irfft(spec, n=n)
    noise /= np.max(np.abs(noise))
    return AudioClip(0.3 * noise, rate)
