"""Classical anchors: block-frequency-domain adaptive echo canceller and a
delay-and-sum beamformer."""

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .scene.room import SINC_HALF, _frac_delay_taps


@dataclass
class PbfdafConfig:
    block: int = 256
    partitions: int = 16      # 16 * 256 samples = 256 ms echo tail
    step_size: float = 0.5
    regularization: float = None  # default 1e-6 * mean far-end power

    def __post_init__(self):
        if not 0.0 < self.step_size < 2.0:
            raise ValueError("step size must lie in (0, 2)")
        if self.partitions < 1:
            raise ValueError("need at least one partition")


def pbfdaf_cancel(mic, far_end, cfg=None, return_filter=False):
    """Partitioned-block frequency-domain NLMS echo canceller.

    Overlap-save with `block`-sized hops and 2*block FFTs.  Adaptation
    freezes on blocks where the error power exceeds the microphone power
    (double-talk guard) and on silent far-end blocks.  Returns
    (echo_estimate, error_signal) as mono clips.
    """
    cfg = cfg or PbfdafConfig()
    if mic.samples != far_end.samples:
        raise ValueError("mic and far-end lengths differ")
    d = mic.data[0]
    x = far_end.data[0]
    n = cfg.block
    fft = 2 * n
    n_blocks = len(x) // n
    delta = cfg.regularization
    if delta is None:
        delta = 1e-6 * max(np.mean(x * x), 1e-12)

    w = np.zeros((cfg.partitions, n + 1), dtype=np.complex128)
    x_hist = np.zeros((cfg.partitions, n + 1), dtype=np.complex128)
    power = np.zeros(n + 1)
    xpad = np.concatenate([np.zeros(n), x])
    est = np.zeros(n_blocks * n)
    err = np.zeros(n_blocks * n)

    for i in range(n_blocks):
        xb = xpad[i * n:i * n + fft]
        xf = np.fft.rfft(xb)
        x_hist = np.roll(x_hist, 1, axis=0)
        x_hist[0] = xf
        y = np.real(np.fft.irfft((x_hist * w).sum(axis=0)))[n:]
        db = d[i * n:(i + 1) * n]
        eb = db - y
        est[i * n:(i + 1) * n] = y
        err[i * n:(i + 1) * n] = eb

        far_power = float(np.mean(xb * xb))
        if far_power <= 1e-12:
            continue
        if np.mean(eb * eb) > np.mean(db * db):
            continue  # likely double talk: freeze
        power = 0.9 * power + 0.1 * np.abs(xf) ** 2
        ef = np.fft.rfft(np.concatenate([np.zeros(n), eb]))
        grad = np.conj(x_hist) * (ef / (cfg.partitions * power + delta))
        # gradient constraint: keep each partition's response causal in-block
        for p in range(cfg.partitions):
            gt = np.real(np.fft.irfft(grad[p]))
            gt[n:] = 0.0
            w[p] += cfg.step_size * np.fft.rfft(gt)

    pad = len(d) - n_blocks * n
    est_full = np.concatenate([est, np.zeros(pad)])
    err_full = np.concatenate([err, d[n_blocks * n:]])
    out = AudioClip(est_full, mic.rate), AudioClip(err_full, mic.rate)
    if return_filter:
        # first partition's time-domain impulse response, for diagnostics
        return out + (np.real(np.fft.irfft(w[0]))[:n],)
    return out


def das_beamform(mixture, steering_delays):
    """Fractional-delay align the channels and average.

    steering_delays: samples by which each channel lags the reference;
    each channel is advanced by its delay before averaging.
    """
    delays = np.asarray(steering_delays, dtype=np.float64)
    if len(delays) != mixture.channels:
        raise ValueError("one steering delay per channel required")
    if np.any(np.abs(delays) > SINC_HALF):
        raise ValueError(f"steering delays must lie within +-{SINC_HALF} samples")
    n = mixture.samples
    out = np.zeros(n)
    for m in range(mixture.channels):
        taps = _frac_delay_taps(np.array([delays[m] - round(delays[m])]))[0]
        shifted = np.convolve(mixture.data[m], taps)[SINC_HALF:SINC_HALF + n]
        shift = int(round(delays[m]))
        if shift > 0:
            shifted = np.concatenate([shifted[shift:], np.zeros(shift)])
        elif shift < 0:
            shifted = np.concatenate([np.zeros(-shift), shifted[:shift]])
        out += shifted
    return AudioClip(out / mixture.channels, mixture.rate)
