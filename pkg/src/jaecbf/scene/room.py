"""Shoebox room geometry and image-source impulse responses."""

from dataclasses import dataclass, field

import numpy as np

SINC_HALF = 40  # 81-tap windowed-sinc fractional delay


def linear_array(center, mics=8, aperture=0.26, axis=0):
    """Mic positions for a linear array of the given aperture, meters."""
    center = np.asarray(center, dtype=np.float64)
    if mics == 1:
        return [center.copy()]
    offsets = np.linspace(-aperture / 2.0, aperture / 2.0, mics)
    out = []
    for o in offsets:
        p = center.copy()
        p[axis] += o
        out.append(p)
    return out


@dataclass
class RoomSpec:
    dimensions: np.ndarray
    rt60: float
    source_pos: np.ndarray
    loudspeaker_pos: np.ndarray
    noise_pos: np.ndarray
    mic_positions: list
    sample_rate: int = 16000
    sound_speed: float = 343.0

    def __post_init__(self):
        self.dimensions = np.asarray(self.dimensions, dtype=np.float64)
        self.source_pos = np.asarray(self.source_pos, dtype=np.float64)
        self.loudspeaker_pos = np.asarray(self.loudspeaker_pos, dtype=np.float64)
        self.noise_pos = np.asarray(self.noise_pos, dtype=np.float64)
        self.mic_positions = [np.asarray(p, dtype=np.float64) for p in self.mic_positions]
        if not 0.0 <= self.rt60 <= 0.6:
            raise ValueError(f"rt60 {self.rt60} outside [0, 0.6]")
        if len(self.mic_positions) < 1:
            raise ValueError("need at least one microphone")
        for name, p in [("source", self.source_pos), ("loudspeaker", self.loudspeaker_pos),
                        ("noise", self.noise_pos)] + [("mic", m) for m in self.mic_positions]:
            self._check_inside(name, p)

    def _check_inside(self, name, p):
        if np.any(p <= 0.0) or np.any(p >= self.dimensions):
            raise ValueError(f"{name} position {p} not strictly inside room {self.dimensions}")

    @property
    def mics(self):
        return len(self.mic_positions)


@dataclass
class RirSet:
    h_near: np.ndarray
    h_loud: np.ndarray
    h_noise: np.ndarray
    sample_rate: int = 16000


def eyring_reflection(dimensions, rt60):
    """Uniform wall reflection coefficient realizing the target RT60."""
    if rt60 <= 0.0:
        return 0.0
    lx, ly, lz = dimensions
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 1.0 - np.exp(-0.161 * volume / (surface * rt60))
    alpha = min(alpha, 0.9999)
    return np.sqrt(1.0 - alpha)


def _frac_delay_taps(frac):
    """81-tap Hann-windowed sinc at fractional offsets; frac shape [n]."""
    k = np.arange(-SINC_HALF, SINC_HALF + 1)[None, :]
    t = k - frac[:, None]
    w = 0.5 * (1.0 + np.cos(np.pi * t / (SINC_HALF + 1)))
    w[np.abs(t) > SINC_HALF + 1] = 0.0
    return np.sinc(t) * w


def _enumerate_images(room, source_pos, max_order):
    """Image positions [n, 3] and reflection counts [n] for a shoebox."""
    src = np.asarray(source_pos, dtype=np.float64)
    dims = room.dimensions
    per_axis = []
    for u in range(3):
        coords, orders = [], []
        for p in (0, 1):
            n_max = (max_order + p) // 2
            for n in range(-n_max, n_max + 1):
                order = abs(2 * n - p)
                if order > max_order:
                    continue
                coords.append((1 - 2 * p) * src[u] + 2.0 * n * dims[u])
                orders.append(order)
        per_axis.append((np.array(coords), np.array(orders)))
    cx, ox = per_axis[0]
    cy, oy = per_axis[1]
    cz, oz = per_axis[2]
    gx, gy, gz = np.meshgrid(np.arange(len(cx)), np.arange(len(cy)), np.arange(len(cz)),
                             indexing="ij")
    total = ox[gx] + oy[gy] + oz[gz]
    keep = total <= max_order
    pos = np.stack([cx[gx][keep], cy[gy][keep], cz[gz][keep]], axis=1)
    return pos, total[keep]


def generate_rir(room, source_pos, max_order=30, trunc_db=60.0):
    """Image-source RIR for every microphone; amplitude beta^r / d."""
    room._check_inside("source", np.asarray(source_pos, dtype=np.float64))
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    fs = room.sample_rate
    beta = eyring_reflection(room.dimensions, room.rt60)
    if beta == 0.0:
        max_order = 0
    pos, refl = _enumerate_images(room, source_pos, max_order)
    gains_refl = beta ** refl if max_order > 0 else np.ones_like(refl, dtype=np.float64)

    length = int(round((room.rt60 + 0.05) * fs))
    mics = np.stack(room.mic_positions)
    # make sure the direct path and interpolator always fit
    d_direct_max = np.max(np.linalg.norm(mics - np.asarray(source_pos), axis=1))
    length = max(length, int(np.ceil(d_direct_max / room.sound_speed * fs)) + 2 * SINC_HALF + 2)

    h = np.zeros((room.mics, length))
    floor = 10.0 ** (-trunc_db / 20.0)
    for m, mic in enumerate(mics):
        d = np.linalg.norm(pos - mic, axis=1)
        d = np.maximum(d, 1e-3)
        amp = gains_refl / d
        d_direct = np.linalg.norm(np.asarray(source_pos) - mic)
        keep = amp >= floor / max(d_direct, 1e-3)
        delay = d[keep] / room.sound_speed * fs
        amp_k = amp[keep]
        n0 = np.round(delay).astype(int)
        inside = n0 < length + SINC_HALF
        n0, delay, amp_k = n0[inside], delay[inside], amp_k[inside]
        taps = _frac_delay_taps(delay - n0) * amp_k[:, None]
        idx = n0[:, None] + np.arange(-SINC_HALF, SINC_HALF + 1)[None, :]
        valid = (idx >= 0) & (idx < length)
        np.add.at(h[m], idx[valid], taps[valid])
    return h


def measure_rt60(h, fs, fit_range=(-5.0, -35.0)):
    """RT60 via Schroeder backward integration and a line fit in dB.

    Independent check routine: fits the energy-decay curve between the two
    dB levels in `fit_range` and extrapolates to -60 dB.
    """
    h = np.asarray(h, dtype=np.float64)
    energy = h * h
    edc = np.cumsum(energy[::-1])[::-1]
    edc = edc / edc[0]
    db = 10.0 * np.log10(np.maximum(edc, 1e-30))
    hi, lo = fit_range
    idx = np.where((db <= hi) & (db >= lo))[0]
    if len(idx) < 2:
        raise ValueError("decay range too short for an RT60 fit")
    t = idx / fs
    slope, _ = np.polyfit(t, db[idx], 1)
    if slope >= 0:
        raise ValueError("non-decaying energy curve")
    return -60.0 / slope
