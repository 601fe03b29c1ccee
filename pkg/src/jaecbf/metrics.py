"""Objective evaluation over a scene manifest: Si-SNR, SDR, ERLE."""

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, read_wav
from .baseline import pbfdaf_cancel, das_beamform
from .scene.mix import HOP, decode_activity
from .train import si_snr_value, SI_SNR_CAP_DB

ERLE_CAP_DB = 80.0

SYSTEMS = ("none", "pbfdaf", "das", "jaecbf", "jaecbf_dtd", "pbfdaf+jaecbf")


def si_snr(est, ref):
    """Scale-invariant SNR in dB, capped at +-60."""
    return si_snr_value(est, ref)


def sdr(est, ref, cap=SI_SNR_CAP_DB):
    """Plain energy-ratio SDR in dB, capped at +-cap; scale sensitive."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError("length mismatch between estimate and reference")
    den = np.sum((ref - est) ** 2)
    num = np.sum(ref * ref)
    if num <= 0.0:
        raise ValueError("all-zero reference")
    if den <= 0.0:
        return cap
    return float(np.clip(10.0 * np.log10(num / den), -cap, cap))


def erle(mic_ref, est, activity):
    """ERLE in dB over far-end-only frames; None when no such frames exist.

    activity: per-frame labels from the simulator (frame hop 256).
    """
    if activity is None or len(activity) == 0:
        raise ValueError("ERLE needs the simulator's per-frame activity labels")
    d = mic_ref.data[0] if isinstance(mic_ref, AudioClip) else np.asarray(mic_ref)
    s = est.data[0] if isinstance(est, AudioClip) else np.asarray(est)
    num = den = 0.0
    any_far = False
    for i, lab in enumerate(activity):
        if lab != "f":
            continue
        any_far = True
        sl = slice(i * HOP, (i + 1) * HOP)
        num += float(np.sum(d[sl] ** 2))
        den += float(np.sum(s[sl] ** 2))
    if not any_far:
        return None
    if den <= num * 10.0 ** (-ERLE_CAP_DB / 10.0):
        return ERLE_CAP_DB
    return float(min(10.0 * np.log10(max(num, 1e-30) / den), ERLE_CAP_DB))


# ---------------------------------------------------------------------------
# per-scene processing chains
# ---------------------------------------------------------------------------

def _steering_delays(record):
    """Per-channel source-path lag in samples relative to channel 0."""
    mics = np.asarray(record["mic_positions"], dtype=np.float64)
    src = np.asarray(record["source_pos"], dtype=np.float64)
    dist = np.linalg.norm(mics - src, axis=1)
    return (dist - dist[0]) / record["sound_speed"] * record["sample_rate"]


def _pbfdaf_mixture(mixture, far_end):
    """Run the adaptive canceller independently on every mic channel."""
    out = np.empty_like(mixture.data)
    for m in range(mixture.channels):
        _, err = pbfdaf_cancel(AudioClip(mixture.data[m], mixture.rate), far_end)
        out[m] = err.data[0]
    return AudioClip(out, mixture.rate)


def run_system(system, mixture, far_end, record, model=None):
    """Apply one processing chain; returns a mono AudioClip estimate."""
    if system == "none":
        return AudioClip(mixture.data[0], mixture.rate)
    if system == "pbfdaf":
        _, err = pbfdaf_cancel(AudioClip(mixture.data[0], mixture.rate), far_end)
        return err
    if system == "das":
        return das_beamform(mixture, _steering_delays(record))
    if system in ("jaecbf", "jaecbf_dtd", "pbfdaf+jaecbf"):
        if model is None:
            raise ValueError(f"system {system!r} needs a trained model")
        from .model import enhance
        params, cfg = model
        mix_in = mixture
        if system == "pbfdaf+jaecbf":
            mix_in = _pbfdaf_mixture(mixture, far_end)
        return enhance(mix_in, far_end, params, cfg, dtd=(system != "jaecbf"))
    raise ValueError(f"unknown system {system!r}; choose from {SYSTEMS}")


# ---------------------------------------------------------------------------
# corpus evaluation / reports
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    system: str
    scenes: list = field(default_factory=list)  # dicts with scene_id + metrics
    means: dict = field(default_factory=dict)
    count: int = 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene_id", "sisnr_db", "sdr_db", "erle_db"])
        fmt = lambda v: "" if v is None else "%.4f" % v
        for row in self.scenes:
            w.writerow([row["scene_id"], fmt(row["sisnr_db"]), fmt(row["sdr_db"]),
                        fmt(row["erle_db"])])
        w.writerow(["mean", fmt(self.means.get("sisnr_db")),
                    fmt(self.means.get("sdr_db")), fmt(self.means.get("erle_db"))])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"system": self.system, "count": self.count,
                           "means": self.means, "scenes": self.scenes},
                          sort_keys=True, indent=2) + "\n"


def _finite_mean(values):
    vals = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def evaluate_corpus(records, data_root, system, model=None, limit=None):
    """Run `system` over manifest records and score against the clean target."""
    report = EvalReport(system=system)
    for record in records[:limit]:
        w = record["wavs"]
        mixture = read_wav(os.path.join(data_root, w["mixture"]))
        far_end = read_wav(os.path.join(data_root, w["farend"]))
        target = read_wav(os.path.join(data_root, w["target"]))
        if mixture.channels != record["mics"]:
            raise ValueError(f"scene {record['id']}: channel count mismatch")
        est = run_system(system, mixture, far_end, record, model)
        activity = decode_activity(record["activity"])
        report.scenes.append({
            "scene_id": record["id"],
            "sisnr_db": si_snr(est.data[0], target.data[0]),
            "sdr_db": sdr(est.data[0], target.data[0]),
            "erle_db": erle(AudioClip(mixture.data[0], mixture.rate), est, activity),
        })
    report.count = len(report.scenes)
    for key in ("sisnr_db", "sdr_db", "erle_db"):
        report.means[key] = _finite_mean(r[key] for r in report.scenes)
    return report


def write_report(report, out_prefix):
    csv_path = out_prefix + ".csv"
    json_path = out_prefix + ".json"
    with open(csv_path, "w") as f:
        f.write(report.to_csv())
    with open(json_path, "w") as f:
        f.write(report.to_json())
    return csv_path, json_path
