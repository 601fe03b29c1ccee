"""Randomized scene sampling and on-disk dataset construction."""

import json
import os
import zlib

import numpy as np

from ..audio import AudioClip, write_wav
from .mix import SceneSpec, mix_scene, encode_activity
from .room import RoomSpec, RirSet, linear_array, generate_rir
from .signals import synth_utterance, synth_noise

DEFAULT_CONFIG = {
    "mics": 8,
    "aperture": 0.26,
    "sample_rate": 16000,
    "chunk_seconds": 4.0,
    "rt60_range": [0.0, 0.6],
    "ser_range": [-10.0, 10.0],
    "snr_range": [0.0, 40.0],
    "nonlinearities": ["none", "clip", "sigmoid"],
    "max_order": 30,
    "room_x": [3.5, 7.0],
    "room_y": [3.0, 6.0],
    "room_z": [2.4, 3.2],
}


def sample_room(rng, cfg):
    dims = np.array([rng.uniform(*cfg["room_x"]), rng.uniform(*cfg["room_y"]),
                     rng.uniform(*cfg["room_z"])])
    rt60 = rng.uniform(*cfg["rt60_range"])
    margin = 0.5
    aperture = cfg["aperture"]

    def point():
        return np.array([rng.uniform(margin, dims[0] - margin),
                         rng.uniform(margin, dims[1] - margin),
                         rng.uniform(1.0, min(2.0, dims[2] - margin))])

    center = np.array([rng.uniform(margin + aperture, dims[0] - margin - aperture),
                       rng.uniform(margin, dims[1] - margin),
                       rng.uniform(1.0, min(1.8, dims[2] - margin))])
    return RoomSpec(
        dimensions=dims,
        rt60=rt60,
        source_pos=point(),
        loudspeaker_pos=point(),
        noise_pos=point(),
        mic_positions=linear_array(center, mics=cfg["mics"], aperture=aperture),
        sample_rate=cfg["sample_rate"],
    )


def sample_scene(rng, cfg):
    room = sample_room(rng, cfg)
    seconds = cfg["chunk_seconds"]
    rate = cfg["sample_rate"]
    spec = SceneSpec(
        room=room,
        ser_db=rng.uniform(*cfg["ser_range"]),
        snr_db=rng.uniform(*cfg["snr_range"]),
        nonlinearity=cfg["nonlinearities"][rng.integers(len(cfg["nonlinearities"]))],
        near_utterance=synth_utterance(rng, seconds, rate),
        far_utterance=synth_utterance(rng, seconds, rate),
        noise=synth_noise(rng, seconds, rate),
        chunk_seconds=seconds,
    )
    return spec


def render_scene(spec, max_order=30):
    room = spec.room
    rirs = RirSet(
        h_near=generate_rir(room, room.source_pos, max_order),
        h_loud=generate_rir(room, room.loudspeaker_pos, max_order),
        h_noise=generate_rir(room, room.noise_pos, max_order),
        sample_rate=room.sample_rate,
    )
    return mix_scene(spec, rirs)


def build_dataset(config, out_dir, counts, seed=0):
    """Write per-scene WAVs and a JSON manifest; deterministic under seed."""
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config or {})
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for split, count in counts.items():
        split_dir = os.path.join(out_dir, split)
        os.makedirs(split_dir, exist_ok=True)
        for i in range(count):
            rng = np.random.default_rng([seed, zlib.crc32(split.encode()), i])
            spec = sample_scene(rng, cfg)
            scene = render_scene(spec, cfg["max_order"])
            scene_id = f"{split}_{i:04d}"
            paths = {}
            for name, clip in [("mixture", scene.mixture), ("farend", scene.far_end),
                               ("target", scene.target), ("echo", scene.echo_ref)]:
                rel = os.path.join(split, f"{scene_id}_{name}.wav")
                write_wav(os.path.join(out_dir, rel), clip)
                paths[name] = rel
            records.append({
                "id": scene_id,
                "split": split,
                "wavs": paths,
                "ser_db": spec.ser_db,
                "snr_db": spec.snr_db,
                "rt60": spec.room.rt60,
                "nonlinearity": spec.nonlinearity,
                "sample_rate": cfg["sample_rate"],
                "mics": cfg["mics"],
                "activity": encode_activity(scene.activity),
                "mic_positions": [list(p) for p in spec.room.mic_positions],
                "source_pos": list(spec.room.source_pos),
                "sound_speed": spec.room.sound_speed,
            })
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(records, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest_path


def load_manifest(path):
    with open(path) as f:
        return json.load(f)
