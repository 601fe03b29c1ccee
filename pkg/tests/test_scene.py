"""Room acoustics and scene mixing against closed-form oracles."""

import numpy as np
import pytest

from jaecbf.audio import AudioClip
from jaecbf.scene.room import (RoomSpec, linear_array, generate_rir,
                               measure_rt60, eyring_reflection, SINC_HALF)
from jaecbf.scene.signals import apply_nonlinearity, synth_utterance, synth_noise
from jaecbf.scene.mix import (SceneSpec, mix_scene, encode_activity,
                              decode_activity, active_mask, HOP)
from jaecbf.scene.room import RirSet
from jaecbf.scene.dataset import build_dataset, load_manifest


def _room(rt60=0.3, mics=2):
    return RoomSpec(
        dimensions=[5.0, 4.0, 3.0],
        rt60=rt60,
        source_pos=[1.5, 2.0, 1.5],
        loudspeaker_pos=[3.5, 1.0, 1.2],
        noise_pos=[4.0, 3.0, 1.8],
        mic_positions=linear_array([2.5, 2.0, 1.4], mics=mics, aperture=0.26),
    )


# -- impulse responses -------------------------------------------------------

def test_anechoic_direct_path_delay_and_gain():
    room = _room(rt60=0.0)
    h = generate_rir(room, room.source_pos, max_order=0)
    mic = room.mic_positions[0]
    d = np.linalg.norm(room.source_pos - mic)
    expected_delay = d / room.sound_speed * room.sample_rate
    peak = np.argmax(np.abs(h[0]))
    assert abs(peak - expected_delay) <= 1.0
    assert abs(np.sum(h[0]) - 1.0 / d) < 1e-3 * (1.0 / d)


def test_rir_causal_before_direct_path():
    room = _room(rt60=0.3)
    src = np.array([1.0, 3.2, 1.5])  # > 1.5 m from the array
    h = generate_rir(room, src)
    d = min(np.linalg.norm(src - m) for m in room.mic_positions)
    first = int(d / room.sound_speed * room.sample_rate) - SINC_HALF - 1
    assert np.max(np.abs(h[:, :max(first, 0)])) < 1e-6


def test_rt60_measurement_in_band():
    room = _room(rt60=0.3)
    h = generate_rir(room, room.source_pos)
    t = measure_rt60(h[0], room.sample_rate)
    assert 0.24 <= t <= 0.36


def test_eyring_monotone_in_rt60():
    dims = np.array([5.0, 4.0, 3.0])
    betas = [eyring_reflection(dims, t) for t in (0.1, 0.3, 0.6)]
    assert betas[0] < betas[1] < betas[2]
    assert eyring_reflection(dims, 0.0) == 0.0


def test_positions_validated():
    with pytest.raises(ValueError):
        _room(rt60=0.7)
    with pytest.raises(ValueError):
        RoomSpec(dimensions=[5, 4, 3], rt60=0.3, source_pos=[6, 1, 1],
                 loudspeaker_pos=[1, 1, 1], noise_pos=[1, 2, 1],
                 mic_positions=[[2, 2, 1]])


# -- nonlinearities ----------------------------------------------------------

def test_clip_nonlinearity_bounds(rng):
    x = AudioClip(rng.standard_normal(1000), 16000)
    y = apply_nonlinearity(x, "clip")
    thresh = 0.8 * np.max(np.abs(x.data))
    assert np.max(np.abs(y.data)) <= thresh + 1e-12
    inside = np.abs(x.data[0]) < thresh
    assert np.allclose(y.data[0][inside], x.data[0][inside])


def test_sigmoid_nonlinearity_preserves_rms(rng):
    x = AudioClip(rng.standard_normal(4000) * 0.3, 16000)
    y = apply_nonlinearity(x, "sigmoid")
    assert np.isclose(np.sqrt(np.mean(y.data ** 2)),
                      np.sqrt(np.mean(x.data ** 2)), rtol=1e-9)
    # asymmetric: positive and negative halves distort differently
    z = apply_nonlinearity(AudioClip(np.array([0.3, -0.3]), 16000), "sigmoid")
    assert abs(z.data[0, 0]) != abs(z.data[0, 1])


def test_none_nonlinearity_identity(rng):
    x = AudioClip(rng.standard_normal(100), 16000)
    assert np.array_equal(apply_nonlinearity(x, "none").data, x.data)
    with pytest.raises(ValueError):
        apply_nonlinearity(x, "cubic")


# -- mixing ------------------------------------------------------------------

def _scene(rng, ser=0.0, snr=20.0, nonlinearity="none", seconds=2.0):
    room = _room(rt60=0.2)
    return SceneSpec(
        room=room, ser_db=ser, snr_db=snr, nonlinearity=nonlinearity,
        near_utterance=synth_utterance(rng, seconds),
        far_utterance=synth_utterance(rng, seconds),
        noise=synth_noise(rng, seconds),
        chunk_seconds=seconds,
    )


def _rirs(room):
    return RirSet(h_near=generate_rir(room, room.source_pos),
                  h_loud=generate_rir(room, room.loudspeaker_pos),
                  h_noise=generate_rir(room, room.noise_pos))


def test_mixture_is_exact_component_sum(rng):
    spec = _scene(rng)
    scene = mix_scene(spec, _rirs(spec.room))
    total = scene.near_all.data + scene.echo_ref.data + scene.noise_part.data
    assert np.array_equal(scene.mixture.data, total)


def test_requested_ser_realized(rng):
    from jaecbf.scene.mix import _active_rms
    for ser in (-5.0, 0.0, 7.5):
        spec = _scene(rng, ser=ser)
        scene = mix_scene(spec, _rirs(spec.room))
        got = 20.0 * np.log10(_active_rms(scene.near_all.data[0])
                              / _active_rms(scene.echo_ref.data[0]))
        assert abs(got - ser) < 0.1


def test_requested_snr_realized(rng):
    from jaecbf.scene.mix import _active_rms
    spec = _scene(rng, snr=12.0)
    scene = mix_scene(spec, _rirs(spec.room))
    got = 20.0 * np.log10(_active_rms(scene.near_all.data[0])
                          / _active_rms(scene.noise_part.data[0]))
    assert abs(got - 12.0) < 0.1


def test_activity_labels_cover_all_frames(rng):
    spec = _scene(rng)
    scene = mix_scene(spec, _rirs(spec.room))
    n_frames = int(np.ceil(scene.mixture.samples / HOP))
    assert len(scene.activity) == n_frames
    assert set(scene.activity) <= {"s", "n", "f", "d"}


def test_activity_rle_roundtrip():
    labels = ["s", "s", "n", "d", "d", "d", "f"]
    assert decode_activity(encode_activity(labels)) == labels
    assert encode_activity(labels) == "2s1n3d1f"
    assert encode_activity([]) == ""


def test_active_mask_thresholds(rng):
    x = np.zeros(HOP * 10)
    x[:HOP] = 1.0         # one loud frame
    x[HOP:2 * HOP] = 1e-4  # one frame far below -40 dB of peak
    mask = active_mask(x)
    assert mask[0] and not mask[1] and not mask[5]


def test_scene_spec_validation(rng):
    with pytest.raises(ValueError):
        _scene(rng, ser=-15.0)
    with pytest.raises(ValueError):
        _scene(rng, snr=50.0)
    with pytest.raises(ValueError):
        _scene(rng, nonlinearity="cubic")


# -- dataset -----------------------------------------------------------------

def test_dataset_deterministic_under_seed(tmp_path):
    cfg = {"mics": 2, "chunk_seconds": 1.0, "rt60_range": [0.1, 0.2]}
    m1 = build_dataset(cfg, str(tmp_path / "a"), {"train": 2}, seed=3)
    m2 = build_dataset(cfg, str(tmp_path / "b"), {"train": 2}, seed=3)
    r1, r2 = load_manifest(m1), load_manifest(m2)
    for a, b in zip(r1, r2):
        assert a["ser_db"] == b["ser_db"]
        assert a["rt60"] == b["rt60"]
        assert a["activity"] == b["activity"]
    with open(m1, "rb") as f1, open(m2, "rb") as f2:
        assert f1.read() == f2.read()


def test_manifest_fields(tiny_corpus):
    root, records = tiny_corpus
    for r in records:
        assert set(r["wavs"]) == {"mixture", "farend", "target", "echo"}
        assert r["mics"] == 2
        assert -10.0 <= r["ser_db"] <= 10.0
        assert len(r["mic_positions"]) == 2
        assert decode_activity(r["activity"])
