"""Evaluation metrics and corpus reports."""

import numpy as np
import pytest

from jaecbf.audio import AudioClip, read_wav
from jaecbf.metrics import (si_snr, sdr, erle, evaluate_corpus, run_system,
                            write_report, EvalReport)
from jaecbf.scene.mix import HOP


# -- scalar metrics ----------------------------------------------------------

def test_sdr_trivial_cases(rng):
    x = rng.standard_normal(1000)
    assert sdr(x, x) == 60.0
    assert abs(sdr(np.zeros_like(x), x)) < 1e-12  # ||ref - 0||^2 == ||ref||^2


def test_sdr_equal_power_orthogonal_noise(rng):
    ref = rng.standard_normal(4000)
    noise = rng.standard_normal(4000)
    noise -= (noise @ ref) / (ref @ ref) * ref          # orthogonalize
    noise *= np.linalg.norm(ref) / np.linalg.norm(noise)  # equal power
    assert abs(sdr(ref + noise, ref)) < 1e-9


def test_sdr_scale_sensitive_si_snr_not(rng):
    ref = rng.standard_normal(1000)
    est = ref + 0.1 * rng.standard_normal(1000)
    assert abs(si_snr(2.0 * est, ref) - si_snr(est, ref)) < 1e-9
    assert abs(sdr(2.0 * est, ref) - sdr(est, ref)) > 1.0


def test_sdr_input_validation(rng):
    with pytest.raises(ValueError):
        sdr(np.ones(5), np.ones(6))
    with pytest.raises(ValueError):
        sdr(np.ones(5), np.zeros(5))


def test_erle_identity_and_cap(rng):
    x = AudioClip(rng.standard_normal(HOP * 4), 16000)
    labels = ["f"] * 4
    assert erle(x, x, labels) == 0.0
    silent = AudioClip(np.zeros(HOP * 4), 16000)
    assert erle(x, silent, labels) == 80.0


def test_erle_only_counts_far_frames(rng):
    d = np.zeros(HOP * 4)
    s = np.zeros(HOP * 4)
    d[:HOP] = 1.0            # far-only frame: fully cancelled
    d[HOP:2 * HOP] = 1.0     # double-talk frame: untouched
    s[HOP:2 * HOP] = 1.0
    got = erle(AudioClip(d, 16000), AudioClip(s, 16000), ["f", "d", "s", "s"])
    assert got == 80.0       # the double-talk frame is excluded


def test_erle_absent_without_far_frames(rng):
    x = AudioClip(rng.standard_normal(HOP * 2), 16000)
    assert erle(x, x, ["n", "d"]) is None
    with pytest.raises(ValueError):
        erle(x, x, [])


def test_metrics_finite_on_random_inputs(rng):
    for _ in range(20):
        a = rng.standard_normal(500) * rng.uniform(1e-3, 1e3)
        b = rng.standard_normal(500) * rng.uniform(1e-3, 1e3)
        assert np.isfinite(si_snr(a, b))
        assert np.isfinite(sdr(a, b))


# -- corpus evaluation -------------------------------------------------------

def test_system_none_is_identity_chain(tiny_corpus):
    root, records = tiny_corpus
    import os
    report = evaluate_corpus(records, root, "none")
    r = records[0]
    mixture = read_wav(os.path.join(root, r["wavs"]["mixture"]))
    target = read_wav(os.path.join(root, r["wavs"]["target"]))
    expect = si_snr(mixture.data[0], target.data[0])
    assert abs(report.scenes[0]["sisnr_db"] - expect) < 1e-12
    assert report.count == len(records)


def test_report_csv_layout_and_determinism(tiny_corpus):
    root, records = tiny_corpus
    r1 = evaluate_corpus(records, root, "none")
    r2 = evaluate_corpus(records, root, "none")
    csv1, csv2 = r1.to_csv(), r2.to_csv()
    assert csv1 == csv2
    lines = csv1.strip().split("\n")
    assert lines[0] == "scene_id,sisnr_db,sdr_db,erle_db"
    assert len(lines) == len(records) + 2  # header + scenes + mean
    assert lines[-1].startswith("mean,")


def test_report_json_roundtrip(tiny_corpus):
    import json
    root, records = tiny_corpus
    report = evaluate_corpus(records, root, "none")
    blob = json.loads(report.to_json())
    assert blob["system"] == "none"
    assert blob["count"] == len(records)
    assert set(blob["means"]) == {"sisnr_db", "sdr_db", "erle_db"}


def test_write_report_files(tiny_corpus, tmp_path):
    root, records = tiny_corpus
    report = evaluate_corpus(records, root, "das")
    csv_path, json_path = write_report(report, str(tmp_path / "rep"))
    assert open(csv_path).read() == report.to_csv()
    assert open(json_path).read() == report.to_json()


def test_baseline_systems_run(tiny_corpus):
    root, records = tiny_corpus
    for system in ("pbfdaf", "das"):
        report = evaluate_corpus(records, root, system)
        for row in report.scenes:
            assert np.isfinite(row["sisnr_db"])


def test_neural_system_requires_model(tiny_corpus):
    root, records = tiny_corpus
    with pytest.raises(ValueError):
        evaluate_corpus(records, root, "jaecbf_dtd")
    with pytest.raises(ValueError):
        evaluate_corpus(records, root, "warp-drive")
