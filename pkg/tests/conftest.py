import numpy as np
import pytest

from jaecbf.scene.dataset import build_dataset, load_manifest


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Two short 2-mic scenes plus manifest, shared across tests."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    manifest = build_dataset(
        {"mics": 2, "chunk_seconds": 2.0, "rt60_range": [0.1, 0.3],
         "snr_range": [15.0, 30.0]},
        str(root), {"train": 2}, seed=7)
    return str(root), load_manifest(manifest)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
