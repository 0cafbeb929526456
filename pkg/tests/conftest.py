import os

import numpy as np
import pytest

from py_ei_snn.datasets import RasterDataset
from py_ei_snn.manifest import RunManifest, success_rule


def two_class_rasters(n, n_input=20, steps=25, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rasters = np.zeros((n, steps, n_input), dtype=bool)
    half = n_input // 2
    for k, y in enumerate(labels):
        rasters[k, :, y * half : (y + 1) * half] = rng.uniform(size=(steps, half)) < 0.2
    return RasterDataset(rasters, labels)


@pytest.fixture
def toy_data():
    """
    Train and test sets of two classes whose inputs drive disjoint halves of
    20 input units for 25 steps.
    """
    return two_class_rasters(24, seed=0), two_class_rasters(12, seed=1)


def fake_manifest(index, ratio, accuracy, noise=0.0, dataset="fashion-mnist"):
    activity = {
        "spikes_per_case_excitatory": 10.0,
        "spikes_per_case_inhibitory": 2.0,
        "percent_excitatory": 100 * 10 / 12,
        "per_class": {
            str(c): {
                "spikes_per_case_excitatory": 10.0 + c,
                "spikes_per_case_inhibitory": 2.0,
                "percent_excitatory": 100 * (10.0 + c) / (12.0 + c),
            }
            for c in range(2)
        },
    }
    epochs = [
        {
            "epoch": epoch,
            "train_loss": None if epoch == 0 else 0.5,
            "test_loss": 0.7,
            "accuracy": acc,
            "per_class_accuracy": [acc, acc],
            "activity": activity,
        }
        for epoch, acc in enumerate([0.1, accuracy, accuracy])
    ]
    inhibitory = ratio[1] > 0
    distances = {
        stage: {
            "E-E": 1.0 + 0.1 * index + shift,
            "E-I": 2.0 + shift if inhibitory else None,
            "I-I": 3.0 + shift if inhibitory else None,
        }
        for stage, shift in (("pre", 0.0), ("post", 0.5))
    }
    manifest = RunManifest(
        dataset=dataset,
        ei_ratio=list(ratio),
        sigma_init=0.005,
        sigma_noise_ratio=noise,
        seed=index,
        config={},
        trial_index=index,
        initial_rate_hz=1.0 + index,
        epochs=epochs,
        distances=distances,
        wall_clock_seconds=1.5,
    )
    manifest.success = success_rule(manifest)
    return manifest


@pytest.fixture
def manifests():
    """
    Four 80:20 runs and four 100:0 runs, all successful, with different tail
    accuracies.
    """
    runs = [fake_manifest(k, (80, 20), 0.6 + 0.01 * k) for k in range(4)]
    runs += [fake_manifest(k + 4, (100, 0), 0.7 + 0.02 * k) for k in range(4)]
    return runs


@pytest.fixture(scope="session")
def data_dir():
    """
    The directory holding the real datasets, from ``$SNN_DATA_DIR``.
    """
    path = os.environ.get("SNN_DATA_DIR")
    if not path or not os.path.isdir(path):
        pytest.skip("SNN_DATA_DIR does not point to a dataset directory")
    return path
