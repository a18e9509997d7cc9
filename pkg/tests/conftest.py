import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikegrow import GeneratorConfig, LabeledDataset, LabeledSample, generate_family


def make_dataset(n_per_cat=4, n_cats=3, d=4, T=10, seed=0):
    """Small random dataset for structural tests."""
    rng = np.random.default_rng(seed)
    samples = []
    for c in range(n_cats):
        for _ in range(n_per_cat):
            block = (rng.random((d, T)) < 0.3).astype(np.uint8)
            samples.append(LabeledSample(block, c))
    return LabeledDataset(samples, list(range(n_cats)), d, T)


@pytest.fixture
def tiny_dataset():
    return make_dataset()


@pytest.fixture
def two_class_family():
    """A clearly separable 2-category dataset, one stage."""
    cfg = GeneratorConfig(d=8, T=25, categories=2, samples_per_category=20,
                          base_rate=0.2, separation=0.9, jitter=0.05,
                          rng_seed=1)
    return generate_family(cfg, [2])
