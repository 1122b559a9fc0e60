"""Shared fixtures: small synthetic datasets kept session-scoped for speed."""

import pytest

from ssvepkit.codebook import build_codebook
from ssvepkit.harness import preprocess_dataset, train_on_prepared
from ssvepkit.montage import default_montage
from ssvepkit.simgen import ForwardModelConfig, synthesize_dataset
from ssvepkit.tdca import TdcaConfig


@pytest.fixture(scope="session")
def montage66():
    return default_montage()


@pytest.fixture(scope="session")
def montage9(montage66):
    return montage66.restrict(montage66.subset_names("64-9"))


@pytest.fixture(scope="session")
def codebook8():
    """Eight flickers (8.0..9.4 Hz), center fixation only."""
    return build_codebook(rows=2, cols=4, fixation_points=("center",))


@pytest.fixture(scope="session")
def codebook40():
    return build_codebook(rows=5, cols=8, fixation_points=("center",))


@pytest.fixture(scope="session")
def clean_dataset(montage9, codebook8):
    """Noise-free 8-target dataset, 2 blocks, 9 channels."""
    config = ForwardModelConfig(amplitude=1.0, seed=101)
    return synthesize_dataset(config, montage9, codebook8, n_blocks=2)


@pytest.fixture(scope="session")
def clean_prepared(clean_dataset):
    return preprocess_dataset(clean_dataset)


@pytest.fixture(scope="session")
def clean_model(clean_prepared):
    return train_on_prepared(clean_prepared, TdcaConfig())


@pytest.fixture(scope="session")
def noisy_dataset(montage9, codebook8):
    """Same layout as clean_dataset but with broadband noise added."""
    config = ForwardModelConfig(amplitude=1.0, noise_white=1.0, noise_pink=0.5, seed=102)
    return synthesize_dataset(config, montage9, codebook8, n_blocks=2)
