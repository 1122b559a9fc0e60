"""Gated loader for the published human recordings."""

import numpy as np
import pytest

from ssvepkit.dataset import save_dataset
from ssvepkit.errors import DataUnavailableError
from ssvepkit.figshare import ENV_VAR, figshare_available, load_figshare_dataset


def test_unavailable_without_environment(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    assert not figshare_available()
    with pytest.raises(DataUnavailableError) as excinfo:
        load_figshare_dataset()
    assert ENV_VAR in str(excinfo.value)


def test_loads_converted_directory(monkeypatch, tmp_path, clean_dataset):
    target = tmp_path / "converted"
    save_dataset(clean_dataset, target)
    monkeypatch.setenv(ENV_VAR, str(target))
    assert figshare_available()
    ds = load_figshare_dataset()
    assert ds.n_trials == clean_dataset.n_trials
    first_orig = next(iter(clean_dataset.trials()))
    first_back = next(iter(ds.trials()))
    assert np.array_equal(first_orig.data, first_back.data)


def test_missing_directory_reports_instructions(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "nope"))
    assert not figshare_available()
    with pytest.raises(DataUnavailableError):
        load_figshare_dataset()
