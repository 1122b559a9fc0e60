"""Adapter for the publicly released human EEG data.

The release is large and its internal layout is not described alongside the
method, so this adapter does not guess: it ingests a copy that has already
been converted into this package's dataset-directory format and fails with a
clear message when none is available. Point SSVEPKIT_FIGSHARE_DIR at the
converted directory to enable the optional comparison tests.
"""

from __future__ import annotations

import os
from pathlib import Path

from .dataset import Dataset, load_dataset
from .errors import DataUnavailableError

ENV_VAR = "SSVEPKIT_FIGSHARE_DIR"


def figshare_dir() -> Path | None:
    value = os.environ.get(ENV_VAR)
    return Path(value) if value else None


def figshare_available() -> bool:
    root = figshare_dir()
    return root is not None and (root / "manifest.json").exists()


def load_figshare_dataset(path=None) -> Dataset:
    """Load the converted public release, or explain how to provide it."""
    root = Path(path) if path is not None else figshare_dir()
    if root is None:
        raise DataUnavailableError(
            f"set {ENV_VAR} to a directory containing the public EEG release "
            "converted to this package's dataset format (manifest.json plus "
            "block payloads)"
        )
    if not (root / "manifest.json").exists():
        raise DataUnavailableError(
            f"{root} does not contain manifest.json; convert the downloaded "
            "release into the dataset-directory format first"
        )
    return load_dataset(root)
