"""Trial and dataset containers plus the on-disk dataset format.

A dataset directory holds ``manifest.json`` and one raw payload file per
block. Payloads are little-endian 32-bit floats ordered trial-major, then
channel, then sample. Epochs loaded from disk are raw: not latency-aligned,
not decimated, not filtered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codebook import Fixation, StimulusCodebook, TargetLabel
from .errors import CorruptDataError, InvalidManifestError
from .montage import Montage

FORMAT_NAME = "ssvep-dataset"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrialEpoch:
    """One trial's multichannel recording.

    ``trigger_sample`` marks stimulus onset within ``data``; samples before
    it are pre-stimulus context.
    """

    data: np.ndarray
    sampling_rate: float
    label: TargetLabel
    block: int
    trigger_sample: int = 0

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError("epoch data must be a channels x samples matrix")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")
        if not 0 <= self.trigger_sample < self.data.shape[1]:
            raise ValueError("trigger_sample outside the recorded samples")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Dataset:
    """All blocks of one subject's recordings plus their describing metadata."""

    subject_id: str
    montage: Montage
    codebook: StimulusCodebook
    blocks: tuple[tuple[TrialEpoch, ...], ...]
    raw_sampling_rate: float = 1000.0

    def __post_init__(self):
        expected = sorted(t.numeric_label for t in self.codebook.targets())
        for i, block in enumerate(self.blocks):
            for trial in block:
                if trial.block != i:
                    raise ValueError(f"trial in block list {i} carries block index {trial.block}")
                if trial.n_channels != self.montage.n_channels:
                    raise ValueError(
                        f"trial has {trial.n_channels} channels, montage has {self.montage.n_channels}"
                    )
            labels = sorted(t.label.numeric_label for t in block)
            if labels != expected:
                raise ValueError(f"block {i} does not contain each target exactly once")
        rates = {t.sampling_rate for block in self.blocks for t in block}
        if len(rates) > 1:
            raise ValueError("epochs have mixed sampling rates")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_trials(self) -> int:
        return sum(len(b) for b in self.blocks)

    def trials(self):
        for block in self.blocks:
            yield from block


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset directory (manifest plus one float32 payload per block)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    block_entries = []
    for i, block in enumerate(dataset.blocks):
        fname = f"block_{i:03d}.f32"
        n_samples = {t.n_samples for t in block}
        if len(n_samples) != 1:
            raise ValueError(f"block {i} trials have unequal lengths; cannot serialize")
        stacked = np.stack([t.data for t in block]).astype("<f4")
        stacked.tofile(root / fname)
        block_entries.append(
            {
                "index": i,
                "file": fname,
                "n_trials": len(block),
                "n_samples": n_samples.pop(),
                "trials": [
                    {
                        "label": t.label.numeric_label,
                        "flicker": t.label.flicker_index,
                        "fixation": t.label.fixation.value,
                        "trigger": t.trigger_sample,
                    }
                    for t in block
                ],
            }
        )
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "subject_id": dataset.subject_id,
        "raw_sampling_rate": dataset.raw_sampling_rate,
        "montage": dataset.montage.to_dict(),
        "codebook": dataset.codebook.to_dict(),
        "blocks": block_entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_dataset(path) -> Dataset:
    """Load and validate a dataset directory written by :func:`save_dataset`."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidManifestError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise InvalidManifestError(f"unrecognized dataset format: {manifest.get('format')!r}")

    try:
        montage = Montage.from_dict(manifest["montage"])
        codebook = StimulusCodebook.from_dict(manifest["codebook"])
        subject_id = str(manifest["subject_id"])
        raw_fs = float(manifest["raw_sampling_rate"])
        block_entries = manifest["blocks"]
    except KeyError as exc:
        raise InvalidManifestError(f"manifest missing required key: {exc}") from exc

    n_channels = montage.n_channels
    blocks = []
    for entry in block_entries:
        idx = int(entry["index"])
        payload = root / str(entry["file"])
        n_trials = int(entry["n_trials"])
        n_samples = int(entry["n_samples"])
        if not payload.exists():
            raise CorruptDataError(f"block payload missing: {payload.name}")
        raw = np.fromfile(payload, dtype="<f4")
        expected = n_trials * n_channels * n_samples
        if raw.size != expected:
            raise CorruptDataError(
                f"{payload.name}: expected {expected} float32 values, found {raw.size}"
            )
        cube = raw.reshape(n_trials, n_channels, n_samples)
        trial_meta = entry["trials"]
        if len(trial_meta) != n_trials:
            raise InvalidManifestError(f"block {idx}: trial list length != n_trials")
        trials = []
        for t, meta in enumerate(trial_meta):
            label = codebook.label_for(int(meta["flicker"]), Fixation.parse(meta["fixation"]))
            if label.numeric_label != int(meta["label"]):
                raise InvalidManifestError(
                    f"block {idx} trial {t}: numeric label {meta['label']} does not match "
                    f"flicker/fixation (expected {label.numeric_label})"
                )
            trials.append(
                TrialEpoch(
                    data=cube[t],
                    sampling_rate=raw_fs,
                    label=label,
                    block=idx,
                    trigger_sample=int(meta["trigger"]),
                )
            )
        blocks.append((idx, tuple(trials)))

    blocks.sort(key=lambda pair: pair[0])
    if [i for i, _ in blocks] != list(range(len(blocks))):
        raise InvalidManifestError("block indices are not contiguous from 0")
    return Dataset(
        subject_id=subject_id,
        montage=montage,
        codebook=codebook,
        blocks=tuple(t for _, t in blocks),
        raw_sampling_rate=raw_fs,
    )


def apply_montage(dataset: Dataset, subset_name: str) -> Dataset:
    """Dataset view restricted to a named montage subset, in subset order."""
    names = dataset.montage.subset_names(subset_name)
    return restrict_channels(dataset, names)


def restrict_channels(dataset: Dataset, names) -> Dataset:
    """Dataset view keeping only the listed channels, in montage order."""
    montage = dataset.montage.restrict(names)
    rows = [dataset.montage.index_of(n) for n in montage.names]
    if rows == list(range(dataset.montage.n_channels)):
        return dataset
    blocks = tuple(
        tuple(
            TrialEpoch(
                data=trial.data[rows],
                sampling_rate=trial.sampling_rate,
                label=trial.label,
                block=trial.block,
                trigger_sample=trial.trigger_sample,
            )
            for trial in block
        )
        for block in dataset.blocks
    )
    return Dataset(
        subject_id=dataset.subject_id,
        montage=montage,
        codebook=dataset.codebook,
        blocks=blocks,
        raw_sampling_rate=dataset.raw_sampling_rate,
    )
