"""Greedy backward electrode elimination driven by cross-validated accuracy.

Starting from an initial channel set, every single-channel removal is scored
by mean leave-one-block-out accuracy across subjects, the best removal is
kept, and the process repeats until two channels remain. Ties favor removing
the channel latest in montage order, which makes runs reproducible. An
exhaustive oracle over all fixed-size subsets validates the greedy trace at
small channel counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .harness import PreparedTrials, loo_window_scores, preprocess_dataset
from .tdca import TdcaConfig


@dataclass(frozen=True)
class SelectionTask:
    """Evaluation settings shared by every candidate subset."""

    window: float = 0.2
    tdca: TdcaConfig = field(default_factory=TdcaConfig)
    latency: float = 0.14
    train_window: float = 0.5
    target_fs: float = 250.0
    n_jobs: int = 1


@dataclass(frozen=True)
class StepRecord:
    n_channels: int
    channels: tuple[str, ...]
    mean_accuracy: float


def _as_prepared_list(sources, task: SelectionTask) -> list[PreparedTrials]:
    prepared = []
    for source in sources:
        if isinstance(source, Dataset):
            source = preprocess_dataset(
                source, task.tdca, task.latency, task.train_window, task.target_fs
            )
        prepared.append(source)
    if not prepared:
        raise ValueError("need at least one dataset")
    return prepared


def _loo_accuracy(prepared: PreparedTrials, task: SelectionTask) -> float:
    scores = loo_window_scores(prepared, task.tdca, [task.window], task.n_jobs)
    classes = prepared.codebook.targets()
    index_of = {c.numeric_label: i for i, c in enumerate(classes)}
    truth = np.array([index_of[lab.numeric_label] for lab in prepared.labels])
    return float(np.mean(np.argmax(scores[:, 0, :], axis=1) == truth))


def evaluate_channel_subset(sources, channel_names, task: SelectionTask = SelectionTask()) -> float:
    """Mean cross-validated accuracy across subjects, restricted to the subset."""
    names = tuple(channel_names)
    if not names:
        raise ValueError("channel subset must be non-empty")
    prepared_list = _as_prepared_list(sources, task)
    return float(
        np.mean([_loo_accuracy(p.restrict(names), task) for p in prepared_list])
    )


def greedy_backward_eliminate(
    sources, initial_channels, task: SelectionTask = SelectionTask()
) -> list[StepRecord]:
    """Elimination trace from the initial set down to two channels.

    Each record holds the best subset of its size and that subset's mean
    accuracy; consecutive subsets are nested.
    """
    current = tuple(initial_channels)
    if len(current) < 2:
        raise ValueError("initial subset must have at least two channels")
    prepared_list = _as_prepared_list(sources, task)

    def mean_accuracy(names: tuple[str, ...]) -> float:
        return float(
            np.mean([_loo_accuracy(p.restrict(names), task) for p in prepared_list])
        )

    trace = [StepRecord(len(current), current, mean_accuracy(current))]
    while len(current) > 2:
        best_acc = -np.inf
        best_subset = None
        # candidates in montage order; ">=" makes the latest channel's
        # removal win ties
        for i in range(len(current)):
            candidate = current[:i] + current[i + 1 :]
            acc = mean_accuracy(candidate)
            if acc >= best_acc:
                best_acc = acc
                best_subset = candidate
        current = best_subset
        trace.append(StepRecord(len(current), current, best_acc))
    return trace


def exhaustive_best_subset(
    sources, channel_names, subset_size: int, task: SelectionTask = SelectionTask()
) -> tuple[tuple[str, ...], float]:
    """Best subset of the given size over all combinations (small n only)."""
    names = tuple(channel_names)
    if not 1 <= subset_size <= len(names):
        raise ValueError("subset_size out of range")
    if len(names) > 12:
        raise ValueError("exhaustive search is limited to 12 channels")
    prepared_list = _as_prepared_list(sources, task)

    best_subset = None
    best_acc = -np.inf
    for combo in itertools.combinations(names, subset_size):
        acc = float(
            np.mean([_loo_accuracy(p.restrict(combo), task) for p in prepared_list])
        )
        if acc > best_acc:
            best_acc = acc
            best_subset = combo
    return best_subset, best_acc
