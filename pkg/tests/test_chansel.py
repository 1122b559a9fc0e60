"""Greedy backward electrode elimination and the exhaustive oracle."""

import numpy as np
import pytest

from ssvepkit.chansel import (
    SelectionTask,
    evaluate_channel_subset,
    exhaustive_best_subset,
    greedy_backward_eliminate,
)
from ssvepkit.codebook import build_codebook
from ssvepkit.harness import loo_window_scores, preprocess_dataset, report_from_scores
from ssvepkit.montage import Channel, Montage
from ssvepkit.simgen import ForwardModelConfig, synthesize_dataset
from ssvepkit.tdca import TdcaConfig


@pytest.fixture(scope="module")
def tiny_montage():
    """One informative channel at the gain bump, three far-away noise channels."""
    return Montage(
        (
            Channel("N1", -2.5, 1.5),
            Channel("SIG", 0.0, 0.0),
            Channel("N2", 2.5, 1.5),
            Channel("N3", 0.0, -2.5),
        ),
        {},
    )


@pytest.fixture(scope="module")
def tiny_sources(tiny_montage):
    book = build_codebook(rows=2, cols=2, fixation_points=("center",))
    config = ForwardModelConfig(
        amplitude=1.0, gain_base=0.0, gain_width=0.3, noise_white=1.0, seed=61
    )
    return [synthesize_dataset(config, tiny_montage, book, n_blocks=3)]


@pytest.fixture(scope="module")
def task():
    return SelectionTask(window=0.5, tdca=TdcaConfig(n_components=2))


def test_full_subset_matches_harness_loo(tiny_sources, task):
    got = evaluate_channel_subset(tiny_sources, ("N1", "SIG", "N2", "N3"), task)
    prepared = preprocess_dataset(
        tiny_sources[0], task.tdca, task.latency, task.train_window, task.target_fs
    )
    scores = loo_window_scores(prepared, task.tdca, (task.window,))
    report = report_from_scores(prepared, scores, (task.window,), cue_time=0.5)
    assert got == pytest.approx(report.accuracy(task.window))


def test_informative_singleton_beats_noise_singleton(tiny_sources, task):
    informative = evaluate_channel_subset(tiny_sources, ("SIG",), task)
    assert informative == 1.0
    noise = evaluate_channel_subset(tiny_sources, ("N1",), task)
    n = tiny_sources[0].n_trials
    p = 1.0 / 4.0
    sigma = (p * (1 - p) / n) ** 0.5
    assert noise <= p + 3 * sigma


def test_greedy_first_removal_drops_a_noise_channel(tiny_sources, task):
    trace = greedy_backward_eliminate(tiny_sources, ("N1", "SIG", "N2"), task)
    assert [r.n_channels for r in trace] == [3, 2]
    assert "SIG" in trace[-1].channels


def test_greedy_trace_runs_down_to_two_channels(tiny_sources, task):
    trace = greedy_backward_eliminate(
        tiny_sources, ("N1", "SIG", "N2", "N3"), task
    )
    assert [r.n_channels for r in trace] == [4, 3, 2]
    # channels stay in montage order within each record
    for record in trace:
        master = tiny_sources[0].montage.names
        positions = [master.index(c) for c in record.channels]
        assert positions == sorted(positions)
    assert "SIG" in trace[-1].channels


def test_greedy_initial_pair_returns_single_record(tiny_sources, task):
    trace = greedy_backward_eliminate(tiny_sources, ("SIG", "N2"), task)
    assert len(trace) == 1
    assert trace[0].channels == ("SIG", "N2")


def test_exhaustive_agrees_with_evaluations(tiny_sources, task):
    best, acc = exhaustive_best_subset(tiny_sources, ("N1", "SIG", "N2", "N3"), 2, task)
    assert "SIG" in best
    direct = evaluate_channel_subset(tiny_sources, best, task)
    assert acc == pytest.approx(direct)


def test_exhaustive_guards(tiny_sources, task):
    with pytest.raises(ValueError):
        exhaustive_best_subset(tiny_sources, ("N1", "SIG"), 3, task)
    with pytest.raises(ValueError):
        exhaustive_best_subset(tiny_sources, tuple(f"C{i}" for i in range(13)), 2, task)


def test_unknown_channel_is_rejected(tiny_sources, task):
    with pytest.raises(KeyError):
        evaluate_channel_subset(tiny_sources, ("SIG", "NOPE"), task)
