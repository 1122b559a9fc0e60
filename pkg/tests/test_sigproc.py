"""Filtering, epoch extraction, and decimation."""

import numpy as np
import pytest

from ssvepkit.codebook import build_codebook
from ssvepkit.dataset import TrialEpoch
from ssvepkit.sigproc import (
    BandSpec,
    FilterBank,
    bandpass_array,
    bandpass_zero_phase,
    decimate,
    decompose_array,
    default_filter_bank,
    extract_epoch,
    filter_bank_decompose,
)


def _sine_epoch(freq, fs=250.0, seconds=2.0, label=None):
    t = np.arange(int(seconds * fs)) / fs
    data = np.sin(2 * np.pi * freq * t)[None, :]
    book = build_codebook(rows=1, cols=1, fixation_points=("center",))
    label = label or book.label_for(0, book.fixation_points[0])
    return TrialEpoch(data, fs, label, 0)


def test_default_bank_edges():
    bank = default_filter_bank()
    lows = [b.low_edge for b in bank.bands]
    highs = [b.high_edge for b in bank.bands]
    assert lows == [6.0, 14.0, 22.0, 30.0, 38.0]
    assert highs == [90.0] * 5


def test_passband_probe_survives_with_zero_lag():
    epoch = _sine_epoch(14.0)
    out = bandpass_zero_phase(epoch, BandSpec(6.0, 90.0))
    x = epoch.data[0]
    y = out.data[0]
    # ignore the outermost samples where any filter settles
    core = slice(50, -50)
    gain = np.linalg.norm(y[core]) / np.linalg.norm(x[core])
    assert abs(gain - 1.0) < 0.05
    lags = np.arange(-20, 21)
    xc = [np.dot(y[core], np.roll(x, lag)[core]) for lag in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_stopband_probe_is_suppressed():
    epoch = _sine_epoch(2.0)
    out = bandpass_zero_phase(epoch, BandSpec(6.0, 90.0))
    ratio = np.sqrt(np.mean(out.data**2) / np.mean(epoch.data**2))
    assert ratio < 0.10


def test_zero_in_zero_out():
    book = build_codebook(rows=1, cols=1, fixation_points=("center",))
    epoch = TrialEpoch(
        np.zeros((3, 500)), 250.0, book.label_for(0, book.fixation_points[0]), 0
    )
    out = bandpass_zero_phase(epoch, BandSpec(6.0, 90.0))
    assert np.allclose(out.data, 0.0)


def test_band_three_rejects_fourteen_hertz():
    fs = 250.0
    t = np.arange(500) / fs
    x = np.sin(2 * np.pi * 14.0 * t)[None, :]
    bank = default_filter_bank()
    in_band = bandpass_array(x, bank.bands[0], fs)
    out_band = bandpass_array(x, bank.bands[2], fs)
    ratio_db = 20 * np.log10(np.linalg.norm(out_band) / np.linalg.norm(in_band))
    assert ratio_db < -20.0


def test_band_validation():
    with pytest.raises(ValueError):
        BandSpec(90.0, 6.0)
    with pytest.raises(ValueError):
        bandpass_array(np.zeros((1, 100)), BandSpec(6.0, 140.0), 250.0)


def test_decompose_shapes(clean_dataset):
    epoch = next(iter(clean_dataset.trials()))
    bank = default_filter_bank()
    stacked = decompose_array(epoch.data, bank, epoch.sampling_rate)
    assert stacked.shape == (5,) + epoch.data.shape
    sub_epochs = filter_bank_decompose(epoch, bank)
    assert len(sub_epochs) == 5
    for band_idx, sub in enumerate(sub_epochs):
        assert np.allclose(sub.data, stacked[band_idx])

    single = FilterBank((BandSpec(6.0, 90.0),))
    only = filter_bank_decompose(epoch, single)
    assert len(only) == 1
    direct = bandpass_zero_phase(epoch, single.bands[0])
    assert np.allclose(only[0].data, direct.data)


def test_extract_epoch_indices():
    fs = 1000.0
    book = build_codebook(rows=1, cols=1, fixation_points=("center",))
    label = book.label_for(0, book.fixation_points[0])
    n = 10_000
    data = np.arange(n, dtype=float)[None, :]
    trial = TrialEpoch(data, fs, label, 0, trigger_sample=5000)
    out = extract_epoch(trial, latency_s=0.14, duration_s=0.5)
    assert out.data.shape == (1, 500)
    assert out.data[0, 0] == 5140.0
    assert out.data[0, -1] == 5639.0
    assert out.trigger_sample == 0

    whole = extract_epoch(
        TrialEpoch(data, fs, label, 0), latency_s=0.0, duration_s=n / fs
    )
    assert np.array_equal(whole.data, data)

    tailed = extract_epoch(trial, 0.14, 0.5, tail_samples=16)
    assert out.data.shape[1] + 16 == tailed.data.shape[1]

    with pytest.raises(ValueError):
        extract_epoch(trial, 0.14, 10.0)


def test_decimate_identity_and_length():
    epoch = _sine_epoch(10.0, fs=1000.0, seconds=1.0)
    assert decimate(epoch, 1) is epoch
    out = decimate(epoch, 4)
    assert out.sampling_rate == 250.0
    assert out.data.shape[1] == epoch.data.shape[1] // 4


def test_decimate_preserves_low_frequency_content():
    fs = 1000.0
    t = np.arange(1000) / fs
    epoch = _sine_epoch(10.0, fs=fs, seconds=1.0)
    out = decimate(epoch, 4)
    expected = np.sin(2 * np.pi * 10.0 * t[::4])
    core = slice(20, -20)
    amp = np.linalg.norm(out.data[0][core]) / np.linalg.norm(expected[core])
    assert abs(amp - 1.0) < 0.02
    err = np.linalg.norm(out.data[0][core] - expected[core]) / np.linalg.norm(expected[core])
    assert err < 0.05


def test_decimate_trigger_and_validation():
    fs = 1000.0
    book = build_codebook(rows=1, cols=1, fixation_points=("center",))
    label = book.label_for(0, book.fixation_points[0])
    trial = TrialEpoch(np.random.default_rng(0).normal(size=(2, 800)), fs, label, 0,
                       trigger_sample=200)
    out = decimate(trial, 4)
    assert out.trigger_sample == 50
    with pytest.raises(ValueError):
        decimate(trial, 0)
