"""Evaluation metrics: information transfer rate, spectral SNR, correlations.

The ITR follows the standard selection-channel formula over N equally likely
targets. "Actual" rates count cue plus stimulation time per selection
(bits/min); "theoretical" rates count stimulation time only (bits/s) — the
caller picks T accordingly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .sigproc import BandSpec, bandpass_array


def itr(n_targets: int, accuracy: float, selection_time: float, unit: str = "bpm") -> float:
    """Bits per minute ("bpm") or per second ("bps") at the given accuracy.

    bits/selection = log2 N + P log2 P + (1-P) log2((1-P)/(N-1)), with the
    x*log2(x) terms taken as 0 in the limits P=0 and P=1. Accuracies below
    chance yield negative values; they are returned as-is with a warning.
    """
    if n_targets < 2:
        raise ValueError("n_targets must be >= 2")
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must be within [0, 1]")
    if selection_time <= 0:
        raise ValueError("selection_time must be positive")
    if unit not in ("bpm", "bps"):
        raise ValueError(f"unknown unit {unit!r}; expected 'bpm' or 'bps'")

    bits = math.log2(n_targets)
    if accuracy > 0:
        bits += accuracy * math.log2(accuracy)
    if accuracy < 1:
        bits += (1.0 - accuracy) * math.log2((1.0 - accuracy) / (n_targets - 1))
    if accuracy < 1.0 / n_targets:
        warnings.warn(
            f"accuracy {accuracy:.4f} below chance 1/{n_targets}; ITR is negative",
            stacklevel=2,
        )
    per_second = bits / selection_time
    return per_second * 60.0 if unit == "bpm" else per_second


def snr_at_frequency(
    amplitudes, frequency: float, bin_width: float, n_neighbors: int = 5
) -> float:
    """dB ratio of the bin amplitude at ``frequency`` to its flanking bins.

    20*log10 of (2*n_neighbors * y(f)) over the summed amplitudes of the
    n_neighbors bins on each side. The frequency must sit exactly on a bin
    center; off-bin requests are rejected rather than interpolated.
    """
    y = np.asarray(amplitudes, dtype=float)
    if y.ndim != 1:
        raise ValueError("expected a 1-D amplitude spectrum")
    if bin_width <= 0 or n_neighbors < 1:
        raise ValueError("bin_width must be positive and n_neighbors >= 1")
    k = frequency / bin_width
    k_int = round(k)
    if abs(k - k_int) > 1e-9 * max(1.0, abs(k)):
        raise ValueError(f"{frequency} Hz is not on a bin center (bin width {bin_width} Hz)")
    if k_int - n_neighbors < 0 or k_int + n_neighbors >= y.size:
        raise ValueError("frequency too close to the spectrum edge for the noise bins")
    offsets = np.arange(1, n_neighbors + 1)
    noise = float(y[k_int - offsets].sum() + y[k_int + offsets].sum())
    signal = 2.0 * n_neighbors * float(y[k_int])
    if noise == 0.0:
        warnings.warn("noise bins sum to zero; SNR is unbounded", stacklevel=2)
        return math.inf
    if signal == 0.0:
        warnings.warn("zero amplitude at the target bin; SNR is -inf", stacklevel=2)
        return -math.inf
    return 20.0 * math.log10(signal / noise)


@dataclass(frozen=True)
class SpectrumResult:
    """Per-channel amplitude/phase spectra; a unit sinusoid reads amplitude 1."""

    frequencies: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    bin_width: float


def spectrum(data, sampling_rate: float, n_samples: int | None = None) -> SpectrumResult:
    """Amplitude (scaled 2/N) and phase spectra over the first n_samples."""
    x = np.asarray(data, dtype=float)
    if sampling_rate <= 0:
        raise ValueError("sampling_rate must be positive")
    total = x.shape[-1]
    if n_samples is None:
        n_samples = total
    if not 1 <= n_samples <= total:
        raise ValueError(f"n_samples must be in 1..{total}")
    x = x[..., :n_samples]
    transform = np.fft.rfft(x, axis=-1)
    return SpectrumResult(
        frequencies=np.fft.rfftfreq(n_samples, 1.0 / sampling_rate),
        amplitude=2.0 * np.abs(transform) / n_samples,
        phase=np.angle(transform),
        bin_width=sampling_rate / n_samples,
    )


@dataclass(frozen=True)
class CorrelationResult:
    matrix: np.ndarray
    channel_names: tuple[str, ...]
    constant_channels: tuple[str, ...]


def channel_correlation(dataset: Dataset, band: BandSpec | None = None) -> CorrelationResult:
    """Pairwise Pearson correlation over concatenated band-passed trials.

    Constant channels get zero off-diagonal correlation (unit diagonal) and
    are reported in ``constant_channels``.
    """
    if band is None:
        band = BandSpec(6.0, 90.0)
    fs = dataset.raw_sampling_rate
    pieces = [
        bandpass_array(trial.data[:, trial.trigger_sample :], band, fs)
        for trial in dataset.trials()
    ]
    if not pieces:
        raise ValueError("dataset has no trials")
    joined = np.concatenate(pieces, axis=1)
    if joined.shape[1] < 2:
        raise ValueError("need at least two samples per channel")

    centered = joined - joined.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    constant = norms == 0
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe[:, None]
    matrix = unit @ unit.T
    matrix[constant, :] = 0.0
    matrix[:, constant] = 0.0
    np.fill_diagonal(matrix, 1.0)
    names = dataset.montage.names
    return CorrelationResult(
        matrix=matrix,
        channel_names=names,
        constant_channels=tuple(n for n, c in zip(names, constant) if c),
    )


def complex_spectrum_features(model, trials, labels, band_index: int = 0):
    """Amplitude and phase at each trial's flicker fundamental after filtering.

    Each band-decomposed trial is delay-embedded, projected onto the leading
    filter column of the chosen sub-band, and Fourier-transformed; the complex
    bin nearest the trial's flicker frequency is reported.
    """
    from .tdca import _embed_batch

    trials = np.asarray(trials, dtype=float)
    labels = list(labels)
    if trials.shape[0] != len(labels):
        raise ValueError("one label per trial required")
    if not 0 <= band_index < model.n_bands:
        raise ValueError(f"band_index must be in 0..{model.n_bands - 1}")
    if trials.shape[0] == 0:
        return np.empty(0), np.empty(0)

    n_window = model.n_window
    leading = model.filters[band_index][:, 0]
    band = trials[:, band_index, :, :]
    embedded = _embed_batch(band, n_window, model.delay_order)
    projected = np.einsum("d,ndp->np", leading, embedded)
    transform = np.fft.rfft(projected, axis=1)
    bin_width = model.sampling_rate / n_window

    amplitudes = np.empty(len(labels))
    phases = np.empty(len(labels))
    for i, label in enumerate(labels):
        k = round(model.codebook.frequency(label.flicker_index) / bin_width)
        value = transform[i, k]
        amplitudes[i] = 2.0 * abs(value) / n_window
        phases[i] = np.angle(value)
    return amplitudes, phases
