"""Epoch alignment, decimation, and zero-phase filter-bank decomposition.

Band-pass filters are recursive Chebyshev-type designs chosen automatically
to meet a ripple/attenuation specification, applied forward and backward for
zero phase. Because analysis windows can be as short as a few dozen samples,
the edges are extended by reflection before the two-pass filter runs; the
built-in padding of scipy's zero-phase filters would reject such short
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import butter, cheb1ord, cheby1, sosfiltfilt

from .dataset import TrialEpoch


@dataclass(frozen=True)
class BandSpec:
    """Passband edges in Hz plus the design's ripple/attenuation targets.

    The stopband edges are implied: max(low_edge - 4, 0.5) Hz below and
    high_edge + 10 Hz above (capped below Nyquist).
    """

    low_edge: float
    high_edge: float
    passband_ripple: float = 0.1
    stopband_attenuation: float = 40.0

    def __post_init__(self):
        if not 0 < self.low_edge < self.high_edge:
            raise ValueError("band edges must satisfy 0 < low_edge < high_edge")
        if self.passband_ripple <= 0 or self.stopband_attenuation <= 0:
            raise ValueError("ripple and attenuation must be positive dB values")


@dataclass(frozen=True)
class FilterBank:
    bands: tuple[BandSpec, ...]

    def __post_init__(self):
        if not self.bands:
            raise ValueError("filter bank needs at least one band")

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    def to_dict(self) -> dict:
        return {
            "bands": [
                {
                    "low_edge": b.low_edge,
                    "high_edge": b.high_edge,
                    "passband_ripple": b.passband_ripple,
                    "stopband_attenuation": b.stopband_attenuation,
                }
                for b in self.bands
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterBank":
        return cls(bands=tuple(BandSpec(**b) for b in d["bands"]))


def default_filter_bank(n_bands: int = 5) -> FilterBank:
    """Sub-bands [6,90], [14,90], ..., low edge 8m-2 Hz for band m."""
    if not 1 <= n_bands <= 10:
        raise ValueError("n_bands must be between 1 and 10")
    return FilterBank(bands=tuple(BandSpec(8.0 * m - 2.0, 90.0) for m in range(1, n_bands + 1)))


@lru_cache(maxsize=None)
def _design_bandpass(band: BandSpec, fs: float):
    nyq = fs / 2.0
    if band.high_edge >= nyq:
        raise ValueError(f"band [{band.low_edge}, {band.high_edge}] Hz invalid at fs={fs}")
    stop_low = max(band.low_edge - 4.0, 0.5)
    stop_high = min(band.high_edge + 10.0, 0.5 * (band.high_edge + nyq))
    wp = [band.low_edge / nyq, band.high_edge / nyq]
    ws = [stop_low / nyq, stop_high / nyq]
    order, wn = cheb1ord(wp, ws, band.passband_ripple, band.stopband_attenuation)
    # second-order sections stay numerically stable at high sampling rates
    return cheby1(order, band.passband_ripple, wn, btype="bandpass", output="sos")


def _sosfiltfilt_reflect(data: np.ndarray, sos: np.ndarray) -> np.ndarray:
    # pad = 3x the settle length scipy would use, but applied by reflection
    # outside the filter call so windows shorter than that still work
    pad = 3 * 2 * sos.shape[0]
    widths = [(0, 0)] * (data.ndim - 1) + [(pad, pad)]
    extended = np.pad(data, widths, mode="reflect")
    filtered = sosfiltfilt(sos, extended, axis=-1, padlen=0)
    return filtered[..., pad:-pad]


def bandpass_array(data: np.ndarray, band: BandSpec, fs: float) -> np.ndarray:
    """Zero-phase band-pass along the last axis."""
    sos = _design_bandpass(band, float(fs))
    return _sosfiltfilt_reflect(np.asarray(data, dtype=float), sos)


def bandpass_zero_phase(epoch: TrialEpoch, band: BandSpec) -> TrialEpoch:
    """Per-channel zero-phase band-pass; output length equals input length."""
    return _replace_data(epoch, bandpass_array(epoch.data, band, epoch.sampling_rate))


def decompose_array(data: np.ndarray, bank: FilterBank, fs: float) -> np.ndarray:
    """Stacked sub-band signals, shape (n_bands, ...data shape...)."""
    return np.stack([bandpass_array(data, band, fs) for band in bank.bands])


def filter_bank_decompose(epoch: TrialEpoch, bank: FilterBank) -> list[TrialEpoch]:
    """One filtered epoch per sub-band, widest band first."""
    return [bandpass_zero_phase(epoch, band) for band in bank.bands]


def extract_epoch(
    trial: TrialEpoch,
    latency_s: float,
    duration_s: float,
    tail_samples: int = 0,
    trigger_sample: int | None = None,
) -> TrialEpoch:
    """Slice the analysis window starting latency_s after the trigger.

    ``tail_samples`` extra trailing samples are kept for delay embedding of
    training trials; test windows use zero.
    """
    if latency_s < 0:
        raise ValueError("latency_s must be non-negative")
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if tail_samples < 0:
        raise ValueError("tail_samples must be non-negative")
    fs = trial.sampling_rate
    trigger = trial.trigger_sample if trigger_sample is None else trigger_sample
    start = trigger + round(latency_s * fs)
    n_out = round(duration_s * fs) + tail_samples
    if start < 0 or start + n_out > trial.n_samples:
        raise ValueError(
            f"window [{start}, {start + n_out}) exceeds recording of {trial.n_samples} samples"
        )
    return TrialEpoch(
        data=trial.data[:, start : start + n_out],
        sampling_rate=fs,
        label=trial.label,
        block=trial.block,
        trigger_sample=0,
    )


def decimate(epoch: TrialEpoch, factor: int, antialias: bool = True) -> TrialEpoch:
    """Keep every factor-th sample (from index 0) after an optional low-pass.

    The antialias filter is a zero-phase low-pass at 0.45x the new sampling
    rate.
    """
    if factor != int(factor) or factor < 1:
        raise ValueError("decimation factor must be a positive integer")
    factor = int(factor)
    if factor == 1:
        return epoch
    data = np.asarray(epoch.data, dtype=float)
    if antialias:
        sos = butter(8, 0.9 / factor, output="sos")
        data = _sosfiltfilt_reflect(data, sos)
    return TrialEpoch(
        data=data[:, ::factor],
        sampling_rate=epoch.sampling_rate / factor,
        label=epoch.label,
        block=epoch.block,
        trigger_sample=epoch.trigger_sample // factor,
    )


def _replace_data(epoch: TrialEpoch, data: np.ndarray) -> TrialEpoch:
    return TrialEpoch(
        data=data,
        sampling_rate=epoch.sampling_rate,
        label=epoch.label,
        block=epoch.block,
        trigger_sample=epoch.trigger_sample,
    )
