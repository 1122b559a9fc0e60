"""Seeded synthetic forward model that makes the pipeline verifiable.

Each channel sees a harmonic series at its trial's flicker frequency, scaled
by a fixation-dependent Gaussian gain profile over the montage coordinates
and shifted by fixation-dependent phase offsets, delayed by the visual
latency, plus seeded white and pink noise. A single ``fixation_separation``
dial scales all fixation-specific structure: at 0, every fixation produces
the same signal and only the flicker remains decodable.

Nothing here claims physiological fidelity; the parameters are calibration
knobs for verification at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .codebook import FIXATION_ORDER, Fixation, StimulusCodebook, TargetLabel
from .dataset import Dataset, TrialEpoch
from .montage import Montage

FIXATION_DIRECTIONS: Mapping[Fixation, tuple[float, float]] = {
    Fixation.RIGHT: (1.0, 0.0),
    Fixation.DOWN: (0.0, -1.0),
    Fixation.LEFT: (-1.0, 0.0),
    Fixation.UP: (0.0, 1.0),
    Fixation.CENTER: (0.0, 0.0),
}

# stream tag for the per-block trial-order generator, outside the slot range
_ORDER_TAG = 2**32


@dataclass(frozen=True)
class ForwardModelConfig:
    """All knobs of the generator; the seed fixes every random draw."""

    amplitude: float = 1.0  # fundamental amplitude; harmonic h gets amplitude/h
    n_harmonics: int = 3
    gain_base: float = 0.2  # gain floor so every channel carries some signal
    gain_width: float = 0.5  # Gaussian width over montage coordinates
    gain_shift: float = 0.6  # how far fixation gain centers move from origin
    phase_step: float = 0.5  # per-fixation phase offset, rad per canonical rank
    phase_gradient: float = 0.4  # phase tilt along the fixation direction
    fixation_separation: float = 1.0  # scales ALL fixation-specific structure
    latency: float = 0.14
    pre_stimulus: float = 0.0  # seconds of noise-only context before the trigger
    noise_white: float = 0.0
    noise_pink: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.gain_width <= 0:
            raise ValueError("gain_width must be positive")
        if self.latency < 0 or self.pre_stimulus < 0:
            raise ValueError("latency and pre_stimulus must be >= 0")
        if self.noise_white < 0 or self.noise_pink < 0:
            raise ValueError("noise levels must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "n_harmonics": self.n_harmonics,
            "gain_base": self.gain_base,
            "gain_width": self.gain_width,
            "gain_shift": self.gain_shift,
            "phase_step": self.phase_step,
            "phase_gradient": self.phase_gradient,
            "fixation_separation": self.fixation_separation,
            "latency": self.latency,
            "pre_stimulus": self.pre_stimulus,
            "noise_white": self.noise_white,
            "noise_pink": self.noise_pink,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForwardModelConfig":
        return cls(**d)


def channel_gains(config: ForwardModelConfig, montage: Montage, fixation: Fixation) -> np.ndarray:
    """Gaussian gain profile of one fixation over the montage coordinates."""
    coords = montage.coordinates()
    direction = np.array(FIXATION_DIRECTIONS[Fixation.parse(fixation)])
    center = config.fixation_separation * config.gain_shift * direction
    sq_dist = np.sum((coords - center) ** 2, axis=1)
    return config.gain_base + np.exp(-sq_dist / (2.0 * config.gain_width**2))


def phase_offsets(
    config: ForwardModelConfig, montage: Montage, fixation: Fixation, harmonic: int
) -> np.ndarray:
    """Per-channel phase offset of one fixation at the given harmonic."""
    fixation = Fixation.parse(fixation)
    coords = montage.coordinates()
    direction = np.array(FIXATION_DIRECTIONS[fixation])
    rank = FIXATION_ORDER.index(fixation)
    tilt = coords @ direction
    return config.fixation_separation * harmonic * (rank * config.phase_step + config.phase_gradient * tilt)


def pink_noise(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """White noise shaped by a 1/sqrt(f) spectral mask, unit variance per row."""
    n = shape[-1]
    white = rng.standard_normal(shape)
    if n < 2:
        return white
    freqs = np.fft.rfftfreq(n)
    mask = np.zeros_like(freqs)
    mask[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(np.fft.rfft(white, axis=-1) * mask, n=n, axis=-1)
    std = shaped.std(axis=-1, keepdims=True)
    return shaped / np.where(std > 0, std, 1.0)


def synthesize_trial(
    config: ForwardModelConfig,
    montage: Montage,
    codebook: StimulusCodebook,
    label: TargetLabel,
    duration: float,
    sampling_rate: float,
    block: int = 0,
    slot: int = 0,
) -> TrialEpoch:
    """One seeded trial; ``duration`` covers the post-trigger recording.

    The response is zero before the visual latency; noise spans the whole
    recording including any pre-stimulus context. Randomness derives from
    (seed, block, slot), so any trial can be regenerated in isolation.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    expected = codebook.label_for(label.flicker_index, label.fixation)
    if expected.numeric_label != label.numeric_label:
        raise ValueError(f"label {label} is not a target of the codebook")

    frequency = codebook.frequency(label.flicker_index)
    phase = codebook.phase(label.flicker_index)
    if config.n_harmonics * frequency >= sampling_rate / 2:
        raise ValueError(
            f"harmonic {config.n_harmonics}x{frequency} Hz reaches Nyquist at fs={sampling_rate}"
        )

    n_pre = round(config.pre_stimulus * sampling_rate)
    n_post = round(duration * sampling_rate)
    n_channels = montage.n_channels
    data = np.zeros((n_channels, n_pre + n_post))

    if config.amplitude > 0:
        t = np.arange(n_post) / sampling_rate
        active = t >= config.latency - 1e-12
        tau = t[active] - config.latency
        gains = channel_gains(config, montage, label.fixation)
        wave = np.zeros((n_channels, tau.size))
        for h in range(1, config.n_harmonics + 1):
            psi = phase_offsets(config, montage, label.fixation, h)
            arg = 2.0 * np.pi * h * frequency * tau[None, :] + h * phase + psi[:, None]
            wave += (config.amplitude / h) * np.sin(arg)
        data[:, n_pre:][:, active] = gains[:, None] * wave

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, block, slot)))
    if config.noise_white > 0:
        data += config.noise_white * rng.standard_normal(data.shape)
    if config.noise_pink > 0:
        data += config.noise_pink * pink_noise(rng, data.shape)

    return TrialEpoch(
        data=data,
        sampling_rate=float(sampling_rate),
        label=expected,
        block=block,
        trigger_sample=n_pre,
    )


def synthesize_dataset(
    config: ForwardModelConfig,
    montage: Montage,
    codebook: StimulusCodebook,
    n_blocks: int,
    duration: float = 0.7,
    sampling_rate: float = 1000.0,
    subject_id: str = "synthetic",
) -> Dataset:
    """Blocks that each traverse every codebook target once in seeded order.

    Epoch payloads are float32, so saving and reloading the dataset
    reproduces the samples bit for bit.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    targets = codebook.targets()
    blocks = []
    for b in range(n_blocks):
        order_rng = np.random.default_rng(np.random.SeedSequence((config.seed, b, _ORDER_TAG)))
        order = order_rng.permutation(len(targets))
        trials = []
        for slot, target_idx in enumerate(order):
            trial = synthesize_trial(
                config,
                montage,
                codebook,
                targets[target_idx],
                duration,
                sampling_rate,
                block=b,
                slot=slot,
            )
            trials.append(
                TrialEpoch(
                    data=trial.data.astype(np.float32),
                    sampling_rate=trial.sampling_rate,
                    label=trial.label,
                    block=trial.block,
                    trigger_sample=trial.trigger_sample,
                )
            )
        blocks.append(tuple(trials))
    return Dataset(
        subject_id=subject_id,
        montage=montage,
        codebook=codebook,
        blocks=tuple(blocks),
        raw_sampling_rate=float(sampling_rate),
    )


def flat_fixation_config(config: ForwardModelConfig) -> ForwardModelConfig:
    """The same generator with all fixation-specific structure removed."""
    return replace(config, fixation_separation=0.0)
