"""SSVEP decoding stack: frequency-phase-space targets, filter-bank
spatiotemporal classification, dynamic windows, electrode selection, and a
seeded synthetic forward model for end-to-end verification."""

__version__ = "0.1.0"

from .codebook import (
    Fixation,
    StimulusCodebook,
    TargetLabel,
    build_codebook,
    enumerate_fixation_combinations,
    luminance_at_frame,
)
from .dataset import Dataset, TrialEpoch, apply_montage, load_dataset, restrict_channels, save_dataset
from .dynwin import DynWinConfig, confidence_weight, decide_output, run_dynamic_session, threshold_value
from .errors import CorruptDataError, DataUnavailableError, InvalidManifestError, NumericalError
from .harness import (
    BenchmarkConfig,
    EvaluationReport,
    PreparedTrials,
    loo_crossvalidate,
    preprocess_dataset,
    run_benchmark,
    subtask_accuracy,
)
from .metrics import itr, snr_at_frequency, spectrum
from .montage import Channel, Montage, default_montage, load_montage, save_montage
from .sigproc import (
    BandSpec,
    FilterBank,
    bandpass_zero_phase,
    decimate,
    default_filter_bank,
    extract_epoch,
    filter_bank_decompose,
)
from .simgen import ForwardModelConfig, synthesize_dataset, synthesize_trial
from .tdca import (
    ScoreVector,
    TdcaConfig,
    TdcaModel,
    band_weight,
    delay_embed,
    load_model,
    save_model,
    score_trial,
    sincos_reference,
    train,
)
