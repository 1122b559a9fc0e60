"""Task-discriminant spatiotemporal filtering and template scoring.

Training, per sub-band: delay-embed each trial, augment it with its
projection onto the class's sine-cosine reference subspace, average trials
into class templates, and solve a Fisher criterion (between-class versus
within-class scatter) for the spatiotemporal filter. Scoring correlates the
filtered test window against each class's reduced template and fuses the
sub-band correlations with the weight m^(-a) + b.

Matrix conventions: a trial's embedded matrix is D x N_p with
D = (delay_order + 1) * n_channels; augmented matrices are D x 2*N_p; the
filter W is D x n_components; reduced templates are 2*N_p x n_components.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .codebook import Fixation, StimulusCodebook, TargetLabel
from .dataset import TrialEpoch
from .errors import CorruptDataError, NumericalError
from .sigproc import FilterBank, decompose_array, default_filter_bank


@dataclass(frozen=True)
class TdcaConfig:
    delay_order: int = 4
    n_harmonics: int = 5
    n_components: int = 8
    ridge_epsilon: float = 1e-6
    filter_bank: FilterBank = field(default_factory=default_filter_bank)
    weight_a: float = 1.25
    weight_b: float = 0.25
    center_channels: bool = False

    def __post_init__(self):
        if self.delay_order < 0:
            raise ValueError("delay_order must be >= 0")
        if self.n_harmonics < 1 or self.n_components < 1:
            raise ValueError("n_harmonics and n_components must be >= 1")
        if self.ridge_epsilon < 0:
            raise ValueError("ridge_epsilon must be >= 0")


def band_weight(m: int, a: float = 1.25, b: float = 0.25) -> float:
    """Fusion weight of sub-band m (1-based): m^(-a) + b."""
    if m < 1:
        raise ValueError("sub-band index is 1-based")
    return m ** (-a) + b


def delay_embed(data: np.ndarray, n_window: int, delay_order: int) -> np.ndarray:
    """Stack delayed copies: row blocks are the window shifted 0..delay_order.

    Shifted positions beyond the available samples are zero; extra trailing
    samples (beyond ``n_window``) supply real data to the shifted blocks.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("expected a channels x samples matrix")
    if n_window < 1:
        raise ValueError("n_window must be >= 1")
    if delay_order < 0:
        raise ValueError("delay_order must be >= 0")
    return _embed_batch(data[None], n_window, delay_order)[0]


def _embed_batch(trials: np.ndarray, n_window: int, delay_order: int) -> np.ndarray:
    n, n_ch, n_avail = trials.shape
    out = np.zeros((n, (delay_order + 1) * n_ch, n_window))
    for j in range(delay_order + 1):
        avail = min(n_window, n_avail - j)
        if avail > 0:
            out[:, j * n_ch : (j + 1) * n_ch, :avail] = trials[:, :, j : j + avail]
    return out


def sincos_reference(
    frequency: float, n_harmonics: int, sampling_rate: float, n_samples: int
) -> np.ndarray:
    """Rows sin(2*pi*h*f*t), cos(2*pi*h*f*t) for h = 1..n_harmonics."""
    if n_harmonics < 1:
        raise ValueError("n_harmonics must be >= 1")
    if n_harmonics * frequency >= sampling_rate / 2:
        raise ValueError(
            f"harmonic {n_harmonics}x{frequency} Hz reaches Nyquist at fs={sampling_rate}"
        )
    t = np.arange(n_samples) / sampling_rate
    rows = []
    for h in range(1, n_harmonics + 1):
        arg = 2.0 * np.pi * h * frequency * t
        rows.append(np.sin(arg))
        rows.append(np.cos(arg))
    return np.array(rows)


def _projector_factor(reference: np.ndarray) -> np.ndarray:
    """M = (Y Y^T)^(-1) Y, so that the projector is Y^T M.

    A rank-deficient Gram matrix gets one ridge retry before giving up, so
    duplicated reference rows (aliased harmonics) degrade instead of failing.
    """
    gram = reference @ reference.T
    try:
        factor = scipy.linalg.solve(gram, reference, assume_a="pos")
        if np.all(np.isfinite(factor)):
            return factor
    except scipy.linalg.LinAlgError:
        pass
    ridge = 1e-10 * max(np.trace(gram) / max(gram.shape[0], 1), 1.0)
    try:
        factor = scipy.linalg.solve(gram + ridge * np.eye(gram.shape[0]), reference)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"reference rows are rank-deficient: {exc}") from exc
    if not np.all(np.isfinite(factor)):
        raise NumericalError("reference projector did not stabilize under ridge")
    return factor


def sincos_projector(reference: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the row space of the reference matrix."""
    return reference.T @ _projector_factor(reference)


def project_augment(x_embedded: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """[X, X P]: the embedded matrix beside its reference-subspace projection."""
    if x_embedded.shape[1] != reference.shape[1]:
        raise ValueError("embedded matrix and reference must share the sample axis")
    factor = _projector_factor(reference)
    projected = (x_embedded @ reference.T) @ factor
    return np.hstack([x_embedded, projected])


def class_templates(trials, labels, classes=None) -> dict:
    """Arithmetic mean of each class's trials, keyed by class label."""
    trials = np.asarray(trials, dtype=float)
    labels = list(labels)
    if len(trials) != len(labels):
        raise ValueError("one label per trial required")
    if classes is None:
        classes = sorted(set(labels))
    out = {}
    for c in classes:
        rows = [i for i, lab in enumerate(labels) if lab == c]
        if not rows:
            raise ValueError(f"class {c!r} has no trials")
        out[c] = trials[rows].mean(axis=0)
    return out


def discriminant_scatters(trials, labels) -> tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of trial matrices.

    Between: mean over classes of (class mean - global mean) outer products;
    within: mean over trials of (trial - class mean) outer products. Matrices
    accumulate over the sample axis, giving D x D scatters.
    """
    trials = np.asarray(trials, dtype=float)
    if trials.ndim == 2:
        trials = trials[:, :, None]
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    dim = trials.shape[1]

    class_means = np.stack([trials[labels == c].mean(axis=0) for c in classes])
    global_mean = trials.mean(axis=0)

    dev_b = (class_means - global_mean).transpose(1, 0, 2).reshape(dim, -1)
    s_between = (dev_b @ dev_b.T) / len(classes)

    index_of = {c: k for k, c in enumerate(classes)}
    rows = np.array([index_of[c] for c in labels.tolist()])
    dev_w = (trials - class_means[rows]).transpose(1, 0, 2).reshape(dim, -1)
    s_within = (dev_w @ dev_w.T) / len(trials)
    return s_between, s_within


def fit_spatiotemporal_filter(
    trials, labels, n_components: int, epsilon: float = 1e-6
) -> np.ndarray:
    """Top generalized eigenvectors of the between/within scatter pencil.

    Solves S_b w = lambda (S_w + eps*I') w with I' scaled to S_w's mean
    diagonal, returning unit-norm columns ordered by descending eigenvalue.
    """
    trials = np.asarray(trials, dtype=float)
    if not np.all(np.isfinite(trials)):
        raise ValueError("trials contain non-finite values")
    s_between, s_within = discriminant_scatters(trials, labels)
    dim = s_between.shape[0]
    if not 1 <= n_components <= dim:
        raise ValueError(f"n_components must be in 1..{dim}")
    scale = np.trace(s_within) / dim
    if scale == 0.0:
        scale = 1.0
    ridge = epsilon * scale * np.eye(dim)
    try:
        eigvals, eigvecs = scipy.linalg.eigh(
            (s_between + s_between.T) / 2.0, s_within + ridge
        )
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"generalized eigensolve failed: {exc}") from exc
    order = np.argsort(eigvals)[::-1][:n_components]
    w = eigvecs[:, order]
    return w / np.linalg.norm(w, axis=0, keepdims=True)


@dataclass(frozen=True)
class ScoreVector:
    """Per-class fused scores plus the argmax decision."""

    scores: np.ndarray
    classes: tuple[TargetLabel, ...]

    @property
    def best_index(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest class index
        return int(np.argmax(self.scores))

    @property
    def predicted(self) -> TargetLabel:
        return self.classes[self.best_index]

    @property
    def margin(self) -> float:
        """Best score minus second best."""
        if len(self.scores) < 2:
            return float("inf")
        top = np.partition(self.scores, -2)[-2:]
        return float(top[1] - top[0])


@dataclass
class TdcaModel:
    """Trained sub-band filters and reduced class templates."""

    sampling_rate: float
    n_window: int
    delay_order: int
    n_harmonics: int
    n_components: int
    weight_a: float
    weight_b: float
    center_channels: bool
    filter_bank: FilterBank
    codebook: StimulusCodebook
    classes: tuple[TargetLabel, ...]
    channel_names: tuple[str, ...]
    filters: np.ndarray  # (n_bands, D, n_components)
    templates: np.ndarray  # (n_bands, n_classes, 2*n_window, n_components)

    @property
    def n_bands(self) -> int:
        return self.filter_bank.n_bands

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def band_weights(self) -> np.ndarray:
        return np.array(
            [band_weight(m, self.weight_a, self.weight_b) for m in range(1, self.n_bands + 1)]
        )

    @cached_property
    def _flicker_groups(self) -> list[tuple[int, np.ndarray]]:
        """Class indices grouped by flicker; one reference per group."""
        groups: dict[int, list[int]] = {}
        for i, c in enumerate(self.classes):
            groups.setdefault(c.flicker_index, []).append(i)
        return [(f, np.array(idx)) for f, idx in sorted(groups.items())]

    @cached_property
    def _references(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        refs = {}
        for flicker, _ in self._flicker_groups:
            y = sincos_reference(
                self.codebook.frequency(flicker),
                self.n_harmonics,
                self.sampling_rate,
                self.n_window,
            )
            refs[flicker] = (y, _projector_factor(y))
        return refs

    @cached_property
    def _template_vectors(self) -> np.ndarray:
        """Centered unit-norm template vectors; zero rows mark flat templates."""
        flat = self.templates.reshape(self.n_bands, self.n_classes, -1)
        centered = flat - flat.mean(axis=2, keepdims=True)
        norms = np.linalg.norm(centered, axis=2, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        return np.where(norms > 0, centered / safe, 0.0)


def train(
    trials: np.ndarray,
    labels,
    codebook: StimulusCodebook,
    sampling_rate: float,
    n_window: int,
    config: TdcaConfig = TdcaConfig(),
    channel_names=None,
) -> TdcaModel:
    """Fit filters and templates from band-decomposed training trials.

    ``trials`` has shape (n_trials, n_bands, n_channels, n_samples) with
    n_samples >= n_window; samples beyond the window feed the delayed copies.
    Every codebook target must appear at least once in ``labels``.
    """
    trials = np.asarray(trials, dtype=float)
    if trials.ndim != 4:
        raise ValueError("expected trials of shape (n_trials, n_bands, n_channels, n_samples)")
    if not np.all(np.isfinite(trials)):
        raise ValueError("training trials contain non-finite values")
    n_trials, n_bands, n_ch, _ = trials.shape
    if n_bands != config.filter_bank.n_bands:
        raise ValueError(
            f"trials carry {n_bands} bands but the filter bank defines {config.filter_bank.n_bands}"
        )
    labels = list(labels)
    if len(labels) != n_trials:
        raise ValueError("one label per trial required")

    classes = tuple(codebook.targets())
    numeric_of = {c.numeric_label: i for i, c in enumerate(classes)}
    try:
        trial_class = np.array([numeric_of[lab.numeric_label] for lab in labels])
    except KeyError as exc:
        raise ValueError(f"trial label {exc} is not a codebook target") from exc
    present = set(trial_class.tolist())
    missing = [c.numeric_label for i, c in enumerate(classes) if i not in present]
    if missing:
        raise ValueError(f"training data missing codebook targets: {missing}")

    if channel_names is None:
        channel_names = tuple(f"ch{i:02d}" for i in range(n_ch))
    channel_names = tuple(channel_names)
    if len(channel_names) != n_ch:
        raise ValueError("channel_names length must match the channel axis")

    dim = (config.delay_order + 1) * n_ch
    if config.n_components > dim:
        raise ValueError(f"n_components={config.n_components} exceeds filter dimension {dim}")

    refs = {}
    for c in classes:
        if c.flicker_index not in refs:
            y = sincos_reference(
                codebook.frequency(c.flicker_index), config.n_harmonics, sampling_rate, n_window
            )
            refs[c.flicker_index] = (y, _projector_factor(y))
    flicker_of_class = np.array([c.flicker_index for c in classes])

    filters = np.empty((n_bands, dim, config.n_components))
    templates = np.empty((n_bands, len(classes), 2 * n_window, config.n_components))
    for m in range(n_bands):
        band = trials[:, m]
        if config.center_channels:
            band = band - band.mean(axis=-1, keepdims=True)
        embedded = _embed_batch(band, n_window, config.delay_order)
        augmented = np.empty((n_trials, dim, 2 * n_window))
        augmented[:, :, :n_window] = embedded
        for flicker in np.unique(flicker_of_class[trial_class]):
            y, factor = refs[flicker]
            rows = np.nonzero(flicker_of_class[trial_class] == flicker)[0]
            augmented[rows, :, n_window:] = (embedded[rows] @ y.T) @ factor
        filters[m] = fit_spatiotemporal_filter(
            augmented, trial_class, config.n_components, config.ridge_epsilon
        )
        for i in range(len(classes)):
            mean = augmented[trial_class == i].mean(axis=0)
            templates[m, i] = mean.T @ filters[m]

    return TdcaModel(
        sampling_rate=float(sampling_rate),
        n_window=int(n_window),
        delay_order=config.delay_order,
        n_harmonics=config.n_harmonics,
        n_components=config.n_components,
        weight_a=config.weight_a,
        weight_b=config.weight_b,
        center_channels=config.center_channels,
        filter_bank=config.filter_bank,
        codebook=codebook,
        classes=classes,
        channel_names=channel_names,
        filters=filters,
        templates=templates,
    )


def score_batch(model: TdcaModel, trials: np.ndarray, n_keep: int) -> np.ndarray:
    """Fused per-class scores for band-decomposed trials, shape (n, n_classes).

    Only the first ``n_keep`` samples of each trial count as observed; the
    embedded window is zero-padded beyond them.
    """
    trials = np.asarray(trials, dtype=float)
    if trials.ndim != 4:
        raise ValueError("expected trials of shape (n_trials, n_bands, n_channels, n_samples)")
    n, n_bands, n_ch, n_samples = trials.shape
    if n_bands != model.n_bands or n_ch != model.n_channels:
        raise ValueError("trial axes do not match the model's bands/channels")
    if not 1 <= n_keep <= n_samples:
        raise ValueError(f"n_keep must be in 1..{n_samples}")
    # test-side rule: at most n_window samples are observed, never the
    # training tail; shorter windows zero-pad inside the embedding
    n_keep = min(n_keep, model.n_window)

    weights = model.band_weights
    template_vecs = model._template_vectors
    scores = np.zeros((n, model.n_classes))
    for m in range(n_bands):
        band = trials[:, m, :, :n_keep]
        if model.center_channels:
            band = band - band.mean(axis=-1, keepdims=True)
        embedded = _embed_batch(band, model.n_window, model.delay_order)
        u = embedded.transpose(0, 2, 1) @ model.filters[m]  # (n, N_p, N_s)
        for flicker, idx in model._flicker_groups:
            y, factor = model._references[flicker]
            pu = y.T @ (factor @ u)
            v = np.concatenate([u, pu], axis=1).reshape(n, -1)
            v = v - v.mean(axis=1, keepdims=True)
            norms = np.linalg.norm(v, axis=1, keepdims=True)
            np.divide(v, norms, out=v, where=norms > 0)
            r = v @ template_vecs[m, idx].T
            scores[:, idx] += weights[m] * r**2
    return scores


def score_trial(model: TdcaModel, trial, duration: float, latency_s: float = 0.0) -> ScoreVector:
    """Score one trial using its first ``duration`` seconds of data.

    ``trial`` may be a TrialEpoch at the model's sampling rate, a raw
    channels x samples array, or an already band-decomposed
    (n_bands, channels, samples) array.
    """
    fs = model.sampling_rate
    if isinstance(trial, TrialEpoch):
        if abs(trial.sampling_rate - fs) > 1e-9:
            raise ValueError(
                f"trial at {trial.sampling_rate} Hz does not match the model's {fs} Hz"
            )
        start = trial.trigger_sample + round(latency_s * fs)
        data = np.asarray(trial.data, dtype=float)[:, start:]
        bands = decompose_array(data, model.filter_bank, fs)
    else:
        arr = np.asarray(trial, dtype=float)
        if arr.ndim == 2:
            bands = decompose_array(arr, model.filter_bank, fs)
        elif arr.ndim == 3:
            bands = arr
        else:
            raise ValueError("trial must be 2-D raw data or 3-D band-decomposed data")
    n_keep = round(duration * fs)
    if n_keep < 1:
        raise ValueError("duration too short for one sample")
    if n_keep > model.n_window:
        raise ValueError(
            f"duration {duration} s exceeds the model's {model.n_window / fs} s window"
        )
    if n_keep > bands.shape[-1]:
        raise ValueError("trial does not contain the requested duration")
    scores = score_batch(model, bands[None], n_keep)[0]
    return ScoreVector(scores=scores, classes=model.classes)


_MODEL_MAGIC = b"TDCAMDL1"


def save_model(model: TdcaModel, path) -> None:
    """Versioned binary serialization: JSON header + raw little-endian arrays."""
    header = {
        "version": 1,
        "sampling_rate": model.sampling_rate,
        "n_window": model.n_window,
        "delay_order": model.delay_order,
        "n_harmonics": model.n_harmonics,
        "n_components": model.n_components,
        "weight_a": model.weight_a,
        "weight_b": model.weight_b,
        "center_channels": model.center_channels,
        "filter_bank": model.filter_bank.to_dict(),
        "codebook": model.codebook.to_dict(),
        "classes": [
            {"flicker": c.flicker_index, "fixation": c.fixation.value, "label": c.numeric_label}
            for c in model.classes
        ],
        "channel_names": list(model.channel_names),
        "arrays": ["filters", "templates"],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in (model.filters, model.templates):
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> TdcaModel:
    raw = Path(path).read_bytes()
    if raw[: len(_MODEL_MAGIC)] != _MODEL_MAGIC:
        raise CorruptDataError(f"{path}: not a model file (bad magic)")
    offset = len(_MODEL_MAGIC)
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    try:
        header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptDataError(f"{path}: unreadable model header: {exc}") from exc
    offset += header_len

    arrays = []
    for _ in header["arrays"]:
        (rank,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        shape = struct.unpack_from(f"<{rank}Q", raw, offset)
        offset += 8 * rank
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        arrays.append(arr.astype(float))
    if offset != len(raw):
        raise CorruptDataError(f"{path}: trailing bytes after model arrays")

    codebook = StimulusCodebook.from_dict(header["codebook"])
    classes = tuple(
        TargetLabel(int(c["flicker"]), Fixation.parse(c["fixation"]), int(c["label"]))
        for c in header["classes"]
    )
    return TdcaModel(
        sampling_rate=float(header["sampling_rate"]),
        n_window=int(header["n_window"]),
        delay_order=int(header["delay_order"]),
        n_harmonics=int(header["n_harmonics"]),
        n_components=int(header["n_components"]),
        weight_a=float(header["weight_a"]),
        weight_b=float(header["weight_b"]),
        center_channels=bool(header["center_channels"]),
        filter_bank=FilterBank.from_dict(header["filter_bank"]),
        codebook=codebook,
        classes=classes,
        channel_names=tuple(header["channel_names"]),
        filters=arrays[0],
        templates=arrays[1],
    )
