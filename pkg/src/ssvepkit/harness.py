"""Benchmark orchestration: preprocessing, cross-validation, reports.

Datasets are preprocessed once into dense per-band arrays; folds, window
sweeps, channel restrictions, and threshold sweeps all reuse those arrays.
Reports are deterministic for a given dataset and configuration: wall-clock
timing is confined to the run manifest so the CSV outputs are byte-identical
across reruns.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import dynwin as dynwin_mod
from . import metrics
from .codebook import Fixation, StimulusCodebook, TargetLabel
from .dataset import Dataset, apply_montage, load_dataset
from .dynwin import DynWinConfig
from .sigproc import decimate, decompose_array, default_filter_bank, extract_epoch
from .tdca import TdcaConfig, TdcaModel, score_batch, train


@dataclass(frozen=True)
class PreparedTrials:
    """Latency-aligned, decimated, band-decomposed trials of one dataset.

    ``data`` has shape (n_trials, n_bands, n_channels, n_window + tail); the
    tail samples feed the delayed copies during training only.
    """

    data: np.ndarray
    labels: tuple[TargetLabel, ...]
    blocks: np.ndarray
    channel_names: tuple[str, ...]
    sampling_rate: float
    n_window: int
    tail: int
    codebook: StimulusCodebook
    subject_id: str = "unknown"

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def block_ids(self) -> np.ndarray:
        return np.unique(self.blocks)

    def restrict(self, names) -> "PreparedTrials":
        """Keep only the listed channels; their band signals are unchanged.

        Valid because every preprocessing stage acts per channel.
        """
        index_of = {n: i for i, n in enumerate(self.channel_names)}
        missing = [n for n in names if n not in index_of]
        if missing:
            raise KeyError(f"channels not in the prepared data: {missing}")
        rows = [index_of[n] for n in names]
        return replace(self, data=self.data[:, :, rows, :], channel_names=tuple(names))

    def select(self, mask) -> tuple[np.ndarray, list[TargetLabel]]:
        idx = np.nonzero(mask)[0]
        return self.data[idx], [self.labels[i] for i in idx]


def preprocess_dataset(
    dataset: Dataset,
    tdca_config: TdcaConfig = TdcaConfig(),
    latency_s: float = 0.14,
    window_s: float = 0.5,
    target_fs: float = 250.0,
) -> PreparedTrials:
    """Extract, decimate, and band-decompose every trial of a dataset."""
    raw_fs = dataset.raw_sampling_rate
    factor = raw_fs / target_fs
    if abs(factor - round(factor)) > 1e-9 or round(factor) < 1:
        raise ValueError(f"raw rate {raw_fs} Hz is not an integer multiple of {target_fs} Hz")
    factor = int(round(factor))
    tail = tdca_config.delay_order
    n_window = round(window_s * target_fs)
    n_total = n_window + tail

    bank = tdca_config.filter_bank
    stacked = []
    labels = []
    blocks = []
    for trial in dataset.trials():
        epoch = extract_epoch(trial, latency_s, window_s, tail_samples=tail * factor)
        epoch = decimate(epoch, factor)
        if epoch.n_samples < n_total:
            raise ValueError("decimated epoch shorter than window + tail")
        bands = decompose_array(epoch.data[:, :n_total], bank, target_fs)
        stacked.append(bands)
        labels.append(trial.label)
        blocks.append(trial.block)
    return PreparedTrials(
        data=np.stack(stacked),
        labels=tuple(labels),
        blocks=np.array(blocks),
        channel_names=dataset.montage.names,
        sampling_rate=target_fs,
        n_window=n_window,
        tail=tail,
        codebook=dataset.codebook,
        subject_id=dataset.subject_id,
    )


def train_on_prepared(prepared: PreparedTrials, tdca_config: TdcaConfig, mask=None) -> TdcaModel:
    data, labels = (prepared.data, list(prepared.labels)) if mask is None else prepared.select(mask)
    return train(
        data,
        labels,
        prepared.codebook,
        prepared.sampling_rate,
        prepared.n_window,
        tdca_config,
        prepared.channel_names,
    )


def loo_window_scores(
    prepared: PreparedTrials,
    tdca_config: TdcaConfig,
    windows,
    n_jobs: int = 1,
) -> np.ndarray:
    """Leave-one-block-out score matrix, shape (n_trials, n_windows, n_classes).

    Each trial is scored by the model trained without its block.
    """
    block_ids = prepared.block_ids
    if len(block_ids) < 2:
        raise ValueError("leave-one-out needs at least two blocks")
    fs = prepared.sampling_rate
    n_keeps = [round(w * fs) for w in windows]
    if any(k < 1 or k > prepared.n_window for k in n_keeps):
        raise ValueError("every window must fit inside the trained window length")

    n_classes = prepared.codebook.n_targets
    scores = np.empty((prepared.n_trials, len(windows), n_classes))

    def fold(held_out):
        train_mask = prepared.blocks != held_out
        if np.any(prepared.blocks[train_mask] == held_out):
            raise AssertionError("held-out block leaked into the training fold")
        model = train_on_prepared(prepared, tdca_config, mask=train_mask)
        test_idx = np.nonzero(~train_mask)[0]
        fold_scores = np.empty((len(test_idx), len(windows), n_classes))
        for k, n_keep in enumerate(n_keeps):
            fold_scores[:, k] = score_batch(model, prepared.data[test_idx], n_keep)
        return test_idx, fold_scores

    if n_jobs == 1:
        results = [fold(b) for b in block_ids]
    else:
        results = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(fold)(b) for b in block_ids
        )
    for test_idx, fold_scores in results:
        scores[test_idx] = fold_scores
    return scores


@dataclass(frozen=True)
class WindowResult:
    """Aggregate outcome of one window length; ITRs derive from the fields."""

    window: float
    cue_time: float
    n_targets: int
    n_trials: int
    n_correct: int
    confusion: np.ndarray  # rows true class, columns predicted

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_trials

    @property
    def itr_actual_bpm(self) -> float:
        return metrics.itr(self.n_targets, self.accuracy, self.window + self.cue_time, "bpm")

    @property
    def itr_theoretical_bps(self) -> float:
        return metrics.itr(self.n_targets, self.accuracy, self.window, "bps")


@dataclass(frozen=True)
class TrialRecord:
    block: int
    slot: int
    window: float
    true_label: int
    predicted_label: int
    best_score: float
    margin: float
    correct: bool


@dataclass(frozen=True)
class EvaluationReport:
    subject_id: str
    subset: str
    classes: tuple[TargetLabel, ...]
    windows: tuple[WindowResult, ...]
    trials: tuple[TrialRecord, ...]

    def window_result(self, window: float) -> WindowResult:
        for wr in self.windows:
            if abs(wr.window - window) < 1e-12:
                return wr
        raise KeyError(f"no result for window {window}")

    def accuracy(self, window: float) -> float:
        return self.window_result(window).accuracy


def _block_slots(blocks: np.ndarray) -> np.ndarray:
    slots = np.zeros(len(blocks), dtype=int)
    counter: dict[int, int] = {}
    for i, b in enumerate(blocks):
        slots[i] = counter.get(b, 0)
        counter[b] = slots[i] + 1
    return slots


def report_from_scores(
    prepared: PreparedTrials,
    scores: np.ndarray,
    windows,
    cue_time: float,
    subset: str = "",
) -> EvaluationReport:
    classes = tuple(prepared.codebook.targets())
    index_of = {c.numeric_label: i for i, c in enumerate(classes)}
    truth = np.array([index_of[lab.numeric_label] for lab in prepared.labels])
    slots = _block_slots(prepared.blocks)

    window_results = []
    records = []
    for k, w in enumerate(windows):
        sk = scores[:, k, :]
        pred = np.argmax(sk, axis=1)
        confusion = np.zeros((len(classes), len(classes)), dtype=int)
        np.add.at(confusion, (truth, pred), 1)
        n_correct = int(np.sum(pred == truth))
        window_results.append(
            WindowResult(
                window=float(w),
                cue_time=float(cue_time),
                n_targets=len(classes),
                n_trials=len(truth),
                n_correct=n_correct,
                confusion=confusion,
            )
        )
        best = sk[np.arange(len(truth)), pred]
        second = np.partition(sk, -2, axis=1)[:, -2]
        for i in range(len(truth)):
            records.append(
                TrialRecord(
                    block=int(prepared.blocks[i]),
                    slot=int(slots[i]),
                    window=float(w),
                    true_label=classes[truth[i]].numeric_label,
                    predicted_label=classes[pred[i]].numeric_label,
                    best_score=float(best[i]),
                    margin=float(best[i] - second[i]),
                    correct=bool(pred[i] == truth[i]),
                )
            )
    return EvaluationReport(
        subject_id=prepared.subject_id,
        subset=subset,
        classes=classes,
        windows=tuple(window_results),
        trials=tuple(records),
    )


def loo_crossvalidate(
    source,
    windows=(0.1, 0.2, 0.3, 0.4, 0.5),
    cue_time: float = 0.5,
    tdca_config: TdcaConfig = TdcaConfig(),
    subset: str | None = None,
    latency_s: float = 0.14,
    train_window_s: float = 0.5,
    target_fs: float = 250.0,
    n_jobs: int = 1,
) -> EvaluationReport:
    """Hold out each block in turn; train on the rest; score every window."""
    prepared = _as_prepared(source, tdca_config, subset, latency_s, train_window_s, target_fs)
    scores = loo_window_scores(prepared, tdca_config, windows, n_jobs)
    return report_from_scores(prepared, scores, windows, cue_time, subset=subset or "")


def evaluate_model(
    model: TdcaModel,
    prepared: PreparedTrials,
    windows=(0.1, 0.2, 0.3, 0.4, 0.5),
    cue_time: float = 0.5,
    subset: str = "",
) -> EvaluationReport:
    """Score all trials with one fixed model (train-once, evaluate-later)."""
    if tuple(model.channel_names) != tuple(prepared.channel_names):
        raise ValueError("model channels do not match the prepared data")
    fs = prepared.sampling_rate
    scores = np.empty((prepared.n_trials, len(windows), model.n_classes))
    for k, w in enumerate(windows):
        scores[:, k] = score_batch(model, prepared.data, round(w * fs))
    return report_from_scores(prepared, scores, windows, cue_time, subset=subset)


@dataclass(frozen=True)
class SubtaskResult:
    """Accuracy of a restricted argmax using a model trained on the full task."""

    restriction: str
    overall: float
    per_group: dict


def subtask_accuracy_from_scores(
    scores: np.ndarray, labels, classes, restriction: str
) -> SubtaskResult:
    """Restrict the argmax to the trial's own flicker ("fixation") or
    fixation ("flicker") group and measure the remaining decision."""
    classes = tuple(classes)
    flicker_of = np.array([c.flicker_index for c in classes])
    fixation_of = [c.fixation for c in classes]
    labels = list(labels)
    if scores.shape != (len(labels), len(classes)):
        raise ValueError("scores must be (n_trials, n_classes)")

    correct = np.zeros(len(labels), dtype=bool)
    group_hits: dict = {}
    if restriction == "fixation":
        for i, lab in enumerate(labels):
            members = np.nonzero(flicker_of == lab.flicker_index)[0]
            if members.size == 0:
                raise ValueError(f"flicker {lab.flicker_index} absent from the model classes")
            winner = members[np.argmax(scores[i, members])]
            correct[i] = fixation_of[winner] == lab.fixation
            group_hits.setdefault(lab.flicker_index, []).append(correct[i])
    elif restriction == "flicker":
        for i, lab in enumerate(labels):
            members = np.nonzero([f == lab.fixation for f in fixation_of])[0]
            if members.size == 0:
                raise ValueError(f"fixation {lab.fixation.value} absent from the model classes")
            winner = members[np.argmax(scores[i, members])]
            correct[i] = flicker_of[winner] == lab.flicker_index
            group_hits.setdefault(lab.fixation.value, []).append(correct[i])
    else:
        raise ValueError(f"unknown restriction {restriction!r}")
    per_group = {g: float(np.mean(hits)) for g, hits in sorted(group_hits.items(), key=lambda kv: str(kv[0]))}
    return SubtaskResult(
        restriction=restriction, overall=float(correct.mean()), per_group=per_group
    )


def subtask_accuracy(
    model: TdcaModel, trials: np.ndarray, labels, restriction: str, window_s: float
) -> SubtaskResult:
    """One-shot form: score band-decomposed trials, then restrict the argmax."""
    n_keep = round(window_s * model.sampling_rate)
    scores = score_batch(model, np.asarray(trials, dtype=float), n_keep)
    return subtask_accuracy_from_scores(scores, labels, model.classes, restriction)


def loo_subtask(
    prepared: PreparedTrials,
    tdca_config: TdcaConfig,
    windows,
    restriction: str,
    n_jobs: int = 1,
) -> dict[float, SubtaskResult]:
    """Leave-one-block-out subtask accuracy at each window."""
    scores = loo_window_scores(prepared, tdca_config, windows, n_jobs)
    classes = tuple(prepared.codebook.targets())
    return {
        float(w): subtask_accuracy_from_scores(scores[:, k], prepared.labels, classes, restriction)
        for k, w in enumerate(windows)
    }


def _as_prepared(source, tdca_config, subset, latency_s, train_window_s, target_fs):
    if isinstance(source, PreparedTrials):
        if subset:
            raise ValueError("apply montage subsets before preprocessing")
        return source
    dataset = source
    if subset:
        dataset = apply_montage(dataset, subset)
    return preprocess_dataset(dataset, tdca_config, latency_s, train_window_s, target_fs)


# ---------------------------------------------------------------------------
# Benchmark configuration and report files


def _tdca_to_dict(cfg: TdcaConfig) -> dict:
    return {
        "delay_order": cfg.delay_order,
        "n_harmonics": cfg.n_harmonics,
        "n_components": cfg.n_components,
        "ridge_epsilon": cfg.ridge_epsilon,
        "n_bands": cfg.filter_bank.n_bands,
        "weight_a": cfg.weight_a,
        "weight_b": cfg.weight_b,
        "center_channels": cfg.center_channels,
    }


def _tdca_from_dict(d: dict) -> TdcaConfig:
    d = dict(d)
    n_bands = d.pop("n_bands", 5)
    return TdcaConfig(filter_bank=default_filter_bank(n_bands), **d)


@dataclass(frozen=True)
class BenchmarkConfig:
    """One JSON-loadable description of a full evaluation run."""

    dataset: str | None = None
    output: str | None = None
    subset: str | None = None
    windows: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    train_window: float = 0.5
    cue_time: float = 0.5
    latency: float = 0.14
    target_fs: float = 250.0
    fixations: tuple[str, ...] | None = None  # validated against the dataset
    n_targets: int | None = None  # validated against the dataset
    tdca: TdcaConfig = field(default_factory=TdcaConfig)
    dynwin_enabled: bool = False
    dynwin: DynWinConfig = field(default_factory=DynWinConfig)
    s_range: tuple[int, int] = (1, 50)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not self.windows or any(w <= 0 for w in self.windows):
            raise ValueError("windows must be positive")
        if max(self.windows) > self.train_window + 1e-12:
            raise ValueError("evaluation windows cannot exceed the training window")
        if self.s_range[0] < 1 or self.s_range[1] < self.s_range[0]:
            raise ValueError("s_range must be an increasing 1-based pair")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "output": self.output,
            "subset": self.subset,
            "windows": list(self.windows),
            "train_window": self.train_window,
            "cue_time": self.cue_time,
            "latency": self.latency,
            "target_fs": self.target_fs,
            "fixations": list(self.fixations) if self.fixations else None,
            "n_targets": self.n_targets,
            "tdca": _tdca_to_dict(self.tdca),
            "dynwin_enabled": self.dynwin_enabled,
            "dynwin_windows": list(self.dynwin.windows),
            "n_thresholds": self.dynwin.n_thresholds,
            "s_range": list(self.s_range),
            "seed": self.seed,
            "n_jobs": self.n_jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        d = dict(d)
        tdca_cfg = _tdca_from_dict(d.pop("tdca", {}))
        dyn = DynWinConfig(
            windows=tuple(d.pop("dynwin_windows", DynWinConfig().windows)),
            n_thresholds=int(d.pop("n_thresholds", DynWinConfig().n_thresholds)),
        )
        keep = {
            "dataset", "output", "subset", "windows", "train_window", "cue_time",
            "latency", "target_fs", "fixations", "n_targets", "dynwin_enabled",
            "s_range", "seed", "n_jobs",
        }
        kwargs = {k: v for k, v in d.items() if k in keep}
        for name in ("windows", "fixations", "s_range"):
            if kwargs.get(name) is not None:
                kwargs[name] = tuple(kwargs[name])
        return cls(tdca=tdca_cfg, dynwin=dyn, **kwargs)

    @classmethod
    def from_file(cls, path) -> "BenchmarkConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def write_report_files(
    report: EvaluationReport, out_dir, sessions=None, manifest_extra: dict | None = None
) -> None:
    """Write metrics/trials/confusion CSVs plus the run manifest.

    All CSV content is deterministic; wall-clock and environment details live
    only in run_manifest.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["subject,subset,n_targets,window_s,cue_s,n_trials,n_correct,accuracy,itr_actual_bpm,itr_theoretical_bps"]
    for wr in report.windows:
        lines.append(
            ",".join(
                [
                    report.subject_id,
                    report.subset,
                    str(wr.n_targets),
                    _fmt(wr.window),
                    _fmt(wr.cue_time),
                    str(wr.n_trials),
                    str(wr.n_correct),
                    _fmt(wr.accuracy),
                    _fmt(wr.itr_actual_bpm),
                    _fmt(wr.itr_theoretical_bps),
                ]
            )
        )
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")

    lines = ["block,slot,window_s,true_label,predicted_label,best_score,margin,correct"]
    for tr in report.trials:
        lines.append(
            f"{tr.block},{tr.slot},{_fmt(tr.window)},{tr.true_label},{tr.predicted_label},"
            f"{_fmt(tr.best_score)},{_fmt(tr.margin)},{int(tr.correct)}"
        )
    (out / "trials.csv").write_text("\n".join(lines) + "\n")

    label_row = ",".join(str(c.numeric_label) for c in report.classes)
    for wr in report.windows:
        lines = ["true_label\\predicted," + label_row]
        for i, c in enumerate(report.classes):
            lines.append(f"{c.numeric_label}," + ",".join(str(v) for v in wr.confusion[i]))
        (out / f"confusion_{wr.window:g}s.csv").write_text("\n".join(lines) + "\n")

    if sessions is not None:
        lines = ["s,threshold,mean_output_time_s,accuracy,itr_actual_bpm,n_emitted_early"]
        for ses in sessions:
            lines.append(
                ",".join(
                    [
                        str(ses.threshold_index),
                        _fmt(dynwin_mod.threshold_value(ses.threshold_index)),
                        _fmt(ses.mean_output_time),
                        _fmt(ses.accuracy) if ses.accuracy is not None else "",
                        _fmt(ses.itr_bpm) if ses.itr_bpm is not None else "",
                        str(int(ses.emitted_early.sum())),
                    ]
                )
            )
        (out / "dynwin.csv").write_text("\n".join(lines) + "\n")

    manifest = {
        "subject": report.subject_id,
        "subset": report.subset,
        "n_targets": len(report.classes),
        "n_trials": report.windows[0].n_trials if report.windows else 0,
        "windows": [wr.window for wr in report.windows],
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2))


def _restrict_fixations(dataset: Dataset, fixations) -> Dataset:
    """Keep only trials whose fixation is in the requested combination.

    Relabels against a codebook whose fixation tuple is the combination, so
    numeric labels stay dense (1..n_targets) for the restricted task.
    """
    wanted = tuple(Fixation.parse(f) for f in fixations)
    have = set(dataset.codebook.fixation_points)
    missing = [f.value for f in wanted if f not in have]
    if missing:
        raise ValueError(f"dataset lacks fixation points: {', '.join(missing)}")
    if wanted == tuple(dataset.codebook.fixation_points):
        return dataset
    codebook = replace(dataset.codebook, fixation_points=wanted)
    keep = set(wanted)
    blocks = tuple(
        tuple(
            replace(t, label=codebook.label_for(t.label.flicker_index, t.label.fixation))
            for t in block
            if t.label.fixation in keep
        )
        for block in dataset.blocks
    )
    return replace(dataset, codebook=codebook, blocks=blocks)


def run_benchmark(config: BenchmarkConfig):
    """Execute a configured evaluation run and write its report files."""
    if not config.dataset:
        raise ValueError("config must name a dataset directory")
    if not config.output:
        raise ValueError("config must name an output directory")
    started = time.time()
    dataset = load_dataset(config.dataset)
    if config.subset:
        dataset = apply_montage(dataset, config.subset)
    if config.fixations is not None:
        dataset = _restrict_fixations(dataset, config.fixations)
    if config.n_targets is not None and dataset.codebook.n_targets != config.n_targets:
        raise ValueError(
            f"dataset has {dataset.codebook.n_targets} targets, config expects {config.n_targets}"
        )

    prepared = preprocess_dataset(
        dataset, config.tdca, config.latency, config.train_window, config.target_fs
    )

    eval_windows = list(config.windows)
    dyn_windows = list(config.dynwin.windows) if config.dynwin_enabled else []
    all_windows = sorted(set(eval_windows) | set(dyn_windows))
    scores = loo_window_scores(prepared, config.tdca, all_windows, config.n_jobs)
    col = {w: k for k, w in enumerate(all_windows)}

    report = report_from_scores(
        prepared,
        scores[:, [col[w] for w in eval_windows], :],
        eval_windows,
        config.cue_time,
        subset=config.subset or "",
    )
    sessions = None
    if config.dynwin_enabled:
        dyn_scores = scores[:, [col[w] for w in dyn_windows], :]
        classes = tuple(prepared.codebook.targets())
        sessions = [
            dynwin_mod.session_from_scores(
                dyn_scores, dyn_windows, s, classes, prepared.labels, config.cue_time
            )
            for s in range(config.s_range[0], config.s_range[1] + 1)
        ]

    manifest_extra = {
        "config": config.to_dict(),
        "wall_clock_s": time.time() - started,
    }
    write_report_files(report, config.output, sessions=sessions, manifest_extra=manifest_extra)
    return report
