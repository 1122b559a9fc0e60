"""Dynamic-window classification: emit early once the score margin is safe.

Per trial, the window grows through a fixed grid. At window index k the
per-class scores are weighted by the confidence factor c(k) = (k/50)^2 and
the decision is emitted once the margin between the two best classes beats a
risk threshold T(s) = -(s*1e-5)/2; if no window satisfies it, the longest
window's decision is forced. The confidence factor depends on the window
index, not its duration, also for non-default window grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .tdca import TdcaModel, score_batch


@dataclass(frozen=True)
class DynWinConfig:
    windows: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)
    n_thresholds: int = 50

    def __post_init__(self):
        if not self.windows or any(w <= 0 for w in self.windows):
            raise ValueError("windows must be positive")
        if any(b <= a for a, b in zip(self.windows, self.windows[1:])):
            raise ValueError("windows must be strictly increasing")
        if self.n_thresholds < 1:
            raise ValueError("n_thresholds must be >= 1")


def confidence_weight(k: int) -> float:
    """c(k) = (k/50)^2 for the 1-based window index k."""
    if k < 1:
        raise ValueError("window index is 1-based")
    return (k / 50.0) ** 2


def threshold_value(s: int) -> float:
    """T(s) = -(s*1e-5)/2 for the threshold index s."""
    if s < 1:
        raise ValueError("threshold index is 1-based")
    return -(s * 1e-5) / 2.0


def decide_output(weighted_scores, threshold: float) -> tuple[bool, int]:
    """Emit the argmax iff the top-two margin Delta satisfies threshold > -Delta."""
    scores = np.asarray(weighted_scores, dtype=float)
    if scores.size < 2:
        raise ValueError("need scores for at least two classes")
    best = int(np.argmax(scores))
    top_two = np.partition(scores, -2)[-2:]
    delta = float(top_two[1] - top_two[0])
    return threshold > -delta, best


def window_score_matrix(model: TdcaModel, trials: np.ndarray, windows) -> np.ndarray:
    """Raw (unweighted) scores per trial and window, shape (n, K, n_classes)."""
    trials = np.asarray(trials, dtype=float)
    fs = model.sampling_rate
    out = np.empty((trials.shape[0], len(windows), model.n_classes))
    for k, w in enumerate(windows):
        n_keep = round(w * fs)
        if not 1 <= n_keep <= trials.shape[-1]:
            raise ValueError(f"window {w} s not covered by the trials' samples")
        out[:, k] = score_batch(model, trials, n_keep)
    return out


@dataclass(frozen=True)
class DynSessionResult:
    """Per-trial decisions of one threshold setting plus session summary."""

    threshold_index: int
    predictions: np.ndarray  # class indices into the model's class list
    output_times: np.ndarray  # seconds of stimulation used
    window_indices: np.ndarray  # 1-based k at which each trial emitted
    emitted_early: np.ndarray  # False where the longest window was forced
    mean_output_time: float
    accuracy: float | None
    itr_bpm: float | None


def session_from_scores(
    scores: np.ndarray,
    windows,
    s: int,
    classes,
    labels=None,
    cue_time: float = 0.5,
) -> DynSessionResult:
    """Grow-or-emit bookkeeping over a precomputed raw score matrix.

    ``scores`` has shape (n_trials, n_windows, n_classes); the trials may have
    been scored by different fold models as long as they share ``classes``.
    Accuracy and actual ITR (selection time = mean output time + cue) are
    filled in when true ``labels`` are given.
    """
    scores = np.asarray(scores, dtype=float)
    n, n_windows, _ = scores.shape
    if n_windows != len(windows):
        raise ValueError("score matrix does not match the window grid")
    threshold = threshold_value(s)

    predictions = np.empty(n, dtype=int)
    window_indices = np.empty(n, dtype=int)
    emitted_early = np.zeros(n, dtype=bool)
    for i in range(n):
        for k in range(1, n_windows + 1):
            weighted = confidence_weight(k) * scores[i, k - 1]
            emit, best = decide_output(weighted, threshold)
            if emit or k == n_windows:
                predictions[i] = best
                window_indices[i] = k
                emitted_early[i] = emit and k < n_windows
                break

    output_times = np.array([windows[k - 1] for k in window_indices])
    mean_time = float(output_times.mean())
    accuracy = None
    itr_bpm = None
    if labels is not None:
        index_of = {c.numeric_label: i for i, c in enumerate(classes)}
        truth = np.array([index_of[lab.numeric_label] for lab in labels])
        accuracy = float(np.mean(predictions == truth))
        itr_bpm = metrics.itr(len(classes), accuracy, mean_time + cue_time, unit="bpm")
    return DynSessionResult(
        threshold_index=s,
        predictions=predictions,
        output_times=output_times,
        window_indices=window_indices,
        emitted_early=emitted_early,
        mean_output_time=mean_time,
        accuracy=accuracy,
        itr_bpm=itr_bpm,
    )


def run_dynamic_session(
    model: TdcaModel,
    trials: np.ndarray,
    config: DynWinConfig,
    s: int,
    labels=None,
    cue_time: float = 0.5,
    scores: np.ndarray | None = None,
) -> DynSessionResult:
    """Run the grow-or-emit loop over every trial at threshold index s.

    ``scores`` may carry a precomputed window score matrix to avoid rescoring
    during threshold sweeps.
    """
    if not 1 <= s <= config.n_thresholds:
        raise ValueError(f"threshold index must be in 1..{config.n_thresholds}")
    if scores is None:
        scores = window_score_matrix(model, trials, config.windows)
    return session_from_scores(scores, config.windows, s, model.classes, labels, cue_time)


def sweep_thresholds(
    model: TdcaModel,
    trials: np.ndarray,
    config: DynWinConfig,
    labels=None,
    cue_time: float = 0.5,
    s_values=None,
) -> list[DynSessionResult]:
    """One session per threshold index, scoring each window only once."""
    if s_values is None:
        s_values = range(1, config.n_thresholds + 1)
    scores = window_score_matrix(model, trials, config.windows)
    return [
        run_dynamic_session(model, trials, config, s, labels, cue_time, scores=scores)
        for s in s_values
    ]
