"""Figure rendering writes non-empty image files."""

import numpy as np

from ssvepkit import plots
from ssvepkit.chansel import StepRecord
from ssvepkit.dynwin import session_from_scores
from ssvepkit.harness import loo_window_scores, report_from_scores
from ssvepkit.tdca import TdcaConfig


def test_report_figures(tmp_path, clean_prepared):
    windows = (0.2, 0.5)
    scores = loo_window_scores(clean_prepared, TdcaConfig(), windows)
    report = report_from_scores(clean_prepared, scores, windows, cue_time=0.5)

    acc_png = tmp_path / "acc.png"
    plots.plot_accuracy_vs_window(report, acc_png)
    itr_png = tmp_path / "itr.png"
    plots.plot_itr_vs_window(report, itr_png)

    classes = tuple(clean_prepared.codebook.targets())
    sessions = [
        session_from_scores(scores, windows, s, classes, labels=clean_prepared.labels)
        for s in (1, 5, 10)
    ]
    dyn_png = tmp_path / "dyn.png"
    plots.plot_dynwin_sweep(sessions, dyn_png)

    trace = [
        StepRecord(3, ("A", "B", "C"), 0.9),
        StepRecord(2, ("A", "B"), 0.8),
    ]
    sel_png = tmp_path / "sel.png"
    plots.plot_selection_trace(trace, sel_png)

    bar_png = tmp_path / "bar.png"
    plots.plot_channel_values(
        np.array([0.1, 0.5, 0.3]), ("Pz", "Oz", "POz"), bar_png, ylabel="weight"
    )

    for path in (acc_png, itr_png, dyn_png, sel_png, bar_png):
        assert path.stat().st_size > 0
