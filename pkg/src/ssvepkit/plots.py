"""Report figures rendered straight to files (no interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_accuracy_vs_window(report, path) -> Path:
    windows = [wr.window for wr in report.windows]
    acc = [wr.accuracy for wr in report.windows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(windows, [100 * a for a in acc], "o-", color="tab:blue")
    ax.set_xlabel("Window length (s)")
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 105)
    ax.grid(alpha=0.3)
    ax.set_title(f"{report.subject_id} {report.subset}".strip())
    return _save(fig, path)


def plot_itr_vs_window(report, path) -> Path:
    windows = [wr.window for wr in report.windows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(windows, [wr.itr_actual_bpm for wr in report.windows], "o-", color="tab:orange")
    ax1.set_xlabel("Window length (s)")
    ax1.set_ylabel("Actual ITR (bits/min)")
    ax1.grid(alpha=0.3)
    ax2.plot(windows, [wr.itr_theoretical_bps for wr in report.windows], "s-", color="tab:green")
    ax2.set_xlabel("Window length (s)")
    ax2.set_ylabel("Theoretical ITR (bits/s)")
    ax2.grid(alpha=0.3)
    return _save(fig, path)


def plot_dynwin_sweep(sessions, path) -> Path:
    s = [ses.threshold_index for ses in sessions]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(s, [ses.mean_output_time for ses in sessions], ".-", color="tab:gray")
    ax1.set_xlabel("Threshold index s")
    ax1.set_ylabel("Mean output time (s)")
    ax1.grid(alpha=0.3)
    if all(ses.itr_bpm is not None for ses in sessions):
        ax2.plot(s, [ses.itr_bpm for ses in sessions], ".-", color="tab:red")
        ax2.set_ylabel("Actual ITR (bits/min)")
    ax2.set_xlabel("Threshold index s")
    ax2.grid(alpha=0.3)
    return _save(fig, path)


def plot_selection_trace(trace, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot([r.n_channels for r in trace], [100 * r.mean_accuracy for r in trace], "o-")
    ax.set_xlabel("Number of channels")
    ax.set_ylabel("Mean accuracy (%)")
    ax.invert_xaxis()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_channel_values(values, channel_names, path, ylabel="Value") -> Path:
    """Per-channel bar plot; topographic interpolation is out of scope."""
    fig, ax = plt.subplots(figsize=(max(5, 0.15 * len(channel_names)), 4))
    ax.bar(range(len(values)), values, color="tab:blue")
    ax.set_xticks(range(len(channel_names)))
    ax.set_xticklabels(channel_names, rotation=90, fontsize=6)
    ax.set_ylabel(ylabel)
    fig.subplots_adjust(bottom=0.25)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def _save(fig, path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
