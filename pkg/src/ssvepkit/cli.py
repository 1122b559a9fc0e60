"""Command-line front end.

Subcommands: simulate (synthetic dataset), train, evaluate (leave-one-out or
fixed-model), dynwin (threshold sweep), chansel (greedy elimination), itr,
snr, report (evaluation plus rendered figures). Exit codes: 0 success,
1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chansel import SelectionTask, greedy_backward_eliminate
from .codebook import build_codebook
from .dataset import apply_montage, load_dataset, save_dataset
from .dynwin import DynWinConfig
from .errors import CorruptDataError, DataUnavailableError, InvalidManifestError, NumericalError
from .harness import (
    BenchmarkConfig,
    evaluate_model,
    preprocess_dataset,
    run_benchmark,
    train_on_prepared,
    write_report_files,
)
from .metrics import snr_at_frequency, spectrum
from .metrics import itr as itr_value
from .montage import default_montage
from .sigproc import default_filter_bank, extract_epoch
from .simgen import ForwardModelConfig, synthesize_dataset
from .tdca import TdcaConfig, load_model, save_model

ALL_FIXATIONS = ("right", "down", "left", "up", "center")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x)


def _fixations(text: str) -> tuple[str, ...]:
    if text == "all":
        return ALL_FIXATIONS
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _s_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _add_tdca_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delay-order", type=int, default=4)
    p.add_argument("--harmonics", type=int, default=5)
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--bands", type=int, default=5)
    p.add_argument("--ridge", type=float, default=1e-6)


def _tdca_from_args(args) -> TdcaConfig:
    return TdcaConfig(
        delay_order=args.delay_order,
        n_harmonics=args.harmonics,
        n_components=args.components,
        ridge_epsilon=args.ridge,
        filter_bank=default_filter_bank(args.bands),
    )


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--subset", default=None, help="montage subset name")
    p.add_argument("--latency", type=float, default=0.14)
    p.add_argument("--train-window", type=float, default=0.5)
    p.add_argument("--target-fs", type=float, default=250.0)
    p.add_argument("--cue", type=float, default=0.5)
    p.add_argument("--n-jobs", type=int, default=1)
    _add_tdca_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssvepkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--fixations", type=_fixations, default=("center",),
                   help="comma list from right,down,left,up,center or 'all'")
    p.add_argument("--subset", default=None, help="generate only this montage subset")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--noise-white", type=float, default=0.0)
    p.add_argument("--noise-pink", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--n-harmonics", type=int, default=3)
    p.add_argument("--duration", type=float, default=0.7)
    p.add_argument("--fs", type=float, default=1000.0)
    p.add_argument("--subject", default="synthetic")

    p = sub.add_parser("train", help="train a model and save it")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_args(p)

    p = sub.add_parser("evaluate", help="leave-one-out or fixed-model evaluation")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--model", default=None, help="evaluate this saved model instead of LOO")
    p.add_argument("--windows", type=_floats, default=(0.1, 0.2, 0.3, 0.4, 0.5))
    p.add_argument("--config", default=None, help="JSON benchmark config; flags override nothing")
    p.add_argument("--fixations", type=_fixations, default=None,
                   help="restrict trials to this fixation combination")
    p.add_argument("--n-targets", type=int, default=None,
                   help="assert the evaluated task has this many targets")
    _add_pipeline_args(p)

    p = sub.add_parser("dynwin", help="dynamic-window threshold sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--windows", type=_floats, default=(0.1, 0.2, 0.3, 0.4, 0.5))
    p.add_argument("--s-range", type=_s_range, default=(1, 50))
    p.add_argument("--fixations", type=_fixations, default=None)
    p.add_argument("--n-targets", type=int, default=None)
    _add_pipeline_args(p)

    p = sub.add_parser("chansel", help="greedy backward electrode elimination")
    p.add_argument("--data", action="append", required=True,
                   help="dataset directory; repeat for multiple subjects")
    p.add_argument("--out", required=True)
    p.add_argument("--initial", default=None,
                   help="montage subset name or comma list of channels (default: all)")
    p.add_argument("--window", type=float, default=0.2)
    _add_pipeline_args(p)

    p = sub.add_parser("itr", help="information transfer rate of one operating point")
    p.add_argument("--targets", type=int, required=True)
    p.add_argument("--accuracy", type=float, required=True)
    p.add_argument("--window", type=float, required=True, help="stimulation seconds")
    p.add_argument("--cue", type=float, default=0.5)

    p = sub.add_parser("snr", help="spectral SNR of one channel at one frequency")
    p.add_argument("--data", required=True)
    p.add_argument("--frequency", type=float, required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--window", type=float, default=0.5)
    p.add_argument("--latency", type=float, default=0.14)
    p.add_argument("--neighbors", type=int, default=5, help="noise bins per side")

    p = sub.add_parser("report", help="evaluation plus rendered figures")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--windows", type=_floats, default=(0.1, 0.2, 0.3, 0.4, 0.5))
    p.add_argument("--dynwin", action="store_true")
    p.add_argument("--s-range", type=_s_range, default=(1, 50))
    p.add_argument("--fixations", type=_fixations, default=None)
    p.add_argument("--n-targets", type=int, default=None)
    _add_pipeline_args(p)
    return parser


def _cmd_simulate(args) -> None:
    montage = default_montage()
    if args.subset:
        montage = montage.restrict(montage.subset_names(args.subset))
    codebook = build_codebook(rows=args.rows, cols=args.cols, fixation_points=args.fixations)
    config = ForwardModelConfig(
        amplitude=args.amplitude,
        n_harmonics=args.n_harmonics,
        fixation_separation=args.separation,
        noise_white=args.noise_white,
        noise_pink=args.noise_pink,
        seed=args.seed,
    )
    dataset = synthesize_dataset(
        config, montage, codebook, args.blocks, args.duration, args.fs, args.subject
    )
    save_dataset(dataset, args.out)
    print(f"wrote {dataset.n_trials} trials ({dataset.n_blocks} blocks) to {args.out}")


def _load_prepared(args, tdca_config):
    dataset = load_dataset(args.data)
    if args.subset:
        dataset = apply_montage(dataset, args.subset)
    return preprocess_dataset(dataset, tdca_config, args.latency, args.train_window, args.target_fs)


def _cmd_train(args) -> None:
    tdca_config = _tdca_from_args(args)
    prepared = _load_prepared(args, tdca_config)
    model = train_on_prepared(prepared, tdca_config)
    save_model(model, args.out)
    meta = {
        "classes": model.n_classes,
        "channels": list(model.channel_names) if model.channel_names else None,
        "sampling_rate": model.sampling_rate,
        "n_window": model.n_window,
        "delay_order": model.delay_order,
        "n_harmonics": model.n_harmonics,
        "n_components": model.n_components,
        "bands": model.n_bands,
        "source": str(args.data),
        "subset": args.subset,
    }
    Path(str(args.out) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"saved model ({model.n_classes} classes, {model.n_channels} channels) to {args.out}")


def _benchmark_config(args, windows, dynwin_enabled=False, s_range=(1, 50)) -> BenchmarkConfig:
    return BenchmarkConfig(
        dataset=args.data,
        output=args.out,
        subset=args.subset,
        windows=tuple(windows),
        train_window=args.train_window,
        cue_time=args.cue,
        latency=args.latency,
        target_fs=args.target_fs,
        fixations=getattr(args, "fixations", None),
        n_targets=getattr(args, "n_targets", None),
        tdca=_tdca_from_args(args),
        dynwin_enabled=dynwin_enabled,
        dynwin=DynWinConfig(windows=tuple(windows)) if dynwin_enabled else DynWinConfig(),
        s_range=s_range,
        n_jobs=args.n_jobs,
    )


def _cmd_evaluate(args) -> None:
    if args.config:
        config = BenchmarkConfig.from_file(args.config)
        report = run_benchmark(config)
    elif args.model:
        if not (args.data and args.out):
            raise ValueError("--data and --out are required with --model")
        model = load_model(args.model)
        tdca_config = _tdca_from_args(args)
        prepared = _load_prepared(args, tdca_config)
        report = evaluate_model(model, prepared, args.windows, args.cue, subset=args.subset or "")
        write_report_files(report, args.out, manifest_extra={"model": args.model})
    else:
        if not (args.data and args.out):
            raise ValueError("--data and --out are required")
        report = run_benchmark(_benchmark_config(args, args.windows))
    for wr in report.windows:
        print(
            f"window {wr.window:g}s: accuracy {wr.accuracy:.4f}, "
            f"ITR {wr.itr_actual_bpm:.2f} bits/min ({wr.itr_theoretical_bps:.2f} bits/s)"
        )


def _cmd_dynwin(args) -> None:
    config = _benchmark_config(args, args.windows, dynwin_enabled=True, s_range=args.s_range)
    run_benchmark(config)
    print(f"threshold sweep s={args.s_range[0]}..{args.s_range[1]} written to {args.out}")


def _cmd_chansel(args) -> None:
    datasets = [load_dataset(d) for d in args.data]
    first = datasets[0]
    if args.initial is None:
        initial = first.montage.names
    elif args.initial in first.montage.subsets:
        initial = first.montage.subset_names(args.initial)
    else:
        initial = tuple(x.strip() for x in args.initial.split(","))
    task = SelectionTask(
        window=args.window,
        tdca=_tdca_from_args(args),
        latency=args.latency,
        train_window=args.train_window,
        target_fs=args.target_fs,
        n_jobs=args.n_jobs,
    )
    trace = greedy_backward_eliminate(datasets, initial, task)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["step,n_channels,removed_channel,remaining_channels,mean_accuracy"]
    previous = None
    for step, record in enumerate(trace):
        removed = ""
        if previous is not None:
            removed = next(iter(set(previous) - set(record.channels)))
        lines.append(
            f"{step},{record.n_channels},{removed},"
            f"{'|'.join(record.channels)},{record.mean_accuracy:.10g}"
        )
        previous = record.channels
    (out / "selection_trace.csv").write_text("\n".join(lines) + "\n")
    best = max(trace, key=lambda r: (r.mean_accuracy, -r.n_channels))
    print(f"best subset ({best.n_channels} channels, accuracy {best.mean_accuracy:.4f}) in {out}")


def _cmd_itr(args) -> None:
    actual = itr_value(args.targets, args.accuracy, args.window + args.cue, "bpm")
    theoretical = itr_value(args.targets, args.accuracy, args.window, "bps")
    print(f"actual      {actual:.2f} bits/min  (selection {args.window + args.cue:g} s)")
    print(f"theoretical {theoretical:.2f} bits/s    (stimulation {args.window:g} s)")


def _cmd_snr(args) -> None:
    dataset = load_dataset(args.data)
    channel_row = dataset.montage.index_of(args.channel)
    epochs = []
    for trial in dataset.trials():
        freq = dataset.codebook.frequency(trial.label.flicker_index)
        if abs(freq - args.frequency) < 1e-9:
            epoch = extract_epoch(trial, args.latency, args.window)
            epochs.append(epoch.data[channel_row])
    if not epochs:
        raise ValueError(f"no trials at {args.frequency} Hz in {args.data}")
    averaged = np.mean(epochs, axis=0)
    spec = spectrum(averaged, dataset.raw_sampling_rate)
    value = snr_at_frequency(spec.amplitude, args.frequency, spec.bin_width, args.neighbors)
    print(f"{args.channel} @ {args.frequency:g} Hz over {len(epochs)} trials: {value:.2f} dB")


def _cmd_report(args) -> None:
    from . import plots

    config = _benchmark_config(args, args.windows, dynwin_enabled=args.dynwin, s_range=args.s_range)
    report = run_benchmark(config)
    out = Path(args.out)
    plots.plot_accuracy_vs_window(report, out / "accuracy_vs_window.png")
    plots.plot_itr_vs_window(report, out / "itr_vs_window.png")
    if args.dynwin:
        import csv

        rows = list(csv.DictReader((out / "dynwin.csv").open()))
        # rebuild light-weight session views for plotting
        class _Row:
            def __init__(self, r):
                self.threshold_index = int(r["s"])
                self.mean_output_time = float(r["mean_output_time_s"])
                self.itr_bpm = float(r["itr_actual_bpm"]) if r["itr_actual_bpm"] else None

        plots.plot_dynwin_sweep([_Row(r) for r in rows], out / "dynwin_sweep.png")
    print(f"report and figures written to {out}")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "dynwin": _cmd_dynwin,
    "chansel": _cmd_chansel,
    "itr": _cmd_itr,
    "snr": _cmd_snr,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (FileNotFoundError, CorruptDataError, InvalidManifestError, DataUnavailableError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
