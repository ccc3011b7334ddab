"""Shared plumbing for the experiment scripts: run a config grid, tabulate finals, draw curves."""
import argparse
import logging
from pathlib import Path

import numpy as np

from twiqrnn.experiment import ExperimentConfig, run_trials, write_reports
from twiqrnn.plotting import plot_files


def base_parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1, help="worker processes per configuration")
    p.add_argument("--max-evals", type=int, default=100)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_grid(args, configs):
    """Train each (task, warp, model, gate_mode[, extra]) entry and return {tag: final cumulative losses}."""
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    finals = {}
    for entry in configs:
        task, warp, model, gate, *extra = entry
        cfg = ExperimentConfig(task=task, warp=warp, model=model, gate_mode=gate, trials=args.trials, jobs=args.jobs,
                               max_evals=args.max_evals, rounds=args.rounds, out_dir=args.out, **(extra[0] if extra else {}))
        summary = write_reports(cfg, run_trials(cfg))
        finals[cfg.tag] = np.array([v if v is not None else np.nan for v in summary["final_cumulative"].values()])
        print(f"{cfg.tag:55s} final cumulative {np.nanmean(finals[cfg.tag]):10.4f} +- {np.nanstd(finals[cfg.tag], ddof=1) / np.sqrt(args.trials):.4f}")
    return finals


def plot_group(out, tags, svg_name, title):
    files = [str(p) for tag in tags for p in sorted((Path(out) / tag).glob("trial_*.csv"))]
    path = plot_files(files, Path(out) / svg_name, title)
    print(f"wrote {path}")


def wins(finals, base_tag, tag):
    return int(np.sum(finals[tag] < finals[base_tag]))
