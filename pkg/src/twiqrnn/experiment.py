"""Experiment configs, trial orchestration and the CSV/JSON files they produce."""
from __future__ import annotations

import ast
import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .circuit import CircuitParams, FixedHamiltonian, StepCircuit
from .datagen import LindbladSpec, TaskData, WarpSpec, make_task
from .gating import GatingParams, gating_forward, known_warp_alphas
from .lstm import LstmConfig, LstmParams, lstm_forward, train_lstm
from .quantum import QubitPartition
from .training import OptimizerConfig, TrainConfig, TrainReport, cumulative_loss_curve, evaluate_model, symbol_targets, train_model

log = logging.getLogger(__name__)

OUT_ENV = "TWIQRNN_OUT"
SUPPORTED_WARPS = {"cosine-remember": ("identity", "linear"), "spin-predict": ("identity", "sqrt")}
TASKS = tuple(SUPPORTED_WARPS)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "cosine-remember"
    warp: str = "linear:0.1"
    model: str = "qrnn"
    gate_mode: str = "none"
    trials: int = 5
    seeds: list = field(default_factory=list)
    T: int = 200
    train_len: int = 50
    spin_observable: str = "Z"
    # circuit
    n_a: int = 3
    n_b: int = 3
    rotation_axis: str = "Y"
    rotate_all: bool = False
    delta_t: float = 0.17
    alpha_convention: str = "derivative"
    n_levels: int = 8
    discretize_range: str = "fixed"
    shots: int = 0
    # optimizers
    circuit_optimizer: str = "cobyla-like"
    max_evals: int = 100
    simplex_radius: float = 0.5
    xtol: float = 1e-6
    ftol: float = 1e-10
    rounds: int = 10
    gate_epochs: int = 50
    gate_lr: float = 0.001
    score_samples: int = 16
    baseline: bool = True
    lstm_epochs: int = 2000
    lstm_lr: float = 0.001
    jobs: int = 1
    out_dir: str = ""

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.model not in ("qrnn", "twi-qrnn", "sqrnn", "twi-sqrnn", "lstm"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.gate_mode not in ("none", "known", "learnt"):
            raise ConfigError(f"unknown gate mode {self.gate_mode!r}")
        if self.model.startswith("twi") == (self.gate_mode == "none"):
            raise ConfigError(f"gate mode {self.gate_mode!r} does not fit model {self.model!r}")
        try:
            kind = self.warp_spec.kind
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if kind not in SUPPORTED_WARPS[self.task]:
            raise ConfigError(f"task {self.task!r} supports warps {SUPPORTED_WARPS[self.task]}")
        if self.trials < 1 or self.T <= self.train_len:
            raise ConfigError("need at least one trial and T > train_len")
        self.seeds = [int(s) for s in self.seeds] or list(range(self.trials))
        self.trials = len(self.seeds)
        if self.alpha_convention not in ("derivative", "complement"):
            raise ConfigError(f"unknown alpha convention {self.alpha_convention!r}")
        if self.discretize_range not in ("fixed", "data"):
            raise ConfigError(f"unknown discretize range {self.discretize_range!r}")
        if self.spin_observable not in ("X", "Y", "Z"):
            raise ConfigError(f"unknown spin observable {self.spin_observable!r}")
        try:
            self.train_config()
            CircuitParams([0.0], 1.0, self.rotation_axis, (0,))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def warp_spec(self) -> WarpSpec:
        return WarpSpec.parse(self.warp)

    @property
    def tag(self) -> str:
        return f"{self.task}_{self.warp_spec.label()}_{self.model}_{self.gate_mode}"

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def output_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV, "runs"))

    def train_config(self) -> TrainConfig:
        opt = OptimizerConfig(
            circuit_kind=self.circuit_optimizer, max_evals=self.max_evals, radius=self.simplex_radius,
            xtol=self.xtol, ftol=self.ftol, lr=self.gate_lr, gate_epochs=self.gate_epochs,
            rounds=self.rounds, score_samples=self.score_samples, baseline=self.baseline,
        )
        return TrainConfig(
            n_a=self.n_a, n_b=self.n_b, rotation_axis=self.rotation_axis, rotate_all=self.rotate_all,
            delta_t=self.delta_t, train_len=self.train_len, alpha_convention=self.alpha_convention,
            n_levels=self.n_levels, discretize_range=self.discretize_range, shots=self.shots, optimizer=opt,
        )

    def task_data(self) -> TaskData:
        return make_task(self.task, self.warp_spec, self.T, LindbladSpec(observable=self.spin_observable))


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Flat ``key = value`` lines; values are Python literals or bare strings; ``#`` starts a comment."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = _parse_value(val)
    values.update(overrides or {})
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, val in values.items():
        default = known[key].default
        if isinstance(default, bool) and isinstance(val, str):
            values[key] = val.lower() in ("1", "true", "yes")
        elif isinstance(default, (int, float)) and not isinstance(default, bool) and isinstance(val, str):
            try:
                values[key] = type(default)(val)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        elif key == "seeds" and isinstance(val, (int, str)):
            values[key] = [int(s) for s in str(val).replace(",", " ").split()]
        elif key == "warp":
            values[key] = str(val)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text() if path else "", overrides)


def config_to_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in asdict(cfg).items())


# --- numbers on disk --------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "nan" if np.isnan(v) else repr(v)


def _header(cfg: ExperimentConfig, seed=None, **extra) -> str:
    parts = [f"config_hash={cfg.hash}", f"task={cfg.task}", f"warp={cfg.warp_spec.label()}",
             f"model={cfg.model}", f"gate_mode={cfg.gate_mode}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts) + "\n"


def write_csv(path: Path, header: str, columns: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([r if isinstance(r, str) else fmt(r) if not isinstance(r, (int, np.integer)) else str(r) for r in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def read_csv(path) -> tuple[dict, list[dict]]:
    """Returns (header metadata, rows as dicts of strings)."""
    meta = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        else:
            body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is None:
        raise ValueError(f"{path}: no CSV header")
    return meta, list(reader)


def _json_dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _floats(a) -> list:
    return [None if np.isnan(v) else float(v) for v in np.asarray(a, dtype=float)]


# --- data ----------------------------------------------------------------------------


def write_dataset(cfg: ExperimentConfig) -> Path:
    data = cfg.task_data()
    with_symbols = cfg.model in ("sqrnn", "twi-sqrnn")
    cols = ["step", "continuous_time", "x", "target"] + (["symbol"] if with_symbols else [])
    if with_symbols:
        symbols, _, _ = symbol_targets(data.targets, cfg.train_config())
    rows = []
    for t in range(len(data.inputs)):
        row = [t + 1, data.times[t], data.inputs[t], data.targets[t]]
        if with_symbols:
            row.append(int(symbols[t]))
        rows.append(row)
    path = cfg.output_dir() / f"data_{cfg.task}_{cfg.warp_spec.label()}.csv"
    write_csv(path, _header(cfg), cols, rows)
    return path


# --- training -----------------------------------------------------------------------


def run_trial(cfg: ExperimentConfig, seed: int) -> TrainReport:
    data = cfg.task_data()
    if cfg.model == "lstm":
        return train_lstm(data, LstmConfig(cfg.lstm_epochs, cfg.lstm_lr, cfg.train_len), seed)
    return train_model(data, cfg.model, cfg.gate_mode, cfg.train_config(), seed)


def _run_trial_args(args):
    return run_trial(*args)


def run_trials(cfg: ExperimentConfig) -> list[TrainReport]:
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_trial_args, jobs))
    return [run_trial(*j) for j in jobs]


REPORT_COLUMNS = ["step", "continuous_time", "x", "target", "prediction", "alpha", "sq_error", "cumulative"]


def report_rows(report: TrainReport, times) -> list:
    L = report.train_len
    rows = []
    for t in range(len(report.predictions)):
        err = (report.targets[t] - report.predictions[t]) ** 2
        cum = report.cumulative[t - L] if t >= L and len(report.cumulative) else None
        rows.append([t + 1, times[t], report.inputs[t], report.targets[t], report.predictions[t], report.alphas[t], err, cum])
    return rows


def report_json(report: TrainReport, cfg: ExperimentConfig) -> dict:
    gate = report.gate
    return {
        "config_hash": cfg.hash,
        "seed": report.seed,
        "model": report.model,
        "gate_mode": report.gate_mode,
        "loss_kind": report.loss_kind,
        "status": report.status,
        "message": report.message,
        "theta": _floats(report.theta),
        "out_scale": None if np.isnan(report.out_scale) else float(report.out_scale),
        "gate": None if gate is None else {k: float(getattr(gate, k)) for k in GatingParams.NAMES + ("h0",)},
        "initial_gate": None if report.initial_gate is None else {k: float(getattr(report.initial_gate, k)) for k in GatingParams.NAMES + ("h0",)},
        "hamiltonian": {"fields": _floats(report.ham_fields), "couplings": _floats(report.ham_couplings), "delta_t": cfg.delta_t},
        "initial_train_loss": float(report.initial_train_loss),
        "final_train_loss": float(report.final_train_loss),
        "loss_history": _floats(report.loss_history),
        "gate_updates": report.gate_updates,
        "floored_targets": report.floored_targets,
        "final_cumulative": None if np.isnan(report.final_cumulative) else report.final_cumulative,
        "params_hash_before_eval": report.params_hash_before_eval,
        "params_hash_after_eval": report.params_hash_after_eval,
    }


def aggregate(curves: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error across trials, step by step."""
    arr = np.array(curves, dtype=float)
    mean = arr.mean(axis=0)
    stderr = arr.std(axis=0, ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else np.zeros_like(mean)
    return mean, stderr


def write_reports(cfg: ExperimentConfig, reports: list[TrainReport]) -> dict:
    out = cfg.output_dir() / cfg.tag
    times = cfg.task_data().times
    ok = [r for r in reports if r.status == "ok"]
    for r in reports:
        write_csv(out / f"trial_{r.seed}.csv", _header(cfg, r.seed, status=r.status), REPORT_COLUMNS, report_rows(r, times))
        _json_dump(out / f"trial_{r.seed}.json", report_json(r, cfg))
    summary = {
        "config_hash": cfg.hash,
        "config": cfg.canonical(),
        "seeds": cfg.seeds,
        "complete": len(ok) == len(reports),
        "failed_seeds": [r.seed for r in reports if r.status != "ok"],
        "final_cumulative": {str(r.seed): (r.final_cumulative if r.status == "ok" else None) for r in reports},
    }
    if ok:
        mean, stderr = aggregate([r.cumulative for r in ok])
        summary["eval_start"] = cfg.train_len + 1
        summary["mean_cumulative"] = _floats(mean)
        summary["stderr_cumulative"] = _floats(stderr)
    _json_dump(out / "summary.json", summary)
    return summary


# --- frozen evaluation and gate export ------------------------------------------------


def load_trial(cfg: ExperimentConfig, seed: int, run_dir=None) -> dict:
    path = Path(run_dir or cfg.output_dir() / cfg.tag) / f"trial_{seed}.json"
    if not path.exists():
        raise FileNotFoundError(f"no trained parameters at {path}")
    return json.loads(path.read_text())


def _circuit_from(trial: dict, cfg: ExperimentConfig) -> StepCircuit:
    part = QubitPartition(cfg.n_a, cfg.n_b)
    h = trial["hamiltonian"]
    ham = FixedHamiltonian(part.n, h["fields"], h["couplings"], h["delta_t"])
    targets = tuple(range(part.n)) if cfg.rotate_all else tuple(range(part.n_a))
    return StepCircuit(CircuitParams(trial["theta"], trial["out_scale"], cfg.rotation_axis, targets), ham, part)


def _gate_from(trial: dict) -> GatingParams | None:
    g = trial.get("gate")
    return None if g is None else GatingParams(**g)


def evaluate_saved(cfg: ExperimentConfig, run_dir=None) -> list[Path]:
    """Re-run saved trial parameters on ``cfg``'s data and write eval CSVs."""
    data = cfg.task_data()
    written = []
    for seed in cfg.seeds:
        trial = load_trial(cfg, seed, run_dir)
        if cfg.model == "lstm":
            z = lstm_forward(data.inputs, LstmParams(trial["theta"]))
            preds, targets, alphas = z, data.targets, np.full(len(z), np.nan)
            cum = cumulative_loss_curve(z, targets, cfg.train_len + 1)
        else:
            rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(5)[4])
            ev = evaluate_model(cfg.model, cfg.gate_mode, _circuit_from(trial, cfg), _gate_from(trial), data, cfg.train_config(), rng)
            preds, targets, alphas, cum = ev.predictions, ev.targets, ev.alphas, ev.cumulative
        L = cfg.train_len
        rows = [[t + 1, data.times[t], data.inputs[t], targets[t], preds[t], alphas[t], (targets[t] - preds[t]) ** 2,
                 cum[t - L] if t >= L else None] for t in range(len(preds))]
        path = cfg.output_dir() / cfg.tag / f"eval_{seed}.csv"
        write_csv(path, _header(cfg, seed), REPORT_COLUMNS, rows)
        written.append(path)
    return written


def export_alpha(cfg: ExperimentConfig, run_dir=None) -> list[Path]:
    """Per-step known warp derivative next to the learnt gate probability, one CSV per trial."""
    if cfg.gate_mode != "learnt":
        raise ConfigError("alpha export needs a learnt-gate run")
    data = cfg.task_data()
    T = len(data.inputs)
    known = known_warp_alphas(data.warp, T)
    written = []
    for seed in cfg.seeds:
        gate = _gate_from(load_trial(cfg, seed, run_dir))
        if gate is None:
            raise ConfigError(f"trial {seed} has no gate parameters")
        learnt = gating_forward(data.inputs, gate).alpha
        path = cfg.output_dir() / cfg.tag / f"alpha_{seed}.csv"
        write_csv(path, _header(cfg, seed), ["step", "known_dcdt", "learnt_alpha"],
                  [[t + 1, known[t], learnt[t]] for t in range(T)])
        written.append(path)
    return written
