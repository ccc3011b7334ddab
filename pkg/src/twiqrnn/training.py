"""Losses, optimizers and the alternating circuit/gate training loop."""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitParams, StepCircuit, sample_fixed_hamiltonian
from .datagen import TaskData, discretize, level_values
from .gating import GatingParams, gating_forward, known_warp_alphas, score_function_gradient
from .models import sqrnn_marginals, sqrnn_sample, twi_forward_exact, twi_forward_sampled, twi_sqrnn_sample
from .quantum import QubitPartition

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
MODELS = ("qrnn", "twi-qrnn", "sqrnn", "twi-sqrnn")
STOCHASTIC = ("sqrnn", "twi-sqrnn")


def quadratic_loss(z, zbar) -> float:
    z, zbar = np.asarray(z, dtype=float), np.asarray(zbar, dtype=float)
    if z.shape != zbar.shape:
        raise ValueError(f"length mismatch {z.shape} vs {zbar.shape}")
    return float(np.mean((zbar - z) ** 2))


def cross_entropy_loss(marginals, ybar) -> float:
    """Mean negative log-probability of the target symbols; probabilities are floored at 1e-12."""
    marginals = np.asarray(marginals, dtype=float)
    ybar = np.asarray(ybar, dtype=int)
    if len(marginals) != len(ybar):
        raise ValueError("length mismatch")
    if np.any(ybar < 0) or np.any(ybar >= marginals.shape[1]):
        raise ValueError("target symbol out of range")
    p = marginals[np.arange(len(ybar)), ybar]
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR))))


def floored_targets(marginals, ybar) -> int:
    p = np.asarray(marginals)[np.arange(len(ybar)), np.asarray(ybar, dtype=int)]
    return int(np.sum(p < PROB_FLOOR))


def cumulative_loss_curve(z, zbar, start: int = 51) -> np.ndarray:
    """Running sum of squared errors from 1-based step ``start`` to the end."""
    z, zbar = np.asarray(z, dtype=float), np.asarray(zbar, dtype=float)
    if start > len(z) + 1:
        raise ValueError("start lies beyond the sequence")
    return np.cumsum((zbar[start - 1 :] - z[start - 1 :]) ** 2)


# --- derivative-free optimization -------------------------------------------------


@dataclass
class OptimizerConfig:
    circuit_kind: str = "cobyla-like"
    max_evals: int = 100
    radius: float = 0.5
    xtol: float = 1e-6
    ftol: float = 1e-10
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gate_epochs: int = 50
    rounds: int = 10
    score_samples: int = 16
    baseline: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.circuit_kind not in ("cobyla-like", "nelder-mead", "cobyla"):
            raise ValueError(f"unknown circuit optimizer {self.circuit_kind!r}")


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    history: list = field(default_factory=list)


class _Tracked:
    def __init__(self, f, lower, upper, max_evals):
        self.f, self.lower, self.upper, self.max_evals = f, lower, upper, max_evals
        self.nfev = 0
        self.best_x, self.best_f = None, np.inf
        self.history = []

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.lower is not None:
            x = np.clip(x, self.lower, self.upper)
        v = float(self.f(x))
        self.nfev += 1
        if np.isnan(v):
            raise FloatingPointError(f"objective returned NaN at {x.tolist()} (evaluation {self.nfev})")
        if v < self.best_f:
            self.best_x, self.best_f = x.copy(), v
        self.history.append(self.best_f)
        return v


def nelder_mead(f, x0, max_evals: int = 200, radius: float = 0.5, xtol: float = 1e-8, ftol: float = 1e-12, bounds=None) -> MinimizeResult:
    """Adaptive Nelder-Mead (dimension-scaled coefficients); iterates are projected into ``bounds``."""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    lower = upper = None
    if bounds is not None:
        lower, upper = (np.asarray(b, dtype=float) for b in zip(*bounds))
    F = _Tracked(f, lower, upper, max_evals)
    clip = (lambda x: np.clip(x, lower, upper)) if lower is not None else (lambda x: x)
    rho, chi = 1.0, 1 + 2 / n
    gamma, sigma = 0.75 - 1 / (2 * n), 1 - 1 / n

    simplex = [clip(x0)]
    for i in range(n):
        p = x0.copy()
        p[i] += radius
        if lower is not None and p[i] > upper[i]:
            p[i] = x0[i] - radius
        simplex.append(clip(p))
    simplex = np.array(simplex)
    fs = np.array([F(p) for p in simplex])

    while F.nfev < max_evals:
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        if np.ptp(fs) <= ftol and np.max(np.abs(simplex[1:] - simplex[0])) <= xtol:
            break
        centroid = simplex[:-1].mean(axis=0)
        xr = clip(centroid + rho * (centroid - simplex[-1]))
        fr = F(xr)
        if fr < fs[0]:
            if F.nfev >= max_evals:
                simplex[-1], fs[-1] = xr, fr
                break
            xe = clip(centroid + chi * (xr - centroid))
            fe = F(xe)
            simplex[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
            continue
        if F.nfev >= max_evals:
            break
        if fr < fs[-1]:
            xc = clip(centroid + gamma * (xr - centroid))
            fc = F(xc)
            accept = fc <= fr
        else:
            xc = clip(centroid + gamma * (simplex[-1] - centroid))
            fc = F(xc)
            accept = fc < fs[-1]
        if accept:
            simplex[-1], fs[-1] = xc, fc
            continue
        for i in range(1, n + 1):
            if F.nfev >= max_evals:
                break
            simplex[i] = clip(simplex[0] + sigma * (simplex[i] - simplex[0]))
            fs[i] = F(simplex[i])
    return MinimizeResult(F.best_x, F.best_f, F.nfev, F.history)


def derivative_free_minimize(f, x0, cfg: OptimizerConfig, bounds=None) -> MinimizeResult:
    if cfg.max_evals < len(x0) + 2:
        raise ValueError("max_evals must be at least dim + 2")
    if cfg.circuit_kind in ("cobyla-like", "nelder-mead"):
        return nelder_mead(f, x0, cfg.max_evals, cfg.radius, cfg.xtol, cfg.ftol, bounds)
    if cfg.circuit_kind == "cobyla":
        from scipy.optimize import minimize

        lower = upper = None
        if bounds is not None:
            lower, upper = (np.asarray(b, dtype=float) for b in zip(*bounds))
        F = _Tracked(f, lower, upper, cfg.max_evals)
        minimize(F, np.asarray(x0, dtype=float), method="COBYLA", options=dict(maxiter=cfg.max_evals, rhobeg=cfg.radius, tol=cfg.ftol))
        return MinimizeResult(F.best_x, F.best_f, F.nfev, F.history)
    raise ValueError(f"unknown circuit optimizer {cfg.circuit_kind!r}")


# --- Adam -----------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, cfg: OptimizerConfig):
    params, grads = np.asarray(params, dtype=float), np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise ValueError("parameter and gradient shapes differ")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grads**2
    m_hat = m / (1 - cfg.beta1**t)
    v_hat = v / (1 - cfg.beta2**t)
    return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps), AdamState(m, v, t)


# --- training loop -----------------------------------------------------------------


@dataclass
class TrainConfig:
    n_a: int = 3
    n_b: int = 3
    rotation_axis: str = "Y"
    rotate_all: bool = False
    delta_t: float = 0.17
    train_len: int = 50
    alpha_convention: str = "derivative"
    n_levels: int = 8
    discretize_range: str = "fixed"
    shots: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)


@dataclass
class TrainReport:
    model: str
    gate_mode: str
    seed: int
    loss_kind: str
    theta: np.ndarray
    out_scale: float
    gate: GatingParams | None
    initial_gate: GatingParams | None
    ham_fields: np.ndarray
    ham_couplings: np.ndarray
    initial_train_loss: float
    final_train_loss: float
    loss_history: list
    inputs: np.ndarray
    targets: np.ndarray
    predictions: np.ndarray
    alphas: np.ndarray
    cumulative: np.ndarray
    train_len: int
    gate_updates: int = 0
    floored_targets: int = 0
    status: str = "ok"
    message: str = ""
    wall_clock: float = 0.0
    params_hash_before_eval: str = ""
    params_hash_after_eval: str = ""

    @property
    def final_cumulative(self) -> float:
        return float(self.cumulative[-1]) if len(self.cumulative) else float("nan")


def params_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return h.hexdigest()[:16]


def _partition(cfg: TrainConfig) -> QubitPartition:
    return QubitPartition(cfg.n_a, cfg.n_b)


def _targets_of(cfg: TrainConfig) -> tuple[int, ...]:
    part = _partition(cfg)
    return tuple(range(part.n)) if cfg.rotate_all else tuple(range(part.n_a))


def symbol_targets(targets, cfg: TrainConfig):
    """Discretize real targets; returns (symbols, level values, (lo, hi))."""
    if cfg.discretize_range == "data":
        lo, hi = float(np.min(targets)), float(np.max(targets))
    else:
        lo, hi = -1.0, 1.0
    sym, lev = discretize(targets, cfg.n_levels, lo, hi)
    return sym, lev, (lo, hi)


def train_model(data: TaskData, model: str, gate_mode: str, cfg: TrainConfig, seed: int) -> TrainReport:
    """Alternate a derivative-free pass over (theta, c) with Adam epochs over the gate weights.

    Losses use steps 1..train_len only; every later step is predicted with
    frozen parameters.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    twi = model.startswith("twi")
    if twi != (gate_mode in ("known", "learnt")) or gate_mode not in ("none", "known", "learnt"):
        raise ValueError(f"gate mode {gate_mode!r} does not fit model {model!r}")
    T = len(data.inputs)
    L = cfg.train_len
    if T < L + 1:
        raise ValueError("data must extend past the training window")
    stochastic = model in STOCHASTIC
    start = time.perf_counter()
    part = _partition(cfg)
    opt = cfg.optimizer

    ss = np.random.SeedSequence(seed)
    ham_seq, init_seq, gate_seq, score_seq, eval_seq = ss.spawn(5)
    ham = sample_fixed_hamiltonian(part.n, ham_seq, cfg.delta_t)
    init_rng = np.random.default_rng(init_seq)
    targets_r = tuple(_targets_of(cfg))
    params = CircuitParams(init_rng.uniform(-np.pi, np.pi, len(targets_r)), 1.0, cfg.rotation_axis, targets_r)
    gate = GatingParams.random(np.random.default_rng(gate_seq)) if gate_mode == "learnt" else None
    initial_gate = gate
    score_rng = np.random.default_rng(score_seq)

    x_train, x_all = data.inputs[:L], data.inputs
    if stochastic:
        sym_all, lev_all, (lo, hi) = symbol_targets(data.targets, cfg)
        y_train = sym_all[:L]
    z_train = data.targets[:L]
    known = known_warp_alphas(data.warp, T, cfg.alpha_convention) if gate_mode == "known" else None

    def alphas_for(g: GatingParams | None, n: int) -> np.ndarray:
        if gate_mode == "none":
            return np.ones(n)
        if gate_mode == "known":
            return known[:n]
        return gating_forward(x_all[:n], g).alpha

    def circuit_of(p: CircuitParams) -> StepCircuit:
        return StepCircuit(p, ham, part)

    def loss_at(p: CircuitParams, alphas) -> float:
        c = circuit_of(p)
        if stochastic:
            return cross_entropy_loss(sqrnn_marginals(x_train, c, alphas), y_train)
        return quadratic_loss(twi_forward_exact(x_train, alphas, c), z_train)

    report_kw = dict(model=model, gate_mode=gate_mode, seed=int(seed), loss_kind="cross-entropy" if stochastic else "quadratic",
                     initial_gate=initial_gate, ham_fields=ham.fields, ham_couplings=ham.couplings,
                     inputs=x_all, targets=data.targets, train_len=L)

    history = []
    gate_updates = 0
    initial_loss = loss_at(params, alphas_for(gate, L))
    adam = AdamState.zeros(6)
    try:
        for rnd in range(opt.rounds):
            alphas = alphas_for(gate, L)
            res = derivative_free_minimize(lambda v: loss_at(params.with_vector(v), alphas), params.as_vector(), opt)
            params = params.with_vector(res.x)
            history.append(res.fun)
            if gate_mode != "learnt":
                continue
            circuit = circuit_of(params)

            def realization_loss(bits):
                if stochastic:
                    return cross_entropy_loss(sqrnn_marginals(x_train, circuit, bits), y_train)
                return quadratic_loss(twi_forward_sampled(x_train, bits, circuit), z_train)

            w = gate.as_vector()
            for _ in range(opt.gate_epochs):
                grad, _ = score_function_gradient(x_train, realization_loss, gate.with_vector(w), opt.score_samples, score_rng, opt.baseline)
                w, adam = adam_step(w, grad, adam, opt)
                gate_updates += 1
                if not np.all(np.isfinite(w)):
                    raise FloatingPointError("gate weights diverged")
            gate = gate.with_vector(w)
            history.append(loss_at(params, alphas_for(gate, L)))
            log.debug("round %d loss %.6g", rnd, history[-1])
    except FloatingPointError as exc:
        return TrainReport(theta=params.theta, out_scale=params.out_scale, gate=gate, initial_train_loss=initial_loss,
                           final_train_loss=float("nan"), loss_history=history, predictions=np.full(T, np.nan),
                           alphas=np.full(T, np.nan), cumulative=np.array([]), gate_updates=gate_updates,
                           status="diverged", message=str(exc), wall_clock=time.perf_counter() - start, **report_kw)

    before = params_hash(params.as_vector(), gate.as_vector() if gate else [])
    ev = evaluate_model(model, gate_mode, StepCircuit(params, ham, part), gate, data, cfg, np.random.default_rng(eval_seq))
    after = params_hash(params.as_vector(), gate.as_vector() if gate else [])
    floored = 0
    if stochastic:
        floored = floored_targets(sqrnn_marginals(x_train, circuit_of(params), ev.alphas[:L]), y_train)
    return TrainReport(
        theta=params.theta, out_scale=params.out_scale, gate=gate,
        initial_train_loss=initial_loss, final_train_loss=loss_at(params, ev.alphas[:L]),
        loss_history=history, predictions=ev.predictions, alphas=ev.alphas,
        cumulative=ev.cumulative, gate_updates=gate_updates, floored_targets=floored,
        wall_clock=time.perf_counter() - start, params_hash_before_eval=before, params_hash_after_eval=after,
        **report_kw | dict(targets=ev.targets),
    )


@dataclass
class Evaluation:
    predictions: np.ndarray
    targets: np.ndarray
    alphas: np.ndarray
    cumulative: np.ndarray


def evaluate_model(model: str, gate_mode: str, circuit: StepCircuit, gate: GatingParams | None, data: TaskData, cfg: TrainConfig, rng) -> Evaluation:
    """Predict the whole sequence with frozen parameters and accumulate error after the training window.

    Stochastic models are scored on one sampled symbol run, mapped back to
    level values and compared with the discretized targets.
    """
    T = len(data.inputs)
    if gate_mode == "none":
        alphas = np.ones(T)
    elif gate_mode == "known":
        alphas = known_warp_alphas(data.warp, T, cfg.alpha_convention)
    else:
        alphas = gating_forward(data.inputs, gate).alpha
    if model in STOCHASTIC:
        _, targets, (lo, hi) = symbol_targets(data.targets, cfg)
        if model == "sqrnn":
            ys = sqrnn_sample(data.inputs, circuit, rng)
        else:
            ys = twi_sqrnn_sample(data.inputs, alphas, circuit, rng)
        predictions = level_values(ys, cfg.n_levels, lo, hi)
    else:
        targets = data.targets
        predictions = twi_forward_exact(data.inputs, alphas, circuit, shots=cfg.shots or None, rng=rng)
    return Evaluation(predictions, targets, alphas, cumulative_loss_curve(predictions, targets, cfg.train_len + 1))
