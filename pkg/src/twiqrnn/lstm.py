"""Hidden-size-1 LSTM + dense readout (14 parameters), trained with full-batch Adam on MSE."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .gating import sigmoid
from .training import AdamState, OptimizerConfig, TrainReport, adam_step, cumulative_loss_curve, params_hash, quadratic_loss

GATES = ("input", "forget", "cell", "output")
N_PARAMS = 14


@dataclass(frozen=True)
class LstmParams:
    """Flat layout: for each gate (input, forget, cell, output) ``w_x, w_h, b``; then ``w_d, b_d``."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} parameters, got {v.shape}")
        object.__setattr__(self, "vector", v)

    def gate(self, name: str) -> np.ndarray:
        i = GATES.index(name)
        return self.vector[3 * i : 3 * i + 3]

    @property
    def dense(self) -> np.ndarray:
        return self.vector[12:]

    @classmethod
    def random(cls, rng, scale: float = 0.5) -> "LstmParams":
        return cls(rng.uniform(-scale, scale, N_PARAMS))


def param_count(params: LstmParams | None = None) -> int:
    return len(GATES) * 3 + 2


def _forward(xs, p: LstmParams):
    xs = np.asarray(xs, dtype=float)
    T = len(xs)
    W = p.vector[:12].reshape(4, 3)
    pre = np.empty((T, 4))
    act = np.empty((T, 4))
    h = np.zeros(T + 1)
    c = np.zeros(T + 1)
    for t in range(T):
        pre[t] = W[:, 0] * xs[t] + W[:, 1] * h[t] + W[:, 2]
        act[t] = sigmoid(pre[t])
        act[t, 2] = np.tanh(pre[t, 2])
        c[t + 1] = act[t, 1] * c[t] + act[t, 0] * act[t, 2]
        h[t + 1] = act[t, 3] * np.tanh(c[t + 1])
    z = p.dense[0] * h[1:] + p.dense[1]
    return z, (xs, pre, act, h, c)


def lstm_forward(xs, params: LstmParams) -> np.ndarray:
    return _forward(xs, params)[0]


def lstm_loss_and_grad(xs, targets, params: LstmParams) -> tuple[float, np.ndarray]:
    """MSE and its exact gradient by backpropagation through time."""
    z, (xs, pre, act, h, c) = _forward(xs, params)
    targets = np.asarray(targets, dtype=float)
    T = len(xs)
    W = params.vector[:12].reshape(4, 3)
    wd = params.dense[0]
    dz = 2 * (z - targets) / T
    grad = np.zeros(N_PARAMS)
    grad[12] = dz @ h[1:]
    grad[13] = dz.sum()
    dW = np.zeros((4, 3))
    dh_next, dc_next = 0.0, 0.0
    for t in range(T - 1, -1, -1):
        dh = dz[t] * wd + dh_next
        tc = np.tanh(c[t + 1])
        d_o = dh * tc
        dc = dh * act[t, 3] * (1 - tc**2) + dc_next
        d_i = dc * act[t, 2]
        d_f = dc * c[t]
        d_g = dc * act[t, 0]
        dpre = np.array([
            d_i * act[t, 0] * (1 - act[t, 0]),
            d_f * act[t, 1] * (1 - act[t, 1]),
            d_g * (1 - act[t, 2] ** 2),
            d_o * act[t, 3] * (1 - act[t, 3]),
        ])
        dW[:, 0] += dpre * xs[t]
        dW[:, 1] += dpre * h[t]
        dW[:, 2] += dpre
        dh_next = dpre @ W[:, 1]
        dc_next = dc * act[t, 1]
    grad[:12] = dW.reshape(-1)
    return quadratic_loss(z, targets), grad


@dataclass
class LstmConfig:
    epochs: int = 2000
    lr: float = 0.001
    train_len: int = 50
    init_scale: float = 0.5


def train_lstm(data, cfg: LstmConfig, seed: int) -> TrainReport:
    """Full-batch Adam on the first ``train_len`` steps; the rest is predicted with frozen weights."""
    start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    p = LstmParams.random(rng, cfg.init_scale)
    L = cfg.train_len
    x_train, z_train = data.inputs[:L], data.targets[:L]
    opt = OptimizerConfig(lr=cfg.lr)
    state = AdamState.zeros(N_PARAMS)
    initial, _ = lstm_loss_and_grad(x_train, z_train, p)
    history = []
    v = p.vector
    status, message = "ok", ""
    for _ in range(cfg.epochs):
        loss, g = lstm_loss_and_grad(x_train, z_train, LstmParams(v))
        history.append(loss)
        if not np.isfinite(loss):
            status, message = "diverged", "loss became non-finite"
            break
        v, state = adam_step(v, g, state, opt)
    p = LstmParams(v)
    before = params_hash(v)
    z = lstm_forward(data.inputs, p) if status == "ok" else np.full(len(data.inputs), np.nan)
    return TrainReport(
        model="lstm", gate_mode="none", seed=int(seed), loss_kind="quadratic",
        theta=v, out_scale=float("nan"), gate=None, initial_gate=None,
        ham_fields=np.array([]), ham_couplings=np.array([]),
        initial_train_loss=initial, final_train_loss=quadratic_loss(lstm_forward(x_train, p), z_train),
        loss_history=history, inputs=data.inputs, targets=data.targets, predictions=z,
        alphas=np.full(len(z), np.nan), cumulative=cumulative_loss_curve(z, data.targets, L + 1) if status == "ok" else np.array([]),
        train_len=L, status=status, message=message, wall_clock=time.perf_counter() - start,
        params_hash_before_eval=before, params_hash_after_eval=params_hash(v),
    )
