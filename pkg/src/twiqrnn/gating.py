"""Classical adaptive gate: scalar tanh RNN -> sigmoid gate probability, Bernoulli gates, score-function gradient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import WarpSpec

ALPHA_FLOOR = 1e-6


def sigmoid(z):
    return 0.5 * (1 + np.tanh(0.5 * np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class GatingParams:
    """phi_t = w_x x_t + w_h h_t + b_phi,  h_t = tanh(wh_x x_t + wh_h h_{t-1} + b_h)."""

    w_x: float = 0.0
    w_h: float = 0.0
    wh_x: float = 0.0
    wh_h: float = 0.0
    b_phi: float = 0.0
    b_h: float = 0.0
    h0: float = 0.0

    NAMES = ("w_x", "w_h", "wh_x", "wh_h", "b_phi", "b_h")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in self.NAMES])

    def with_vector(self, v) -> "GatingParams":
        return GatingParams(*map(float, v), h0=self.h0)

    @classmethod
    def random(cls, rng, scale: float = 0.5) -> "GatingParams":
        return cls(*rng.uniform(-scale, scale, len(cls.NAMES)))


@dataclass
class GateTrace:
    h: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    bits: np.ndarray | None = None
    log_q: float | None = None


def gating_forward(xs, params: GatingParams) -> GateTrace:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim > 1:
        xs = xs[:, 0]
    T = len(xs)
    h = np.empty(T)
    prev = params.h0
    for t in range(T):
        prev = np.tanh(params.wh_x * xs[t] + params.wh_h * prev + params.b_h)
        h[t] = prev
    phi = params.w_x * xs + params.w_h * h + params.b_phi
    if not np.all(np.isfinite(phi)):
        raise FloatingPointError("gate pre-activation is not finite")
    return GateTrace(h, phi, sigmoid(phi))


def clamp_alphas(alphas) -> np.ndarray:
    return np.clip(np.asarray(alphas, dtype=float), ALPHA_FLOOR, 1.0)


def known_warp_alphas(warp: WarpSpec, T: int, convention: str = "derivative") -> np.ndarray:
    """Gate probabilities from a known warp: dc/dt at step t (t = 1..T), clamped to [1e-6, 1].

    ``convention="complement"`` uses 1 - dc/dt instead.
    """
    d = clamp_alphas(warp.derivative(np.arange(1, T + 1)))
    if convention == "derivative":
        return d
    if convention == "complement":
        return clamp_alphas(1 - d) if warp.kind != "identity" else d
    raise ValueError(f"unknown alpha convention {convention!r}")


def log_q(bits, alphas) -> float:
    bits = np.asarray(bits)
    alphas = np.asarray(alphas, dtype=float)
    if np.any((alphas == 0) & (bits == 1)) or np.any((alphas == 1) & (bits == 0)):
        raise ValueError("gate realization has zero probability")
    with np.errstate(divide="ignore"):
        terms = np.where(bits == 1, np.log(alphas), np.log1p(-alphas))
    return float(terms.sum())


def sample_gates(alphas, rng) -> tuple[np.ndarray, float]:
    alphas = np.asarray(alphas, dtype=float)
    bits = (rng.random(len(alphas)) < alphas).astype(int)
    return bits, log_q(bits, alphas)


def grad_log_q(xs, params: GatingParams, bits, trace: GateTrace | None = None) -> np.ndarray:
    """d log q(bits | x, W) / dW by backpropagation through the gate recursion."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim > 1:
        xs = xs[:, 0]
    trace = trace or gating_forward(xs, params)
    bits = np.asarray(bits, dtype=float)
    dphi = bits - trace.alpha  # d/dphi of b log s(phi) + (1-b) log(1-s(phi))
    g = np.zeros(6)
    g[0] = dphi @ xs
    g[1] = dphi @ trace.h
    g[4] = dphi.sum()
    dh_next = 0.0
    for t in range(len(xs) - 1, -1, -1):
        dh = dphi[t] * params.w_h + dh_next
        da = dh * (1 - trace.h[t] ** 2)
        h_prev = trace.h[t - 1] if t > 0 else params.h0
        g[2] += da * xs[t]
        g[3] += da * h_prev
        g[5] += da
        dh_next = da * params.wh_h
    return g


def score_function_gradient(xs, loss_fn, params: GatingParams, n_samples: int, rng, baseline: bool = True):
    """Log-derivative estimate of d E_q[loss(bits)] / dW.

    ``loss_fn(bits)`` evaluates the model on one gate realization. With the
    mean baseline the sum is divided by n - 1, which keeps it unbiased.
    Returns (gradient, mean loss).
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    trace = gating_forward(xs, params)
    samples = [sample_gates(trace.alpha, rng)[0] for _ in range(n_samples)]
    losses = np.array([loss_fn(b) for b in samples])
    scores = np.array([grad_log_q(xs, params, b, trace) for b in samples])
    if np.ptp(losses) == 0:
        return np.zeros(6), float(losses[0])
    if baseline:
        grad = (losses - losses.mean()) @ scores / (n_samples - 1)
    else:
        grad = losses @ scores / n_samples
    return grad, float(losses.mean())
