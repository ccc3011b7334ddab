"""QRNN, TWI-QRNN, SQRNN and TWI-SQRNN recursions on exact density matrices.

All models share one step: the memory state ``rho_A`` is joined with a fresh
output register in |0...0>, optionally pushed through U(x_t, theta), and the
output register is then read out and traced away (or collapsed, for the
stochastic samplers).
"""
from __future__ import annotations

import numpy as np

from .circuit import StepCircuit, assemble_step_unitary
from .quantum import (
    Observable,
    QubitPartition,
    StateAudit,
    born_probabilities,
    collapse,
    mean_z_observable,
    partial_trace,
)

# the global-register oracle holds a statevector, so it can go past the density-matrix cap
MAX_GLOBAL_QUBITS = 12


def initial_memory(part: QubitPartition) -> np.ndarray:
    rho = np.zeros((part.dim_a, part.dim_a), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def idle_joint(memory: np.ndarray, part: QubitPartition) -> np.ndarray:
    """rho_A (x) |0><0|_B."""
    joint = np.zeros((part.dim_a, part.dim_b, part.dim_a, part.dim_b), dtype=complex)
    joint[:, 0, :, 0] = memory
    return joint.reshape(part.dim, part.dim)


def _applied_joint(memory: np.ndarray, x: float, circuit: StepCircuit) -> np.ndarray:
    k = circuit.isometry(x)
    return k @ memory @ k.conj().T


def _readout(joint: np.ndarray, obs: Observable | None, part: QubitPartition) -> float:
    if obs is None:
        obs = _mean_z(part.n_b)
    rho_b = partial_trace(joint, part, "A")
    if obs.is_diagonal:
        return float(np.real(np.diagonal(rho_b)) @ np.real(np.diagonal(obs.matrix)))
    return float(np.real(np.trace(rho_b @ obs.matrix)))


_MEAN_Z: dict[int, Observable] = {}


def _mean_z(n_b: int) -> Observable:
    if n_b not in _MEAN_Z:
        _MEAN_Z[n_b] = mean_z_observable(n_b)
    return _MEAN_Z[n_b]


def _finish(joint: np.ndarray, part: QubitPartition) -> np.ndarray:
    memory = partial_trace(joint, part, "B")
    if StateAudit.active is not None:
        StateAudit.active.density(joint)
        StateAudit.active.density(memory)
    return memory


def qrnn_step(memory: np.ndarray, x: float, circuit: StepCircuit, obs: Observable | None = None):
    """One QRNN update. Returns (joint, next memory, unscaled expectation)."""
    joint = _applied_joint(memory, x, circuit)
    return joint, _finish(joint, circuit.part), _readout(joint, obs, circuit.part)


def twi_step_exact(memory: np.ndarray, x: float, alpha: float, circuit: StepCircuit, obs: Observable | None = None):
    """Convex mixture of the idle branch (weight 1 - alpha) and the unitary branch (weight alpha)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"gate probability {alpha} outside [0, 1]")
    part = circuit.part
    if alpha == 1.0:
        joint = _applied_joint(memory, x, circuit)
    elif alpha == 0.0:
        joint = idle_joint(memory, part)
    else:
        joint = (1 - alpha) * idle_joint(memory, part) + alpha * _applied_joint(memory, x, circuit)
    return joint, _finish(joint, part), _readout(joint, obs, part)


def _shot_estimate(value: float, shots: int | None, rng) -> float:
    # each shot of a qubit's Z lands on +1 with probability (1 + <Z>) / 2
    if not shots:
        return value
    p = np.clip((1 + value) / 2, 0.0, 1.0)
    return 2 * rng.binomial(shots, p) / shots - 1


def twi_forward_exact(xs, alphas, circuit: StepCircuit, obs: Observable | None = None, shots: int | None = None, rng=None) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if len(xs) < 1 or alphas.shape != xs.shape:
        raise ValueError("need one gate probability per input sample")
    if shots:
        rng = np.random.default_rng(rng)
    memory = initial_memory(circuit.part)
    out = np.empty(len(xs))
    for t, (x, a) in enumerate(zip(xs, alphas)):
        _, memory, e = twi_step_exact(memory, x, float(a), circuit, obs)
        out[t] = circuit.out_scale * _shot_estimate(e, shots, rng)
    return out


def qrnn_forward(xs, circuit: StepCircuit, obs: Observable | None = None, shots: int | None = None, rng=None) -> np.ndarray:
    """z_t = c * <O_B>_t with the memory threaded from |0><0|."""
    return twi_forward_exact(xs, np.ones(len(xs)), circuit, obs, shots, rng)


def twi_forward_sampled(xs, bits, circuit: StepCircuit, obs: Observable | None = None) -> np.ndarray:
    """One gate realization: the unitary fires where ``bits`` is 1, identity elsewhere."""
    bits = np.asarray(bits)
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("gate bits must be 0 or 1")
    return twi_forward_exact(xs, bits.astype(float), circuit, obs)


def sqrnn_marginals(xs, circuit: StepCircuit, alphas=None) -> np.ndarray:
    """Per-step Born probabilities of the output register under the averaged (uncollapsed) recursion.

    ``alphas`` switches on TWI gating: probabilities in (0, 1) give the exact
    mixture, a 0/1 vector gives a single gate realization.
    """
    xs = np.asarray(xs, dtype=float)
    alphas = np.ones(len(xs)) if alphas is None else np.asarray(alphas, dtype=float)
    part = circuit.part
    memory = initial_memory(part)
    probs = np.empty((len(xs), part.dim_b))
    for t, (x, a) in enumerate(zip(xs, alphas)):
        joint, memory, _ = twi_step_exact(memory, x, float(a), circuit)
        probs[t] = born_probabilities(joint, part)
    return probs


def _sample_run(xs, bits, circuit: StepCircuit, rng) -> np.ndarray:
    part = circuit.part
    memory = initial_memory(part)
    ys = np.empty(len(xs), dtype=int)
    for t, x in enumerate(xs):
        b = bits(t) if callable(bits) else bits[t]
        joint = _applied_joint(memory, x, circuit) if b else idle_joint(memory, part)
        p = born_probabilities(joint, part)
        y = int(rng.choice(part.dim_b, p=p / p.sum()))
        memory, _ = collapse(joint, y, part)
        if StateAudit.active is not None:
            StateAudit.active.density(memory)
        ys[t] = y
    return ys


def sqrnn_sample(xs, circuit: StepCircuit, rng) -> np.ndarray:
    """Single-shot symbol sequence: measure the output register and collapse the memory each step."""
    rng = np.random.default_rng(rng)
    return _sample_run(np.asarray(xs, dtype=float), np.ones(len(xs), dtype=int), circuit, rng)


def twi_sqrnn_sample(xs, alphas, circuit: StepCircuit, rng) -> np.ndarray:
    """Single-shot run where each step's unitary fires with probability ``alphas[t]``."""
    rng = np.random.default_rng(rng)
    alphas = np.asarray(alphas, dtype=float)

    def gate(t):
        # deterministic gates draw nothing, so alpha = 1 reproduces the plain sampler's stream
        a = alphas[t]
        return a >= 1 or (a > 0 and rng.random() < a)

    return _sample_run(np.asarray(xs, dtype=float), gate, circuit, rng)


def symbol_bits(y: int, n_b: int) -> tuple[int, ...]:
    """Big-endian bitstring of an output symbol (first output qubit is the most significant bit)."""
    return tuple((y >> (n_b - 1 - k)) & 1 for k in range(n_b))


def dissipative_forward(xs, circuit: StepCircuit, obs: Observable | None = None) -> np.ndarray:
    """Same outputs computed on one global register holding the memory and all T output blocks.

    V_t applies U(x_t, theta) to the memory and the t-th output block; nothing
    is traced or measured until every step has run. The global start state is
    pure and every V_t is unitary, so the register is carried as a state vector.
    """
    xs = np.asarray(xs, dtype=float)
    part = circuit.part
    T = len(xs)
    n_total = part.n_a + T * part.n_b
    if n_total > MAX_GLOBAL_QUBITS:
        raise ValueError(f"global register of {n_total} qubits exceeds {MAX_GLOBAL_QUBITS}")
    obs = obs or _mean_z(part.n_b)
    psi = np.zeros([2] * n_total, dtype=complex)
    psi[(0,) * n_total] = 1.0
    for t, x in enumerate(xs):
        u = assemble_step_unitary(x, circuit.params, circuit.ham, part)
        wires = list(range(part.n_a)) + [part.n_a + t * part.n_b + k for k in range(part.n_b)]
        psi = _apply(u, psi, wires)
    out = np.empty(T)
    for t in range(T):
        block = [part.n_a + t * part.n_b + k for k in range(part.n_b)]
        rho_t = _reduced(psi, block)
        out[t] = circuit.out_scale * float(np.real(np.trace(rho_t @ obs.matrix)))
    return out


def _apply(u: np.ndarray, psi: np.ndarray, wires: list[int]) -> np.ndarray:
    k = len(wires)
    ut = u.reshape([2] * (2 * k))
    moved = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), wires))
    # tensordot puts the acted-on axes first; move them back
    return np.moveaxis(moved, list(range(k)), wires)


def _reduced(psi: np.ndarray, keep: list[int]) -> np.ndarray:
    n = psi.ndim
    rest = [q for q in range(n) if q not in keep]
    m = np.transpose(psi, keep + rest).reshape(2 ** len(keep), -1)
    return m @ m.conj().T
