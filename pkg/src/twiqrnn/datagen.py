"""Experiment sequences: warped cosine, Lindblad spin dynamics, discretization and targets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quantum import kron, pauli_on


@dataclass(frozen=True)
class WarpSpec:
    """Time warp c(t): ``identity``, ``linear`` (c = a t) or ``sqrt`` (c = sqrt t)."""

    kind: str = "identity"
    a: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "linear", "sqrt"):
            raise ValueError(f"unknown warp {self.kind!r}")
        if self.kind == "linear":
            if self.a is None or not 0 < self.a <= 1:
                raise ValueError("linear warp needs 0 < a <= 1")
            self.hold  # validates 1/a

    @property
    def hold(self) -> int:
        """Steps each source sample is repeated under a linear warp."""
        if self.kind != "linear":
            return 1
        r = 1.0 / self.a
        if abs(r - round(r)) > 1e-9:
            raise ValueError(f"1/a = {r} is not an integer")
        return int(round(r))

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "identity":
            return np.ones_like(t)
        if self.kind == "linear":
            return np.full_like(t, self.a)
        return 0.5 / np.sqrt(t)

    def label(self) -> str:
        return f"linear-{self.a:g}" if self.kind == "linear" else self.kind

    @classmethod
    def parse(cls, text: str) -> "WarpSpec":
        text = text.strip()
        if text in ("identity", "sqrt"):
            return cls(text)
        if text.startswith("linear"):
            return cls("linear", float(text.split(":")[-1].split("-")[-1]))
        raise ValueError(f"cannot parse warp {text!r}")


@dataclass
class Sequence:
    values: np.ndarray
    times: np.ndarray
    source: str
    warp: WarpSpec = field(default_factory=WarpSpec)
    origin_value: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sequence contains non-finite samples")

    def __len__(self):
        return len(self.values)


def cosine_value(t):
    return (np.cos(np.pi * np.asarray(t, dtype=float) / 5) + 1) / 2


def cosine_sequence(T: int = 200) -> Sequence:
    if T < 1:
        raise ValueError("T must be positive")
    t = np.arange(1, T + 1)
    return Sequence(cosine_value(t), t, "cosine", WarpSpec(), float(cosine_value(0)))


def linear_warp_hold(source, a: float, T: int = 200) -> Sequence:
    """Hold each source sample for 1/a steps: x_t = source(ceil(t a))."""
    warp = WarpSpec("linear", a)
    k = warp.hold
    t = np.arange(1, T + 1)
    src_t = (t + k - 1) // k
    name = getattr(source, "__name__", "source")
    return Sequence(np.array([source(s) for s in src_t], dtype=float), src_t, name, warp, float(source(0)))


def warped_cosine(warp: WarpSpec, T: int = 200) -> Sequence:
    if warp.kind == "identity":
        return cosine_sequence(T)
    if warp.kind == "linear":
        seq = linear_warp_hold(cosine_value, warp.a, T)
        seq.source = "cosine"
        return seq
    raise ValueError("the cosine task supports identity and linear warps")


@dataclass(frozen=True)
class LindbladSpec:
    n: int = 3
    h: float = 2 * np.pi
    J: float = 0.1 * np.pi
    dissipation: float = float(np.sqrt(0.0002))
    dT: float = 1 / 20
    observable: str = "Z"
    observed_qubit: int = 0

    def hamiltonian(self) -> np.ndarray:
        n = self.n
        H = np.zeros((2**n, 2**n), dtype=complex)
        for i in range(n):
            H -= 0.5 * self.h * pauli_on("Z", i, n)
        for i in range(n - 1):
            for p in "XYZ":
                H -= 0.5 * self.J * pauli_on(p, i, n) @ pauli_on(p, i + 1, n)
        return H

    def jump_operators(self) -> list[np.ndarray]:
        return [self.dissipation * (pauli_on("X", k, self.n) + pauli_on("Y", k, self.n)) for k in range(self.n)]

    def initial_state(self) -> np.ndarray:
        plus = np.full(2**self.n, 2 ** (-self.n / 2), dtype=complex)
        return np.outer(plus, plus.conj())

    def observable_matrix(self) -> np.ndarray:
        return pauli_on(self.observable, self.observed_qubit, self.n)


def lindblad_generator(spec: LindbladSpec) -> np.ndarray:
    """Liouvillian as a matrix acting on row-major vec(sigma)."""
    d = 2**spec.n
    eye = np.eye(d)
    H = spec.hamiltonian()
    # row-major vec: vec(A S B) = kron(A, B.T) vec(S)
    L = -1j * (kron(H, eye) - kron(eye, H.T))
    for C in spec.jump_operators():
        CdC = C.conj().T @ C
        L += kron(C, C.conj()) - 0.5 * kron(eye, CdC.T) - 0.5 * kron(CdC, eye)
    return L


def lindblad_rhs(spec: LindbladSpec, sigma: np.ndarray) -> np.ndarray:
    H = spec.hamiltonian()
    out = -1j * (H @ sigma - sigma @ H)
    for C in spec.jump_operators():
        Cd = C.conj().T
        out += C @ sigma @ Cd - 0.5 * (sigma @ Cd @ C + Cd @ C @ sigma)
    return out


class IntegrationError(RuntimeError):
    pass


def lindblad_rk4(spec: LindbladSpec, t_grid, h: float = 1e-3, trace_tol: float = 1e-6) -> list[np.ndarray]:
    """Classic fixed-step RK4 from the |+>^n state, emitting sigma at each grid time.

    The state advances on the lattice 0, h, 2h, ...; a grid time between
    lattice points is reached by one partial step from the last lattice point.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and (t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0)):
        raise ValueError("time grid must be increasing and non-negative")
    L = lindblad_generator(spec)
    d = 2**spec.n

    def step(v, dt):
        k1 = L @ v
        k2 = L @ (v + 0.5 * dt * k1)
        k3 = L @ (v + 0.5 * dt * k2)
        k4 = L @ (v + dt * k3)
        return v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    v = spec.initial_state().reshape(-1)
    n_done = 0
    out = []
    for t in t_grid:
        n_target = int(np.floor(t / h + 1e-9))
        while n_done < n_target:
            v = step(v, h)
            n_done += 1
        rem = t - n_done * h
        w = step(v, rem) if rem > 1e-12 else v
        sigma = w.reshape(d, d).copy()
        drift = abs(np.trace(sigma) - 1)
        if drift > trace_tol:
            raise IntegrationError(f"trace drifted by {drift:.3e} at t={t}")
        out.append(sigma)
    return out


def spin_observable_sequence(warp: WarpSpec, T: int = 200, spec: LindbladSpec | None = None, h: float = 1e-3) -> Sequence:
    """<O>(t) of the Lindblad trajectory on the identity grid k dT or the sqrt grid sqrt(k dT)."""
    spec = spec or LindbladSpec()
    k = np.arange(1, T + 1)
    if warp.kind == "identity":
        times = k * spec.dT
    elif warp.kind == "sqrt":
        times = np.sqrt(k * spec.dT)
    else:
        raise ValueError("the spin task supports identity and sqrt warps")
    obs = spec.observable_matrix()
    states = lindblad_rk4(spec, np.concatenate([[0.0], times]), h)
    vals = np.array([np.real(np.trace(s @ obs)) for s in states])
    return Sequence(vals[1:], times, "spin", warp, float(vals[0]))


def discretize(values, n_levels: int = 8, lo: float = -1.0, hi: float = 1.0):
    """Nearest of ``n_levels`` equally spaced levels on [lo, hi]; ties go to the lower level.

    Returns (symbols, level values).
    """
    if n_levels < 2:
        raise ValueError("need at least two levels")
    values = np.asarray(values, dtype=float)
    step = (hi - lo) / (n_levels - 1)
    pos = (values - lo) / step
    symbols = np.clip(np.ceil(np.round(pos - 0.5, 12)), 0, n_levels - 1).astype(int)
    return symbols, level_values(symbols, n_levels, lo, hi)


def level_values(symbols, n_levels: int = 8, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    return lo + np.asarray(symbols) * (hi - lo) / (n_levels - 1)


@dataclass
class TaskData:
    """Model inputs and aligned targets; ``times`` is the continuous time of each input."""

    inputs: np.ndarray
    targets: np.ndarray
    times: np.ndarray
    task: str
    warp: WarpSpec


def make_targets(task: str, seq: Sequence) -> np.ndarray:
    """remember: target_t = x_{t-1} (x_0 from the source at time 0); predict: target_t = x_{t+1}."""
    if len(seq) < 2:
        raise ValueError("need at least two samples")
    if task == "remember":
        return np.concatenate([[seq.origin_value], seq.values[:-1]])
    if task == "predict":
        return seq.values[1:].copy()
    raise ValueError(f"unknown task {task!r}")


def make_task(name: str, warp: WarpSpec, T: int = 200, spin_spec: LindbladSpec | None = None) -> TaskData:
    """``cosine-remember`` or ``spin-predict``."""
    if name == "cosine-remember":
        seq = warped_cosine(warp, T)
        return TaskData(seq.values, make_targets("remember", seq), seq.times, name, warp)
    if name == "spin-predict":
        # one extra sample so that T inputs all have a next-step target
        seq = spin_observable_sequence(warp, T + 1, spin_spec)
        return TaskData(seq.values[:-1], make_targets("predict", seq), seq.times[:-1], name, warp)
    raise ValueError(f"unknown task {name!r}")
