"""Parameterized step unitary: input encoding, trainable rotations, fixed Hamiltonian evolution."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quantum import I2, X, Y, Z, QubitPartition, StateAudit, hermitian_expm, kron, pauli_on

log = logging.getLogger(__name__)

DELTA_T = 0.17
AXES = {"X": X, "Y": Y, "Z": Z}


def rotation(axis: str, angle: float) -> np.ndarray:
    """exp(-i angle P / 2) for the Pauli ``P`` named by ``axis``."""
    p = AXES[axis]
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * p


@dataclass(frozen=True)
class FixedHamiltonian:
    """H = sum_i a_i X_i + sum_{i>j} J_ij Z_i Z_j, evolved for ``delta_t``.

    ``couplings`` is ordered (1,0), (2,0), (2,1), (3,0), ...
    """

    n: int
    fields: np.ndarray
    couplings: np.ndarray
    delta_t: float = DELTA_T

    def __post_init__(self):
        fields = np.asarray(self.fields, dtype=float)
        couplings = np.asarray(self.couplings, dtype=float)
        if fields.shape != (self.n,) or couplings.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError("coefficient counts do not match qubit count")
        if np.any(np.abs(fields) > 1) or np.any(np.abs(couplings) > 1):
            raise ValueError("coefficients must lie in [-1, 1]")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "couplings", couplings)

    @staticmethod
    def pairs(n: int) -> list[tuple[int, int]]:
        return [(i, j) for i in range(n) for j in range(i)]

    def matrix(self) -> np.ndarray:
        h = np.zeros((2**self.n, 2**self.n), dtype=complex)
        for i, a in enumerate(self.fields):
            h += a * pauli_on("X", i, self.n)
        for (i, j), jij in zip(self.pairs(self.n), self.couplings):
            h += jij * pauli_on("Z", i, self.n) @ pauli_on("Z", j, self.n)
        return h

    @cached_property
    def evolution(self) -> np.ndarray:
        """exp(-i H delta_t); computed once and reused."""
        u = hermitian_expm(self.matrix(), self.delta_t)
        u.setflags(write=False)
        return u

    @classmethod
    def zero(cls, n: int, delta_t: float = DELTA_T) -> "FixedHamiltonian":
        return cls(n, np.zeros(n), np.zeros(n * (n - 1) // 2), delta_t)


def sample_fixed_hamiltonian(n: int, seed, delta_t: float = DELTA_T) -> FixedHamiltonian:
    if n < 2:
        raise ValueError("need at least two qubits")
    rng = np.random.default_rng(seed)
    fields = rng.uniform(-1.0, 1.0, n)
    couplings = rng.uniform(-1.0, 1.0, n * (n - 1) // 2)
    return FixedHamiltonian(n, fields, couplings, delta_t)


@dataclass(frozen=True)
class CircuitParams:
    theta: np.ndarray
    out_scale: float = 1.0
    rotation_axis: str = "Y"
    rotation_targets: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if not np.all(np.isfinite(theta)):
            raise ValueError("rotation angles must be finite")
        if len(theta) != len(self.rotation_targets):
            raise ValueError("one angle per rotation target")
        if self.rotation_axis not in AXES:
            raise ValueError(f"unknown axis {self.rotation_axis!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "rotation_targets", tuple(int(t) for t in self.rotation_targets))

    def as_vector(self) -> np.ndarray:
        """Flat (theta..., c) vector handed to the derivative-free optimizer."""
        return np.append(self.theta, self.out_scale)

    def with_vector(self, v) -> "CircuitParams":
        v = np.asarray(v, dtype=float)
        return CircuitParams(v[:-1], float(v[-1]), self.rotation_axis, self.rotation_targets)


@dataclass(frozen=True)
class EncodingSpec:
    n_b: int


def encoding_angle(x: float) -> float:
    if np.isnan(x):
        raise ValueError("NaN input cannot be encoded")
    if abs(x) > 1:
        log.warning("input %.6g outside [-1, 1], clamped before encoding", x)
        x = float(np.clip(x, -1.0, 1.0))
    return float(np.arccos(x))


def build_encoding(x: float, spec: EncodingSpec) -> np.ndarray:
    """R_y(arccos x) applied to every output qubit."""
    r = rotation("Y", encoding_angle(x))
    return kron(*[r] * spec.n_b)


def build_rotation_layer(params: CircuitParams, part: QubitPartition) -> np.ndarray:
    gates = [I2] * part.n
    for target, angle in zip(params.rotation_targets, params.theta):
        if not 0 <= target < part.n:
            raise ValueError(f"rotation target {target} outside register of {part.n} qubits")
        gates[target] = rotation(params.rotation_axis, angle)
    return kron(*gates)


def assemble_step_unitary(x: float, params: CircuitParams, ham: FixedHamiltonian, part: QubitPartition) -> np.ndarray:
    enc = kron(np.eye(part.dim_a), build_encoding(x, EncodingSpec(part.n_b)))
    return ham.evolution @ build_rotation_layer(params, part) @ enc


@dataclass
class StepCircuit:
    """U(x, theta) bundled with its register split, caching everything independent of x.

    Every model step starts from ``rho_A (x) |0><0|_B``, so only the columns of
    U with the output register in |0...0> matter. ``isometry(x)`` returns that
    ``dim x dim_A`` block.
    """

    params: CircuitParams
    ham: FixedHamiltonian
    part: QubitPartition
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.ham.n != self.part.n:
            raise ValueError("Hamiltonian and partition disagree on qubit count")
        self._fixed = self.ham.evolution @ build_rotation_layer(self.params, self.part)
        self._fixed3 = self._fixed.reshape(self.part.dim, self.part.dim_a, self.part.dim_b)
        if StateAudit.active is not None:
            StateAudit.active.unitary(self._fixed)

    @property
    def out_scale(self) -> float:
        return self.params.out_scale

    def unitary(self, x: float) -> np.ndarray:
        enc = kron(np.eye(self.part.dim_a), build_encoding(x, EncodingSpec(self.part.n_b)))
        return self._fixed @ enc

    def isometry(self, x: float) -> np.ndarray:
        key = float(x)
        k = self._cache.get(key)
        if k is None:
            phi = encoding_angle(key)
            single = np.array([np.cos(phi / 2), np.sin(phi / 2)], dtype=complex)
            v = kron(*[single[:, None]] * self.part.n_b)[:, 0]
            k = self._fixed3 @ v
            if len(self._cache) < 4096:
                self._cache[key] = k
        if StateAudit.active is not None:
            StateAudit.active.unitary(k)
        return k
