"""Dense density-matrix primitives.

Registers are split into a memory part (A) and an output part (B). Memory
qubits occupy the most significant bit positions, so a joint index is
``a * 2**n_b + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

MAX_QUBITS = 10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


class DimensionError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class QubitPartition:
    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError("both registers need at least one qubit")
        if self.n > MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits are supported")

    @property
    def n(self) -> int:
        return self.n_a + self.n_b

    @property
    def dim_a(self) -> int:
        return 2**self.n_a

    @property
    def dim_b(self) -> int:
        return 2**self.n_b

    @property
    def dim(self) -> int:
        return 2**self.n


@dataclass(frozen=True)
class Observable:
    """Hermitian observable with a cached eigendecomposition."""

    matrix: np.ndarray
    values: np.ndarray = field(init=False, repr=False)
    vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("observable must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("observable is not Hermitian")
        vals, vecs = jacobi_eigh(m)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def projectors(self) -> list[np.ndarray]:
        return [np.outer(v, v.conj()) for v in self.vectors.T]

    @property
    def is_diagonal(self) -> bool:
        return not np.any(self.matrix - np.diag(np.diag(self.matrix)))


def pauli_on(pauli: str | np.ndarray, target: int, n: int) -> np.ndarray:
    """Single-qubit operator on qubit ``target`` of an ``n``-qubit register (qubit 0 is most significant)."""
    p = PAULIS[pauli] if isinstance(pauli, str) else pauli
    return kron(*[p if k == target else I2 for k in range(n)])


def mean_z_observable(n: int) -> Observable:
    diag = np.zeros(2**n)
    for k in range(n):
        bits = (np.arange(2**n) >> (n - 1 - k)) & 1
        diag += 1 - 2 * bits
    return Observable(np.diag(diag / n).astype(complex))


def kron(*ops: np.ndarray) -> np.ndarray:
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def ket0_projector(n: int) -> np.ndarray:
    p = np.zeros((2**n, 2**n), dtype=complex)
    p[0, 0] = 1.0
    return p


def _check_joint(rho: np.ndarray, part: QubitPartition) -> None:
    if rho.shape != (part.dim, part.dim):
        raise DimensionError(f"expected a {part.dim}x{part.dim} matrix, got {rho.shape}")


def partial_trace(rho: np.ndarray, part: QubitPartition, traced: str = "B") -> np.ndarray:
    """Trace out register ``traced`` ("A" or "B") and return the reduced state of the other."""
    _check_joint(rho, part)
    r = rho.reshape(part.dim_a, part.dim_b, part.dim_a, part.dim_b)
    if traced == "B":
        return np.einsum("ijkj->ik", r)
    if traced == "A":
        return np.einsum("ijik->jk", r)
    raise ValueError(f"unknown subsystem {traced!r}")


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Circle-method schedule: n - 1 rounds of disjoint (p, q) pairs covering every pair once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(h: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Pairs are visited in round-robin order so each round rotates n/2 disjoint
    planes at once. Returns ascending eigenvalues and the unitary whose
    columns are the eigenvectors, so that h = V diag(w) V^dagger.
    """
    a = np.array(h, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DimensionError("matrix must be square")
    a = (a + a.conj().T) / 2
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.diagonal().copy(), v
    scale = max(np.linalg.norm(a), 1e-300)
    schedule = _round_robin(n)
    for _ in range(max_sweeps):
        if np.linalg.norm(a - np.diag(np.diag(a))) <= tol * scale:
            break
        for p, q in schedule:
            apq = a[p, q]
            r = np.abs(apq)
            live = r > 1e-18 * scale
            if not live.any():
                continue
            p, q, apq, r = p[live], q[live], apq[live], r[live]
            # phase each pair to a real symmetric 2x2 block, then rotate it diagonal
            ph = (apq / r).conj()
            theta = 0.5 * np.arctan2(2 * r, (a[q, q] - a[p, p]).real)
            c, s = np.cos(theta), np.sin(theta)
            g = np.eye(n, dtype=complex)
            g[p, p], g[p, q] = c, s
            g[q, p], g[q, q] = -s * ph, c * ph
            a = g.conj().T @ a @ g
            v = v @ g
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_expm(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian ``h``."""
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-8:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = jacobi_eigh(h)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def expectation(rho: np.ndarray, obs: Observable, part: QubitPartition) -> float:
    """Tr[rho (I_A x O_B)] for an observable on the output register."""
    _check_joint(rho, part)
    if obs.dim != part.dim_b:
        raise DimensionError("observable must act on the output register")
    rho_b = partial_trace(rho, part, "A")
    val = np.trace(rho_b @ obs.matrix)
    if abs(val.imag) > 1e-10:
        raise InvalidStateError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def born_probabilities(rho: np.ndarray, part: QubitPartition) -> np.ndarray:
    """Computational-basis outcome probabilities of the output register."""
    _check_joint(rho, part)
    d = np.diagonal(rho).real.reshape(part.dim_a, part.dim_b).sum(axis=0)
    if d.min() < -1e-12:
        raise InvalidStateError(f"negative probability {d.min():.3e}")
    return np.clip(d, 0.0, None)


def collapse(rho: np.ndarray, outcome: int, part: QubitPartition) -> tuple[np.ndarray, float]:
    """Project the output register onto ``|outcome>`` and return (memory state, probability)."""
    _check_joint(rho, part)
    if not 0 <= outcome < part.dim_b:
        raise ValueError(f"outcome {outcome} out of range")
    r = rho.reshape(part.dim_a, part.dim_b, part.dim_a, part.dim_b)
    block = r[:, outcome, :, outcome]
    p = float(np.trace(block).real)
    if p <= 1e-14:
        raise InvalidStateError(f"outcome {outcome} has zero probability")
    return block / p, p


def density_violations(rho: np.ndarray, tol: float = 1e-10) -> list[str]:
    problems = []
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        problems.append(f"hermiticity residual {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        problems.append(f"trace {tr.real:.12f}")
    lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lam < -tol:
        problems.append(f"min eigenvalue {lam:.3e}")
    return problems


def check_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Raise ``InvalidStateError`` unless ``rho`` is Hermitian, unit trace and PSD within ``tol``."""
    problems = density_violations(rho, tol)
    if problems:
        raise InvalidStateError("; ".join(problems))
    return rho


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


class StateAudit:
    """Opt-in validator for every density matrix and unitary a model produces.

    Off by default; ``with audit_states() as audit:`` turns it on and records
    the number of objects checked.
    """

    active: "StateAudit | None" = None

    def __init__(self, tol: float = 1e-10):
        self.tol = tol
        self.densities = 0
        self.unitaries = 0

    def density(self, rho: np.ndarray) -> None:
        check_density(rho, self.tol)
        self.densities += 1

    def unitary(self, u: np.ndarray) -> None:
        err = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))
        if err > self.tol:
            raise InvalidStateError(f"unitarity residual {err:.3e}")
        self.unitaries += 1


class audit_states:
    def __init__(self, tol: float = 1e-10):
        self.audit = StateAudit(tol)

    def __enter__(self) -> StateAudit:
        self._prev = StateAudit.active
        StateAudit.active = self.audit
        return self.audit

    def __exit__(self, *exc):
        StateAudit.active = self._prev
        return False
