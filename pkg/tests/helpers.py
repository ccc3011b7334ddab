import numpy as np

from twiqrnn.circuit import CircuitParams, FixedHamiltonian, StepCircuit, sample_fixed_hamiltonian
from twiqrnn.quantum import QubitPartition


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_hermitian(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_circuit(n_a, n_b, rng, out_scale=None, axis="Y"):
    part = QubitPartition(n_a, n_b)
    ham = sample_fixed_hamiltonian(part.n, int(rng.integers(2**31)))
    theta = rng.uniform(-np.pi, np.pi, n_a)
    c = rng.uniform(0.5, 1.5) if out_scale is None else out_scale
    return StepCircuit(CircuitParams(theta, c, axis, tuple(range(n_a))), ham, part)


def identity_circuit(n_a=3, n_b=3, c=1.0):
    part = QubitPartition(n_a, n_b)
    return StepCircuit(CircuitParams(np.zeros(n_a), c, "Y", tuple(range(n_a))), FixedHamiltonian.zero(part.n), part)


def all_bit_patterns(T):
    return ((np.arange(2**T)[:, None] >> np.arange(T - 1, -1, -1)) & 1).astype(int)
