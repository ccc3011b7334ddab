"""Time-warp-invariant quantum recurrent models simulated with dense density matrices."""
from .circuit import CircuitParams, FixedHamiltonian, StepCircuit, sample_fixed_hamiltonian
from .datagen import LindbladSpec, TaskData, WarpSpec, make_task
from .experiment import ExperimentConfig, load_config
from .gating import GatingParams, gating_forward, known_warp_alphas
from .lstm import LstmConfig, LstmParams, lstm_forward, train_lstm
from .models import (
    dissipative_forward,
    qrnn_forward,
    sqrnn_marginals,
    sqrnn_sample,
    twi_forward_exact,
    twi_forward_sampled,
    twi_sqrnn_sample,
)
from .quantum import Observable, QubitPartition, audit_states
from .training import OptimizerConfig, TrainConfig, TrainReport, train_model

__all__ = [
    "CircuitParams", "FixedHamiltonian", "StepCircuit", "sample_fixed_hamiltonian",
    "LindbladSpec", "TaskData", "WarpSpec", "make_task",
    "ExperimentConfig", "load_config",
    "GatingParams", "gating_forward", "known_warp_alphas",
    "LstmConfig", "LstmParams", "lstm_forward", "train_lstm",
    "dissipative_forward", "qrnn_forward", "sqrnn_marginals", "sqrnn_sample",
    "twi_forward_exact", "twi_forward_sampled", "twi_sqrnn_sample",
    "Observable", "QubitPartition", "audit_states",
    "OptimizerConfig", "TrainConfig", "TrainReport", "train_model",
]
