"""Parallel proportional fusion of a spiking-network head and a variational quantum circuit head."""
from .data import Dataset, NoiseSpec, add_noise, load_idx, load_split, reduce_to_angles, subset
from .errors import ConfigError, FormatError, ShapeError, ValidationError
from .fusion import HybridModel, LinearLayer, backward, forward, fuse, nll_loss, relu, softmax
from .qsim import (
    CircuitSpec, Gate, StateVector, apply_gate, default_circuit, expval_z, frqi_encode,
    new_state, param_shift_grad, romega_matrix, run_circuit,
)
from .snn import EncoderConfig, LIFParams, lif_run, poisson_encode, temporal_avg_pool
from .train import (
    RunRecord, TrainConfig, build_model, evaluate, sgd_step, sweep_noise, sweep_qubits,
    sweep_xi, train,
)

__version__ = "0.1.0"
