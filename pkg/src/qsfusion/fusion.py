"""Classical and quantum readout heads and their proportional fusion.

Both heads end in a softmax. The fused distribution is
``xi * Q_quantum + (1 - xi) * Q_classical`` and training minimizes the mean
negative log of the fused probability of the true class.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .data import reduce_to_angles
from .errors import ConfigError, ShapeError, ValidationError
from .snn import EncoderConfig, LIFParams, spike_rates

N_CLASSES = 10
PROB_FLOOR = 1e-12


@dataclass
class LinearLayer:
    w: np.ndarray
    b: np.ndarray

    @classmethod
    def glorot(cls, d_in, d_out, rng):
        limit = np.sqrt(6.0 / (d_in + d_out))
        return cls(rng.uniform(-limit, limit, size=(d_out, d_in)), np.zeros(d_out))

    @property
    def d_in(self):
        return self.w.shape[1]

    @property
    def d_out(self):
        return self.w.shape[0]


def linear_forward(layer, x):
    """``w @ x + b`` for one vector, or row-wise for a ``(B, d_in)`` batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.d_in:
        raise ShapeError(f"layer expects {layer.d_in} inputs, got {x.shape[-1]}")
    return x @ layer.w.T + layer.b


def relu(x):
    return np.maximum(0.0, x)


def softmax(q):
    """Softmax along the last axis, shifted by the max for stability."""
    q = np.asarray(q, dtype=float)
    e = np.exp(q - q.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def fuse(q_quantum, q_classical, xi):
    if not 0.0 <= xi <= 1.0:
        raise ConfigError("xi", f"must lie in [0, 1], got {xi}")
    return xi * np.asarray(q_quantum) + (1.0 - xi) * np.asarray(q_classical)


def nll_loss(batch_probs, labels):
    """Mean of ``-log p[true class]``, with probabilities floored at 1e-12."""
    probs = np.atleast_2d(np.asarray(batch_probs, dtype=float))
    labels = np.atleast_1d(np.asarray(labels))
    if probs.shape[0] == 0:
        raise ValidationError("empty batch")
    if labels.shape != (probs.shape[0],):
        raise ShapeError(f"{probs.shape[0]} probability rows but labels of shape {labels.shape}")
    p_true = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.maximum(p_true, PROB_FLOOR))))


@dataclass
class HybridModel:
    """Spiking feature path plus classical head, circuit head, and the fusion weight.

    ``hidden`` is None when the classical head is a single linear map from the
    pooled rates to the class logits.
    """

    hidden: LinearLayer | None
    output: LinearLayer
    circuit: qsim.CircuitSpec
    thetas: np.ndarray
    readout: LinearLayer
    xi: float
    lif: LIFParams = field(default_factory=LIFParams)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if not 0.0 <= self.xi <= 1.0:
            raise ConfigError("xi", f"must lie in [0, 1], got {self.xi}")
        if self.hidden is not None and self.hidden.d_out != self.output.d_in:
            raise ShapeError("hidden layer output does not match output layer input")
        if self.readout.d_in != self.circuit.n_qubits:
            raise ShapeError("readout layer must take one input per qubit")
        if self.output.d_out != self.readout.d_out:
            raise ShapeError("both heads must emit the same number of classes")
        if np.shape(self.thetas) != (self.circuit.n_params,):
            raise ShapeError(f"thetas must have shape ({self.circuit.n_params},)")

    @classmethod
    def create(cls, n_inputs=784, hidden=100, n_qubits=5, xi=0.8, seed=0,
               lif=None, encoder=None, shared_omega=False, ring=False, n_classes=N_CLASSES):
        """Glorot-initialized weights, zero biases, circuit angles uniform in [0, 2pi)."""
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1417]))
        circuit = qsim.default_circuit(n_qubits, shared_omega=shared_omega, ring=ring)
        if hidden:
            hidden_layer = LinearLayer.glorot(n_inputs, hidden, rng)
            output = LinearLayer.glorot(hidden, n_classes, rng)
        else:
            hidden_layer = None
            output = LinearLayer.glorot(n_inputs, n_classes, rng)
        thetas = rng.uniform(0.0, 2 * np.pi, size=circuit.n_params)
        readout = LinearLayer.glorot(n_qubits, n_classes, rng)
        return cls(hidden_layer, output, circuit, thetas, readout, xi,
                   lif=lif or LIFParams(), encoder=encoder or EncoderConfig(seed=seed))

    # -- parameter access -------------------------------------------------

    def params(self):
        """Trainable arrays by name (references, not copies)."""
        p = {}
        if self.hidden is not None:
            p["hidden.w"], p["hidden.b"] = self.hidden.w, self.hidden.b
        p["output.w"], p["output.b"] = self.output.w, self.output.b
        p["thetas"] = self.thetas
        p["readout.w"], p["readout.b"] = self.readout.w, self.readout.b
        return p

    def set_params(self, params):
        if self.hidden is not None:
            self.hidden.w, self.hidden.b = params["hidden.w"], params["hidden.b"]
        self.output.w, self.output.b = params["output.w"], params["output.b"]
        self.thetas = params["thetas"]
        self.readout.w, self.readout.b = params["readout.w"], params["readout.b"]

    # -- per-head outputs -------------------------------------------------

    def classical_logits(self, rates):
        x = rates
        if self.hidden is not None:
            x = relu(linear_forward(self.hidden, x))
        return linear_forward(self.output, x)

    def quantum_logits(self, angles):
        return linear_forward(self.readout, qsim.run_circuit(self.circuit, angles, self.thetas))

    def features(self, pixels, indices, epoch=0, stream=0):
        """Pooled LIF rates and reduced circuit angles for a batch of images."""
        pixels = np.asarray(pixels, dtype=float)
        rates = spike_rates(pixels, self.encoder, self.lif, indices, epoch, stream)
        angles = reduce_to_angles(pixels, self.circuit.n_data_slots)
        return rates, angles


@dataclass
class ForwardCache:
    rates: np.ndarray
    angles: np.ndarray
    hidden_pre: np.ndarray | None
    hidden_act: np.ndarray | None
    z: np.ndarray
    probs_classical: np.ndarray
    probs_quantum: np.ndarray
    probs: np.ndarray


def forward(model, rates, angles):
    """Fused class probabilities for a batch of precomputed features."""
    rates = np.asarray(rates, dtype=float)
    hidden_pre = hidden_act = None
    x = rates
    if model.hidden is not None:
        hidden_pre = linear_forward(model.hidden, rates)
        hidden_act = x = relu(hidden_pre)
    q_c = softmax(linear_forward(model.output, x))
    z = qsim.run_circuit(model.circuit, angles, model.thetas)
    q_q = softmax(linear_forward(model.readout, z))
    probs = fuse(q_q, q_c, model.xi)
    return probs, ForwardCache(rates, np.asarray(angles, dtype=float), hidden_pre,
                               hidden_act, z, q_c, q_q, probs)


def _softmax_backward(probs, grad_probs):
    return probs * (grad_probs - np.sum(grad_probs * probs, axis=-1, keepdims=True))


def backward(model, cache, labels):
    """Exact gradients of the mean fused NLL with respect to every trainable array.

    Returns ``(grads, dz)`` where ``grads`` is keyed like ``model.params()`` and
    ``dz`` is the loss gradient with respect to each sample's ``<Z>`` vector.
    """
    if cache is None or cache.probs is None or cache.z is None:
        raise RuntimeError("forward cache is incomplete; run forward() first")
    labels = np.asarray(labels)
    n = len(labels)
    rows = np.arange(n)
    p_true = cache.probs[rows, labels]
    g_fused = np.zeros_like(cache.probs)
    # The floor in nll_loss is flat below 1e-12, so the gradient vanishes there.
    g_fused[rows, labels] = np.where(p_true > PROB_FLOOR, -1.0 / (n * np.maximum(p_true, PROB_FLOOR)), 0.0)

    grads = {}
    g_c = _softmax_backward(cache.probs_classical, (1.0 - model.xi) * g_fused)
    x = cache.hidden_act if model.hidden is not None else cache.rates
    grads["output.w"] = g_c.T @ x
    grads["output.b"] = g_c.sum(axis=0)
    if model.hidden is not None:
        g_h = (g_c @ model.output.w) * (cache.hidden_pre > 0)
        grads["hidden.w"] = g_h.T @ cache.rates
        grads["hidden.b"] = g_h.sum(axis=0)

    g_q = _softmax_backward(cache.probs_quantum, model.xi * g_fused)
    grads["readout.w"] = g_q.T @ cache.z
    grads["readout.b"] = g_q.sum(axis=0)
    dz = g_q @ model.readout.w
    grads["thetas"] = qsim.param_shift_grad(model.circuit, cache.angles, model.thetas, dz)
    return grads, dz
