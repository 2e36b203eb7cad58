"""SGD training, evaluation and the xi / qubit / noise sweep harnesses.

Randomness is keyed, never sequential: spike trains come from
``(seed, stream, epoch, sample index)``, minibatch order from
``(seed, epoch)``. A run is bit-reproducible from its config alone.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, NoiseSpec, add_noise, reduce_to_angles
from .errors import ConfigError, ShapeError, ValidationError
from .fusion import N_CLASSES, HybridModel, LinearLayer, backward, forward, nll_loss
from .qsim import default_circuit
from .snn import EncoderConfig, LIFParams, spike_rates

log = logging.getLogger(__name__)

TRAIN_STREAM = 1
EVAL_STREAM = 2
_SHUFFLE_TAG = 0x5EED
_CHUNK = 1000


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.0
    xi: float = 0.8
    n_qubits: int = 5
    hidden: int = 100
    T: int = 20
    seed: int = 0
    train_k: int = 2000
    test_k: int = 1000
    r_max: float = 1.0
    shared_omega: bool = False
    ring: bool = False
    resample_spikes: bool = True

    def __post_init__(self):
        checks = [
            ("epochs", self.epochs >= 1, "must be >= 1"),
            ("batch_size", self.batch_size >= 1, "must be >= 1"),
            ("lr", self.lr > 0, "must be > 0"),
            ("momentum", 0 <= self.momentum < 1, "must be in [0, 1)"),
            ("xi", 0 <= self.xi <= 1, "must be in [0, 1]"),
            ("n_qubits", 1 <= self.n_qubits <= 24, "must be in [1, 24]"),
            ("hidden", self.hidden >= 0, "must be >= 0"),
            ("T", 1 <= self.T <= 10000, "must be in [1, 10000]"),
            ("train_k", self.train_k >= 1, "must be >= 1"),
            ("test_k", self.test_k >= 1, "must be >= 1"),
            ("r_max", 0 < self.r_max <= 1, "must be in (0, 1]"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(name, f"{msg}, got {getattr(self, name)!r}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


def build_model(cfg, n_inputs=784, lif=None):
    return HybridModel.create(
        n_inputs=n_inputs, hidden=cfg.hidden, n_qubits=cfg.n_qubits, xi=cfg.xi, seed=cfg.seed,
        lif=lif, encoder=EncoderConfig(T=cfg.T, r_max=cfg.r_max, seed=cfg.seed),
        shared_omega=cfg.shared_omega, ring=cfg.ring,
    )


@dataclass
class EpochMetrics:
    epoch: int
    train_acc: float
    train_loss: float
    test_acc: float | None = None
    test_loss: float | None = None


@dataclass
class RunRecord:
    config: dict
    epochs: list = field(default_factory=list)
    confusion: np.ndarray | None = None
    wall_time: float = 0.0
    model: HybridModel | None = field(default=None, repr=False, compare=False)

    @property
    def final(self):
        return self.epochs[-1]


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def sgd_step(params, grads, lr, momentum=0.0, velocity=None):
    """``v <- momentum * v + g``; ``p <- p - lr * v``. Returns new dicts."""
    if velocity is None:
        velocity = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
    new_params, new_velocity = {}, {}
    for name, p in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(p) or np.shape(velocity[name]) != np.shape(p):
            raise ShapeError(f"{name}: parameter {np.shape(p)}, gradient {np.shape(g)}, "
                             f"velocity {np.shape(velocity[name])}")
        v = momentum * velocity[name] + g
        new_velocity[name] = v
        new_params[name] = p - lr * v
    return new_params, new_velocity


# ---------------------------------------------------------------------------
# Forward passes over whole datasets
# ---------------------------------------------------------------------------

def dataset_rates(model, images, epoch=0, stream=EVAL_STREAM):
    """Pooled LIF rates for every image, computed in chunks to bound memory."""
    n = len(images)
    out = np.empty((n, images.shape[1]))
    for start in range(0, n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, n))
        out[idx] = spike_rates(np.asarray(images[idx], dtype=float), model.encoder, model.lif,
                               idx, epoch, stream)
    return out


def predict(model, dataset):
    """Forward cache over ``dataset`` with evaluation spike streams."""
    rates = dataset_rates(model, dataset.images)
    angles = reduce_to_angles(dataset.images, model.circuit.n_data_slots)
    _, cache = forward(model, rates, angles)
    return cache


def confusion_matrix(labels, predictions, n_classes=N_CLASSES):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels), np.asarray(predictions)), 1)
    return cm


def evaluate(model, test_set):
    """Accuracy, confusion matrix (rows true, columns predicted) and mean NLL.

    The prediction is the argmax of the fused distribution; ties go to the
    lowest class index.
    """
    if len(test_set) == 0:
        raise ValidationError("cannot evaluate on an empty set")
    cache = predict(model, test_set)
    pred = np.argmax(cache.probs, axis=1)
    cm = confusion_matrix(test_set.labels, pred, cache.probs.shape[1])
    return np.trace(cm) / cm.sum(), cm, nll_loss(cache.probs, test_set.labels)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train(model, train_set, cfg, test_set=None):
    """Train ``model`` in place with minibatch SGD and return the run's record."""
    if len(train_set) == 0:
        raise ValidationError("training set is empty")
    t0 = time.perf_counter()
    record = RunRecord(config=cfg.to_dict(), model=model)
    images, labels = train_set.images, train_set.labels
    n = len(labels)
    angles = reduce_to_angles(images, model.circuit.n_data_slots)
    velocity = None
    rates = None

    for epoch in range(cfg.epochs):
        if rates is None or cfg.resample_spikes:
            rates = dataset_rates(model, images, epoch if cfg.resample_spikes else 0, TRAIN_STREAM)
        order = np.random.default_rng(np.random.SeedSequence([cfg.seed, _SHUFFLE_TAG, epoch])).permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs, cache = forward(model, rates[idx], angles[idx])
            loss = nll_loss(probs, labels[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"loss became {loss} at epoch {epoch}, batch {start // cfg.batch_size}; "
                    f"lr={cfg.lr} is probably too high"
                )
            grads, _ = backward(model, cache, labels[idx])
            params, velocity = sgd_step(model.params(), grads, cfg.lr, cfg.momentum, velocity)
            model.set_params(params)
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(probs, axis=1) == labels[idx]))

        metrics = EpochMetrics(epoch + 1, correct / n, loss_sum / n)
        if test_set is not None:
            acc, cm, test_loss = evaluate(model, test_set)
            metrics.test_acc, metrics.test_loss = float(acc), test_loss
            record.confusion = cm
        record.epochs.append(metrics)
        log.info("epoch %d: train acc %.4f loss %.4f, test acc %s", metrics.epoch,
                 metrics.train_acc, metrics.train_loss, metrics.test_acc)

    record.wall_time = time.perf_counter() - t0
    return record


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _seeds(cfg, n_seeds):
    return [cfg.seed + s for s in range(n_seeds)]


def sweep_xi(cfg, xi_values, train_set, test_set, n_seeds=1):
    """One trained model per (xi, seed). Rows for xi = 0 and 1 are the single-head baselines."""
    if not xi_values:
        raise ValidationError("xi sweep needs at least one value")
    records = []
    for xi in xi_values:
        for seed in _seeds(cfg, n_seeds):
            run_cfg = cfg.replace(xi=float(xi), seed=seed)
            records.append(train(build_model(run_cfg), train_set, run_cfg, test_set))
    return records


def sweep_qubits(cfg, qubit_values, train_set, test_set, n_seeds=1):
    if not qubit_values:
        raise ValidationError("qubit sweep needs at least one value")
    records = []
    for n_qubits in qubit_values:
        for seed in _seeds(cfg, n_seeds):
            run_cfg = cfg.replace(n_qubits=int(n_qubits), seed=seed)
            records.append(train(build_model(run_cfg), train_set, run_cfg, test_set))
    return records


@dataclass(frozen=True)
class NoiseResult:
    kind: str
    level: float
    seed: int
    accuracy: float


def sweep_noise(model, test_set, kinds, levels, seeds=(0,)):
    """Accuracy of a trained model on noise-corrupted copies of ``test_set``.

    All levels for one (kind, seed) share a single noise realization scaled
    by the level, and every evaluation uses the same spike streams, so level
    0 reproduces the clean evaluation exactly.
    """
    if not kinds or not levels:
        raise ValidationError("noise sweep needs at least one kind and one level")
    results = []
    for kind in kinds:
        for seed in seeds:
            for level in levels:
                spec = NoiseSpec(kind, float(level), seed)
                noisy = test_set.with_images(add_noise(test_set.images, spec))
                acc, _, _ = evaluate(model, noisy)
                results.append(NoiseResult(kind, float(level), int(seed), float(acc)))
    return results


# ---------------------------------------------------------------------------
# Model persistence
# ---------------------------------------------------------------------------

def save_model(model, path):
    meta = {
        "xi": model.xi,
        "n_qubits": model.circuit.n_qubits,
        "shared_omega": model.circuit.n_params == model.circuit.n_qubits,
        "ring": any(getattr(layer, "ring", False) for layer in model.circuit.layers),
        "lif": dataclasses.asdict(model.lif),
        "encoder": dataclasses.asdict(model.encoder),
    }
    arrays = {k: np.asarray(v) for k, v in model.params().items()}
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_model(path):
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        arrays = {k: z[k] for k in z.files if k != "meta"}
    hidden = None
    if "hidden.w" in arrays:
        hidden = LinearLayer(arrays["hidden.w"], arrays["hidden.b"])
    circuit = default_circuit(meta["n_qubits"], shared_omega=meta["shared_omega"], ring=meta["ring"])
    return HybridModel(
        hidden, LinearLayer(arrays["output.w"], arrays["output.b"]), circuit, arrays["thetas"],
        LinearLayer(arrays["readout.w"], arrays["readout.b"]), meta["xi"],
        lif=LIFParams(**meta["lif"]), encoder=EncoderConfig(**meta["encoder"]),
    )
