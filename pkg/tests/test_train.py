import numpy as np
import pytest

from qsfusion.data import Dataset, load_split, reduce_to_angles, subset
from qsfusion.errors import ConfigError, ShapeError, ValidationError
from qsfusion.train import (
    EVAL_STREAM, TrainConfig, build_model, confusion_matrix, dataset_rates, evaluate, load_model,
    save_model, sgd_step, sweep_noise, sweep_qubits, sweep_xi, train,
)

TINY = TrainConfig(epochs=2, train_k=200, test_k=100, hidden=16, T=10, lr=0.5)


@pytest.fixture(scope="module")
def splits(mnist_dir):
    train_set = subset(load_split(mnist_dir, "train"), TINY.train_k, 0)
    test_set = subset(load_split(mnist_dir, "test"), TINY.test_k, 0)
    return train_set, test_set


@pytest.fixture(scope="module")
def trained(splits):
    model = build_model(TINY)
    record = train(model, splits[0], TINY, splits[1])
    return model, record


def params_equal(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


# -- optimizer ----------------------------------------------------------------------

def test_zero_gradient_is_no_op():
    p = {"w": np.array([1.0, -2.0])}
    new, _ = sgd_step(p, {"w": np.zeros(2)}, lr=0.3, momentum=0.9)
    np.testing.assert_array_equal(new["w"], p["w"])


def test_unit_step_subtracts_gradient():
    new, _ = sgd_step({"w": np.array([1.0, 2.0])}, {"w": np.array([0.5, -1.0])}, lr=1.0)
    np.testing.assert_array_equal(new["w"], [0.5, 3.0])


def test_zero_rate_is_bit_identical():
    rng = np.random.default_rng(0)
    p = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=3)}
    g = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=3)}
    v = None
    new = p
    for _ in range(5):
        new, v = sgd_step(new, g, lr=0.0, momentum=0.5, velocity=v)
    assert params_equal(new, p)


def test_two_momentum_steps():
    p0, g1, g2, lr, mu = 1.0, 0.4, -0.2, 0.1, 0.9
    # v1 = g1, p1 = p0 - lr g1; v2 = mu g1 + g2, p2 = p1 - lr (mu g1 + g2)
    expected = p0 - lr * g1 - lr * (mu * g1 + g2)
    p, v = sgd_step({"x": np.array(p0)}, {"x": np.array(g1)}, lr, mu)
    p, v = sgd_step(p, {"x": np.array(g2)}, lr, mu, v)
    assert p["x"] == pytest.approx(expected, abs=1e-15)
    assert v["x"] == pytest.approx(mu * g1 + g2, abs=1e-15)


def test_sgd_does_not_mutate_inputs():
    p = {"w": np.ones(3)}
    sgd_step(p, {"w": np.ones(3)}, lr=1.0)
    np.testing.assert_array_equal(p["w"], np.ones(3))


def test_sgd_shape_mismatch():
    with pytest.raises(ShapeError):
        sgd_step({"w": np.ones(3)}, {"w": np.ones(2)}, lr=0.1)


# -- config ------------------------------------------------------------------------------

@pytest.mark.parametrize("field, value", [
    ("lr", 0.0), ("xi", 1.5), ("xi", -0.1), ("epochs", 0), ("batch_size", 0),
    ("momentum", 1.0), ("n_qubits", 0), ("T", 0), ("r_max", 0.0),
])
def test_config_rejects(field, value):
    with pytest.raises(ConfigError) as err:
        TrainConfig(**{field: value})
    assert err.value.field == field


def test_config_defaults():
    cfg = TrainConfig()
    assert (cfg.xi, cfg.n_qubits, cfg.epochs, cfg.train_k, cfg.test_k) == (0.8, 5, 10, 2000, 1000)
    assert cfg.replace(xi=0.2).xi == 0.2 and cfg.xi == 0.8


# -- evaluation ----------------------------------------------------------------------

def test_confusion_counts():
    cm = confusion_matrix([0, 1, 1, 2], [0, 1, 2, 2], 3)
    np.testing.assert_array_equal(cm, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])


def test_perfect_predictions_are_diagonal():
    labels = np.arange(30) % 10
    cm = confusion_matrix(labels, labels)
    np.testing.assert_array_equal(cm, np.diag(np.full(10, 3)))
    assert np.trace(cm) / cm.sum() == 1.0


def test_uniform_output_breaks_ties_to_class_zero(splits):
    _, full = splits
    keep = np.concatenate([np.flatnonzero(full.labels == c)[:5] for c in range(10)])
    test_set = Dataset(full.images[keep], full.labels[keep], "test")
    model = build_model(TINY)
    for layer in (model.output, model.readout):
        layer.w[...] = 0
        layer.b[...] = 0
    acc, cm, loss = evaluate(model, test_set)
    assert np.all(cm[:, 1:] == 0)
    assert acc == pytest.approx(0.1)
    assert loss == pytest.approx(np.log(10))


def test_confusion_accounting(trained, splits):
    model, record = trained
    acc, cm, _ = evaluate(model, splits[1])
    assert cm.sum() == len(splits[1])
    np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(splits[1].labels, minlength=10))
    assert acc == np.trace(cm) / cm.sum()
    np.testing.assert_array_equal(record.confusion, cm)


def test_evaluate_empty(splits):
    empty = Dataset(splits[1].images[:0], splits[1].labels[:0], "test")
    with pytest.raises(ValidationError):
        evaluate(build_model(TINY), empty)


# -- training ------------------------------------------------------------------------------

def test_record_contents(trained):
    _, record = trained
    assert [m.epoch for m in record.epochs] == [1, 2]
    for m in record.epochs:
        assert 0 <= m.train_acc <= 1 and 0 <= m.test_acc <= 1
        assert m.train_loss >= 0 and m.test_loss >= 0
    assert record.config["seed"] == 0 and record.wall_time > 0
    assert record.final is record.epochs[-1]


def test_training_loss_falls(trained):
    _, record = trained
    assert record.epochs[1].train_loss < record.epochs[0].train_loss


def test_training_is_deterministic(splits, trained):
    model, record = trained
    again = build_model(TINY)
    record2 = train(again, splits[0], TINY, splits[1])
    assert record2.epochs == record.epochs
    np.testing.assert_array_equal(record2.confusion, record.confusion)
    assert params_equal(again.params(), model.params())


def test_seed_changes_run(splits, trained):
    cfg = TINY.replace(seed=1, epochs=1)
    record = train(build_model(cfg), splits[0], cfg)
    assert record.epochs[0] != trained[1].epochs[0]


def test_frozen_spikes_option(splits):
    cfg = TINY.replace(epochs=1, resample_spikes=False)
    a = train(build_model(cfg), splits[0], cfg)
    b = train(build_model(cfg), splits[0], cfg)
    assert a.epochs == b.epochs


def test_nan_loss_aborts(splits):
    cfg = TINY.replace(lr=1e308, epochs=1)
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError, match="lr"):
        train(build_model(cfg), splits[0], cfg)


def test_empty_training_set(splits):
    empty = Dataset(splits[0].images[:0], splits[0].labels[:0])
    with pytest.raises(ValidationError):
        train(build_model(TINY), empty, TINY)


@pytest.mark.parametrize("xi", [0.0, 1.0])
def test_single_head_predictions(splits, xi):
    cfg = TINY.replace(xi=xi, epochs=1)
    model = build_model(cfg)
    train(model, splits[0], cfg)
    images = splits[1].images
    rates = dataset_rates(model, images, stream=EVAL_STREAM)
    angles = reduce_to_angles(images, model.circuit.n_data_slots)
    solo = model.classical_logits(rates) if xi == 0 else model.quantum_logits(angles)
    _, cm, _ = evaluate(model, splits[1])
    expected = confusion_matrix(splits[1].labels, np.argmax(solo, axis=1))
    np.testing.assert_array_equal(cm, expected)


def test_xi_zero_leaves_quantum_weights(splits):
    cfg = TINY.replace(xi=0.0, epochs=1)
    model = build_model(cfg)
    before = {k: v.copy() for k, v in model.params().items()}
    train(model, splits[0], cfg)
    after = model.params()
    for name in ("thetas", "readout.w", "readout.b"):
        np.testing.assert_array_equal(after[name], before[name])
    assert not np.array_equal(after["output.w"], before["output.w"])


# -- sweeps ------------------------------------------------------------------------------

def test_xi_sweep_shape(splits):
    cfg = TINY.replace(epochs=1)
    values = [0, 0.2, 0.4, 0.6, 0.8, 1.0]
    records = sweep_xi(cfg, values, splits[0], splits[1])
    assert [r.config["xi"] for r in records] == values
    assert {r.config["seed"] for r in records} == {0}


def test_xi_sweep_repeats_seeds(splits):
    cfg = TINY.replace(epochs=1, seed=4)
    records = sweep_xi(cfg, [0.5], splits[0], splits[1], n_seeds=3)
    assert [r.config["seed"] for r in records] == [4, 5, 6]


def test_qubit_sweep(splits):
    cfg = TINY.replace(epochs=1)
    records = sweep_qubits(cfg, [5, 6, 7], splits[0], splits[1])
    assert [r.model.circuit.n_qubits for r in records] == [5, 6, 7]


def test_empty_sweeps(splits):
    with pytest.raises(ValidationError):
        sweep_xi(TINY, [], *splits)
    with pytest.raises(ValidationError):
        sweep_noise(build_model(TINY), splits[1], ["gaussian"], [])


def test_noise_sweep_rows(trained, splits):
    model, _ = trained
    rows = sweep_noise(model, splits[1], ["uniform", "gaussian"], [0, 0.1, 0.2, 0.4])
    assert len(rows) == 8
    assert [(r.kind, r.level) for r in rows[:4]] == [("uniform", lv) for lv in (0, 0.1, 0.2, 0.4)]


def test_noise_level_zero_matches_clean(trained, splits):
    model, record = trained
    rows = sweep_noise(model, splits[1], ["uniform", "gaussian"], [0.0], seeds=(0, 1))
    assert all(r.accuracy == record.final.test_acc for r in rows)


# -- persistence ----------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, trained, splits):
    model, _ = trained
    save_model(model, tmp_path / "m.npz")
    loaded = load_model(tmp_path / "m.npz")
    assert params_equal(loaded.params(), model.params())
    assert loaded.xi == model.xi and loaded.lif == model.lif and loaded.encoder == model.encoder
    a, cm_a, _ = evaluate(model, splits[1])
    b, cm_b, _ = evaluate(loaded, splits[1])
    assert a == b
    np.testing.assert_array_equal(cm_a, cm_b)


def test_save_load_variant_circuit(tmp_path):
    cfg = TINY.replace(shared_omega=True, ring=True, hidden=0, n_qubits=4)
    model = build_model(cfg)
    save_model(model, tmp_path / "m.npz")
    loaded = load_model(tmp_path / "m.npz")
    assert loaded.hidden is None
    assert loaded.circuit.ops == model.circuit.ops
