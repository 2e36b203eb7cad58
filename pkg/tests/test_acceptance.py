"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N [PASS|FAIL]`` line (collected again in the
terminal summary) and then asserts. The learning criteria train 18 models on
the 2000/1000 desk-scale subset and take a few minutes on one core. Set
``MNIST_DIR`` to a directory with the full MNIST files to draw the subsets
from the complete dataset instead of the bundled 5000-digit fixture.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from qsfusion import report
from qsfusion.cli import main
from qsfusion.data import load_split, subset
from qsfusion.fusion import HybridModel, backward, forward, fuse, nll_loss, softmax
from qsfusion.qsim import (
    CircuitSpec, Gate, ParamRotation, StateVector, apply_gate, default_circuit, expval_z,
    frqi_encode, new_state, param_shift_grad, romega_matrix, run_circuit,
)
from qsfusion.snn import EncoderConfig, LIFParams, lif_run
from qsfusion.train import TrainConfig, build_model, evaluate, sweep_noise, train

import oracles
from test_qsim import oracle_ops, random_gate

pytestmark = pytest.mark.slow

XI_VALUES = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
SEEDS = [0, 1, 2]
NOISE_LEVELS = [0.0, 0.1, 0.2, 0.4]
DESK = TrainConfig()  # 2000/1000, xi 0.8, 5 qubits, hidden 100, T 20, 10 epochs


@pytest.fixture(scope="module")
def data_dir(mnist_dir):
    return Path(os.environ.get("MNIST_DIR") or mnist_dir)


@pytest.fixture(scope="module")
def desk_data(data_dir):
    train_set = subset(load_split(data_dir, "train"), DESK.train_k, 0)
    test_set = subset(load_split(data_dir, "test"), DESK.test_k, 0)
    return train_set, test_set


@pytest.fixture(scope="module")
def xi_sweep(desk_data):
    """Every (xi, seed) run on identical data; keyed by (xi, seed)."""
    train_set, test_set = desk_data
    runs = {}
    for xi in XI_VALUES:
        for seed in SEEDS:
            cfg = DESK.replace(xi=xi, seed=seed)
            runs[xi, seed] = train(build_model(cfg), train_set, cfg, test_set)
    return runs


# -- 1 ---------------------------------------------------------------------------------

def test_simulator_exactness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(50):
        n = 2 + i % 2
        state, ops = new_state(n), []
        for _ in range(int(rng.integers(5, 30))):
            gate = random_gate(rng, n)
            state = apply_gate(state, gate)
            ops += oracle_ops(gate)
        worst = max(worst, np.max(np.abs(state.amps - oracles.unitary_from_ops(ops, n)[:, 0])))

    state = new_state(3)
    drift = 0.0
    for _ in range(10**4):
        state = apply_gate(state, random_gate(rng, 3))
        drift = max(drift, abs(state.norm() - 1))
    elapsed = time.perf_counter() - t0

    ok = worst <= 1e-10 and drift <= 1e-10 and elapsed < 5
    verdict(1, "simulator exactness", ok,
            f"max amplitude error {worst:.1e}, norm drift {drift:.1e}, {elapsed:.2f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------------

def test_gradient_exactness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    shift_err = 0.0
    for i in range(50):
        n = 2 + i % 3
        spec = default_circuit(n, shared_omega=bool(i % 5 == 0), ring=bool(i % 2))
        if i % 4 == 0:
            extra = ParamRotation("RY", tuple(spec.n_params + q for q in range(n)))
            spec = CircuitSpec(n, spec.layers + (extra,), n, spec.n_params + n)
        data = rng.uniform(0, np.pi / 2, n)
        thetas = rng.uniform(-np.pi, np.pi, spec.n_params)
        up = rng.normal(size=n)
        numeric = oracles.central_diff(lambda th: float(up @ run_circuit(spec, data, th)), thetas, 1e-5)
        shift_err = max(shift_err, np.max(np.abs(param_shift_grad(spec, data, thetas, up) - numeric)))

    pipe_err = 0.0
    for seed in range(20):
        model = HybridModel.create(n_inputs=16, hidden=8, n_qubits=3, xi=float(rng.uniform()),
                                   seed=seed, encoder=EncoderConfig(T=10, seed=seed))
        pixels = rng.uniform(0, 1, (4, 16))
        labels = rng.integers(0, 10, 4)
        rates, angles = model.features(pixels, np.arange(4))  # frozen spike trains
        grads, _ = backward(model, forward(model, rates, angles)[1], labels)
        params = model.params()
        for name in ("hidden.w", "hidden.b", "output.w", "output.b"):
            base = params[name].copy()

            def loss(flat):
                params[name][...] = flat.reshape(base.shape)
                return nll_loss(forward(model, rates, angles)[0], labels)

            numeric = oracles.central_diff(loss, base.ravel(), 1e-6).reshape(base.shape)
            params[name][...] = base
            scale = max(np.max(np.abs(numeric)), 1e-12)
            pipe_err = max(pipe_err, np.max(np.abs(grads[name] - numeric)) / scale)
    elapsed = time.perf_counter() - t0

    ok = shift_err <= 1e-6 and pipe_err <= 1e-5 and elapsed < 30
    verdict(2, "gradient exactness", ok,
            f"parameter-shift error {shift_err:.1e}, pipeline relative error {pipe_err:.1e}, {elapsed:.1f}s")
    assert ok


# -- 3 ---------------------------------------------------------------------------------

def test_formula_fidelity(verdict):
    rng = np.random.default_rng(5)
    checks = {}

    checks["FRQI norm"] = all(
        abs(frqi_encode(rng.uniform(0, 1, side * side)).norm() - 1) <= 1e-12
        for side in (2, 4) for _ in range(20))

    checks["rotation product"] = all(
        np.max(np.abs(romega_matrix(a, b, c) - oracles.rz(c) @ oracles.rx(b) @ oracles.rz(a))) <= 1e-12
        for a, b, c in rng.uniform(-2 * np.pi, 2 * np.pi, (100, 3)))

    checks["Z expectation (1, 2)"] = abs(expval_z(StateVector(1, [1, 2]), 0) + 0.6) <= 1e-15

    xs = rng.normal(0, 20, (100, 10))
    cs = rng.normal(0, 50, 100)
    checks["softmax shift"] = all(np.max(np.abs(softmax(x + c) - softmax(x))) <= 1e-12 for x, c in zip(xs, cs))

    convex, degenerate = True, True
    for _ in range(100):
        q, c = softmax(rng.normal(size=10)), softmax(rng.normal(size=10))
        h = fuse(q, c, float(rng.uniform()))
        convex &= bool(np.all((h >= 0) & (h <= 1)) and abs(h.sum() - 1) < 1e-12)
        degenerate &= bool(np.array_equal(fuse(q, c, 0.0), c) and np.array_equal(fuse(q, c, 1.0), q))
    checks["fusion convexity"] = convex
    checks["fusion degeneracy"] = degenerate

    checks["zero loss at certainty"] = nll_loss(np.eye(10), np.arange(10)) == 0.0

    failed = [k for k, v in checks.items() if not v]
    verdict(3, "formula fidelity", not failed,
            f"{len(checks) - len(failed)}/{len(checks)} identities hold" + (f"; failed {failed}" if failed else ""))
    assert not failed


# -- 4 ---------------------------------------------------------------------------------

def test_lif_physics(verdict):
    p = LIFParams(tau_m=2.0, dt=1.0, r_m=1.5)
    h = p.dt / p.tau_m

    sub_ok, worst_margin = True, np.inf
    for amp in (0.3, 0.6, 0.95):
        _, v = lif_run(np.ones((40, 1), np.uint8), np.array([[amp / p.r_m]]), p, return_potential=True)
        t = np.arange(1, 41) * p.dt
        err = np.max(np.abs(v[:, 0] - amp * (1 - np.exp(-t / p.tau_m))))
        bound = amp * (h**2 / 2) / (1 - np.exp(-h))
        sub_ok &= err <= bound
        worst_margin = min(worst_margin, bound - err)

    isi_ok, worst_gap = True, 0.0
    for amp in (1.25, 1.5, 2.0, 3.0, 5.0):
        out = lif_run(np.ones((60, 1), np.uint8), np.array([[amp / p.r_m]]), p)
        times = (np.flatnonzero(out[:, 0]) + 1) * p.dt
        isi = np.diff(np.concatenate([[0.0], times]))
        fine_dt, v, t = p.dt / 10, 0.0, 0.0
        while v < p.v_th:
            v += fine_dt / p.tau_m * (-v + amp)
            t += fine_dt
        gap = np.max(np.abs(isi - t))
        worst_gap = max(worst_gap, gap)
        isi_ok &= gap <= p.dt

    ok = bool(sub_ok and isi_ok)
    verdict(4, "LIF physics", ok,
            f"subthreshold within Euler bound (min slack {worst_margin:.3f}), "
            f"worst ISI gap {worst_gap:.2f} steps")
    assert ok


# -- 5 ---------------------------------------------------------------------------------

def test_desk_scale_learning(xi_sweep, verdict):
    record = xi_sweep[0.8, 0]
    acc = record.final.test_acc
    ok = acc >= 0.80 and record.wall_time <= 600
    verdict(5, "desk-scale learning", ok,
            f"seed 0, xi 0.8: test accuracy {acc:.3f} after 10 epochs in {record.wall_time:.0f}s")
    assert ok


# -- 6 ---------------------------------------------------------------------------------

def test_xi_sweep_shape(xi_sweep, tmp_path, verdict):
    records = [xi_sweep[xi, s] for xi in XI_VALUES for s in SEEDS]
    report.write_sweep_csv(records, tmp_path / "sweep_xi.csv")
    rows = (tmp_path / "sweep_xi.csv").read_text().splitlines()
    shape_ok = rows[0] == ",".join(report.SWEEP_HEADER) and len(rows) == 1 + len(records)

    mean = {xi: float(np.mean([xi_sweep[xi, s].final.test_acc for s in SEEDS])) for xi in XI_VALUES}
    best_xi = max((xi for xi in XI_VALUES if 0 < xi < 1), key=mean.get)
    ok = shape_ok and mean[best_xi] >= mean[0.0] - 0.01 and mean[best_xi] >= mean[1.0] - 0.01
    table = ", ".join(f"{xi:.1f}:{m:.3f}" for xi, m in mean.items())
    verdict(6, "xi-sweep shape", ok, f"best interior xi {best_xi:.1f}; mean test accuracy {table}")
    assert ok


# -- 7 ---------------------------------------------------------------------------------

def test_noise_robustness(xi_sweep, desk_data, tmp_path, verdict):
    _, test_set = desk_data
    results = []
    clean_ok = True
    for seed in SEEDS:
        record = xi_sweep[0.8, seed]
        rows = sweep_noise(record.model, test_set, ["uniform", "gaussian"], NOISE_LEVELS, seeds=[seed])
        clean_ok &= all(r.accuracy == record.final.test_acc for r in rows if r.level == 0)
        results += rows
    report.write_noise_csv(results, tmp_path / "sweep_noise.csv")
    n_rows = len((tmp_path / "sweep_noise.csv").read_text().splitlines()) - 1

    trend_ok, summary = True, []
    for kind in ("uniform", "gaussian"):
        means = [np.mean([r.accuracy for r in results if r.kind == kind and r.level == lv])
                 for lv in NOISE_LEVELS]
        trend_ok &= all(b <= a + 0.02 for a, b in zip(means, means[1:]))
        summary.append(f"{kind} " + "/".join(f"{m:.3f}" for m in means))

    ok = bool(clean_ok and trend_ok and n_rows == 2 * len(NOISE_LEVELS) * len(SEEDS))
    verdict(7, "noise robustness", ok,
            f"level 0 bit-identical: {clean_ok}; means over levels {NOISE_LEVELS}: {'; '.join(summary)}")
    assert ok


# -- 8 ---------------------------------------------------------------------------------

def test_cli_determinism(data_dir, tmp_path, verdict):
    small = ["--data-dir", str(data_dir), "--seed", "5", "--train-k", "300", "--test-k", "200",
             "--epochs", "2", "--lr", "0.2"]
    commands = [
        ["train"],
        ["sweep-xi", "--values", "0,0.5,1", "--epochs", "1"],
        ["sweep-qubits", "--values", "5,6", "--epochs", "1"],
        ["sweep-noise", "--values", "0,0.2", "--epochs", "1"],
    ]
    mismatched, checked = [], 0
    for cmd in commands:
        outputs = []
        for rep in ("a", "b"):
            out = tmp_path / rep / cmd[0]
            assert main(cmd + small + ["--out", str(out)]) == 0
            (run_dir,) = out.iterdir()
            outputs.append({p.name: p.read_bytes() for p in sorted(run_dir.glob("*.csv"))})
        if outputs[0] != outputs[1] or not outputs[0]:
            mismatched.append(cmd[0])
        checked += len(outputs[0])

    model = next((tmp_path / "a" / "train").glob("*/model.npz"))
    evals = []
    for rep in ("a", "b"):
        out = tmp_path / rep / "eval"
        assert main(["eval", "--model", str(model), "--noise", "uniform", "--noise-level", "0.1",
                     "--out", str(out)] + small) == 0
        evals.append(next(out.glob("*/confusion.csv")).read_bytes())
    if evals[0] != evals[1]:
        mismatched.append("eval")
    checked += 1

    ok = not mismatched
    verdict(8, "determinism", ok, f"{checked} CSV artifacts from 5 commands byte-identical across reruns"
            if ok else f"differences in {mismatched}")
    assert ok
