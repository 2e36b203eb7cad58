# coding: utf-8
# # Training the fused model
#
# Both heads produce a softmax over the ten digits and the outputs are mixed
#     Q = xi * Q_quantum + (1 - xi) * Q_classical
# before the log loss. This script trains the default xi = 0.8 model on the
# 2000/1000 subset of the bundled digits and writes the usual artifacts.
# Expect about 15 seconds per 10-epoch run on one core.

import sys
from pathlib import Path

import numpy as np

from qsfusion import report
from qsfusion.data import load_split, subset
from qsfusion.train import TrainConfig, build_model, evaluate, train

DATA = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
OUT = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "training"
OUT.mkdir(parents=True, exist_ok=True)

cfg = TrainConfig(seed=0)
train_set = subset(load_split(DATA, "train"), cfg.train_k, cfg.seed)
test_set = subset(load_split(DATA, "test"), cfg.test_k, cfg.seed)

# %%

model = build_model(cfg)
record = train(model, train_set, cfg, test_set)
for m in record.epochs:
    print(f"epoch {m.epoch:2d}  train {m.train_acc:.3f} / {m.train_loss:.3f}   "
          f"test {m.test_acc:.3f} / {m.test_loss:.3f}")

report.write_epochs_csv(record, OUT / "epochs.csv")
report.write_svg(report.curves_chart(record), OUT / "curves.svg")

# %%
# How much does each head contribute? Evaluate the trained weights with the
# mixing coefficient pinned to either end.

for xi in (0.0, 0.8, 1.0):
    model.xi = xi
    acc, _, loss = evaluate(model, test_set)
    print(f"xi={xi:.1f}: test accuracy {acc:.3f}, loss {loss:.3f}")
model.xi = cfg.xi

# %%
# The quantum head alone stays near chance. Its readouts are small: H puts
# every wire on the Bloch equator and the CNOT chain turns the remaining
# signal into parities. At xi = 0.8 the classical head still decides most
# predictions, and its 0.2 share is what carries the accuracy.

_, cm, _ = evaluate(model, test_set)
report.write_confusion_csv(cm, OUT / "confusion.csv")
print("per-class recall:", np.round(np.diag(cm) / cm.sum(axis=1), 2))
print("artifacts in", OUT)
