# coding: utf-8
# # Accuracy under input noise
#
# Train once, then evaluate on corrupted copies of the test set. Uniform
# noise draws from U(-NL, NL); Gaussian noise has standard deviation NL.
# Pixels are clipped back to [0, 1] either way.

import sys
from pathlib import Path

from qsfusion import report
from qsfusion.data import NoiseSpec, add_noise, load_split, subset
from qsfusion.train import TrainConfig, build_model, sweep_noise, train

DATA = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
OUT = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "noise"
OUT.mkdir(parents=True, exist_ok=True)
LEVELS = [0.0, 0.1, 0.2, 0.4]

cfg = TrainConfig(seed=0)
train_set = subset(load_split(DATA, "train"), cfg.train_k, cfg.seed)
test_set = subset(load_split(DATA, "test"), cfg.test_k, cfg.seed)

# %%
# What a noisy digit looks like at NL = 0.4.

noisy = add_noise(test_set.images[:1], NoiseSpec("gaussian", 0.4, 0))[0]
for row in noisy.reshape(28, 28)[4:24:2]:
    print("".join(" .:*#"[min(int(v * 5), 4)] for v in row))

# %%
# Compare the fused model with the two single-head settings.

series = {}
rows = []
for xi in (0.0, 0.8, 1.0):
    run_cfg = cfg.replace(xi=xi)
    model = build_model(run_cfg)
    train(model, train_set, run_cfg)
    results = sweep_noise(model, test_set, ["gaussian"], LEVELS)
    rows += results
    series[f"xi={xi}"] = (LEVELS, [r.accuracy for r in results])
    print(f"xi={xi}:", " ".join(f"{r.level:.1f}->{r.accuracy:.3f}" for r in results))

report.write_noise_csv(rows, OUT / "noise.csv")
report.write_svg([dict(series=series, title="Gaussian noise", xlabel="noise level",
                       ylabel="test accuracy", y_range=(0, 1))], OUT / "noise.svg")
print("artifacts in", OUT)
