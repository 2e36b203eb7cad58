# coding: utf-8
# # Poisson spikes into leaky integrate-and-fire neurons
#
# The classical head sees each image as T steps of Bernoulli spikes, one
# input neuron per pixel, pushed through a layer of LIF neurons and averaged
# over time.

from pathlib import Path

import numpy as np

from qsfusion.data import load_split
from qsfusion.snn import EncoderConfig, LIFParams, encode_batch, lif_run, spike_rates, temporal_avg_pool

DATA = Path(__file__).resolve().parents[1] / "data" / "mnist5k"

# %%
# A single neuron under constant drive. With tau_m = 2 and dt = 1 each Euler
# step closes half the gap to r_m * I; hard reset sends it back to rest.

p = LIFParams()
for current in (0.5, 0.7, 1.0, 2.0):
    out, v = lif_run(np.ones((20, 1), np.uint8), np.array([[current]]), p, return_potential=True)
    print(f"I={current:.1f}  spikes={int(out.sum()):2d}  v[:6]={np.round(v[:6, 0], 3)}")

# %%
# The default r_m = 1.5 is what lets a saturated pixel fire within T = 20:
# the steady state 1.5 sits above threshold 1.0. With r_m = 1 it never would.

print("r_m=1.0:", int(lif_run(np.ones((20, 1), np.uint8), p=LIFParams(r_m=1.0)).sum()), "spikes")
print("r_m=1.5:", int(lif_run(np.ones((20, 1), np.uint8), p=p).sum()), "spikes")

# %%
# Real digits. Spike trains are keyed by (seed, stream, epoch, sample index),
# so re-encoding one sample alone gives the same train as inside a batch.

digits = load_split(DATA, "test")
cfg = EncoderConfig(T=20, seed=0)
batch = encode_batch(digits.images[:4], cfg, indices=[0, 1, 2, 3])
alone = encode_batch(digits.images[2:3], cfg, indices=[2])
print("batch shape (T, B, d):", batch.shape, " same train alone:", np.array_equal(batch[:, 2], alone[:, 0]))

# %%
# Pooled rates are the classical head's input. Dark pixels stay silent,
# bright strokes fire a few times in twenty steps.

rates = spike_rates(digits.images[:1], cfg, p, indices=[0])
print("label", digits.labels[0])
for row in rates.reshape(28, 28)[4:24:2]:
    print("".join(" .:*#"[min(int(r * 10), 4)] for r in row))

# %%
# Averaging the raw input spikes instead recovers the pixel intensities.

print("input-rate vs pixel, max gap:",
      np.abs(temporal_avg_pool(encode_batch(digits.images[:1], EncoderConfig(T=2000), [0]))[0]
             - digits.images[0]).max())
