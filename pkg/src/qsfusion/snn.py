"""Poisson rate coding, discrete-time LIF dynamics and temporal average pooling.

Spike trains are ``uint8`` arrays with time on axis 0: ``(T, d)`` for one
sample or ``(T, B, d)`` for a batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError


@dataclass(frozen=True)
class EncoderConfig:
    T: int = 20
    r_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.T <= 10000:
            raise ConfigError("T", f"must be in [1, 10000], got {self.T}")
        if not 0 < self.r_max <= 1:
            raise ConfigError("r_max", f"must be in (0, 1], got {self.r_max}")


@dataclass(frozen=True)
class LIFParams:
    """Membrane constants, with time measured in integration steps.

    ``r_m`` defaults to 1.5 so that a neuron driven by a spike on every step
    crosses threshold on its second step. ``reset`` is ``"hard"`` (back to
    ``v_rest``) or ``"soft"`` (subtract the threshold gap). ``synapse`` is
    ``"rect"`` (a spike is current for its own step only) or ``"exp"``
    (current decays with ``tau_syn``).
    """

    tau_m: float = 2.0
    v_rest: float = 0.0
    v_th: float = 1.0
    r_m: float = 1.5
    dt: float = 1.0
    reset: str = "hard"
    synapse: str = "rect"
    tau_syn: float = 5.0

    def __post_init__(self):
        if not self.tau_m > 0:
            raise ConfigError("tau_m", f"must be positive, got {self.tau_m}")
        if not self.dt > 0:
            raise ConfigError("dt", f"must be positive, got {self.dt}")
        if not self.v_th > self.v_rest:
            raise ConfigError("v_th", f"must exceed v_rest={self.v_rest}, got {self.v_th}")
        if self.reset not in ("hard", "soft"):
            raise ConfigError("reset", f"must be 'hard' or 'soft', got {self.reset!r}")
        if self.synapse not in ("rect", "exp"):
            raise ConfigError("synapse", f"must be 'rect' or 'exp', got {self.synapse!r}")
        if self.synapse == "exp" and not self.tau_syn > 0:
            raise ConfigError("tau_syn", f"must be positive, got {self.tau_syn}")


def _check_pixels(pixels):
    pixels = np.asarray(pixels, dtype=float)
    if not np.all((pixels >= 0) & (pixels <= 1)):
        raise ValidationError("pixel intensities must lie in [0, 1]")
    return pixels


def poisson_encode(pixels, cfg, rng):
    """Bernoulli spike train: neuron ``i`` fires on each step with probability
    ``pixels[i] * cfg.r_max``, independently across steps and neurons."""
    pixels = _check_pixels(pixels)
    draws = rng.random((cfg.T,) + pixels.shape)
    return (draws < pixels * cfg.r_max).astype(np.uint8)


def sample_rng(seed, *stream):
    """Generator for one independent sub-stream, e.g. ``(seed, epoch, index)``.

    The stream depends only on the key, never on how many other streams
    were drawn before it, so batch composition and thread count do not
    change the spikes a sample receives.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def encode_batch(pixels, cfg, indices, epoch=0, stream=0):
    """Encode a batch with one derived generator per sample.

    ``indices`` are dataset positions; sample ``b`` uses the generator keyed
    by ``(cfg.seed, stream, epoch, indices[b])``. Returns ``(T, B, d)``.
    """
    pixels = _check_pixels(pixels)
    out = np.empty((cfg.T,) + pixels.shape, dtype=np.uint8)
    for b, idx in enumerate(indices):
        rng = sample_rng(cfg.seed, stream, epoch, idx)
        out[:, b] = poisson_encode(pixels[b], cfg, rng)
    return out


def lif_run(spikes, weights=None, p=LIFParams(), return_potential=False):
    """Integrate a spike train through a layer of LIF neurons.

    Per step the input current is ``I = weights @ s_t`` (identity coupling when
    ``weights`` is None), the membrane takes one forward-Euler step of
    ``tau_m dv/dt = -(v - v_rest) + r_m I`` and neurons with ``v >= v_th`` spike
    and reset. Works on ``(T, d)`` or ``(T, B, d)`` trains.

    With ``return_potential`` the membrane trace (after reset) is returned as
    a second array of the output's shape.
    """
    spikes = np.asarray(spikes)
    if spikes.ndim < 2:
        raise ShapeError(f"spike train needs a time axis and a neuron axis, got shape {spikes.shape}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2 or weights.shape[1] != spikes.shape[-1]:
            raise ShapeError(f"weights of shape {weights.shape} do not match {spikes.shape[-1]} inputs")
        d_out = weights.shape[0]
    else:
        d_out = spikes.shape[-1]

    out_shape = spikes.shape[:-1] + (d_out,)
    out = np.zeros(out_shape, dtype=np.uint8)
    trace = np.empty(out_shape) if return_potential else None
    v = np.full(out_shape[1:], p.v_rest, dtype=float)
    current = np.zeros(out_shape[1:])
    leak = p.dt / p.tau_m
    syn_decay = np.exp(-p.dt / p.tau_syn) if p.synapse == "exp" else 0.0

    for t in range(spikes.shape[0]):
        drive = spikes[t].astype(float)
        if weights is not None:
            drive = drive @ weights.T
        current = syn_decay * current + drive
        v = v + leak * (-(v - p.v_rest) + p.r_m * current)
        fired = v >= p.v_th
        out[t] = fired
        if p.reset == "hard":
            v = np.where(fired, p.v_rest, v)
        else:
            v = np.where(fired, v - (p.v_th - p.v_rest), v)
        if trace is not None:
            trace[t] = v
    return (out, trace) if return_potential else out


def temporal_avg_pool(spikes):
    """Firing rate per neuron: mean over the time axis."""
    spikes = np.asarray(spikes)
    if spikes.ndim < 1 or spikes.shape[0] == 0:
        raise ValidationError("cannot pool an empty spike train")
    return spikes.mean(axis=0)


def spike_rates(pixels, cfg, lif, indices, epoch=0, stream=0):
    """Poisson encode, run identity-coupled LIF, pool. ``(B, d)`` -> ``(B, d)``."""
    return temporal_avg_pool(lif_run(encode_batch(pixels, cfg, indices, epoch, stream), p=lif))
