# coding: utf-8
# # A five-qubit register by hand
#
# The quantum head is a dense statevector simulator. Amplitudes are stored
# little-endian: qubit 0 is the least significant bit of the basis index.
# This walkthrough builds the default circuit one layer at a time and
# watches the Pauli-Z readout change.

import numpy as np

from qsfusion.qsim import (
    Gate, StateVector, apply_gate, circuit_gates, default_circuit, expval_z, frqi_encode,
    new_state, param_shift_grad, run_circuit,
)

np.set_printoptions(precision=4, suppress=True)

# %%
# A Hadamard on qubit 0 of a 2-qubit register followed by a CNOT gives a Bell pair.

s = new_state(2)
s = apply_gate(s, Gate("H", 0))
s = apply_gate(s, Gate("CNOT", 1, control=0))
print("Bell amplitudes:", s.amps)
print("<Z> per qubit:  ", [expval_z(s, q) for q in range(2)])

# %%
# Expectations normalise the state first, so an unnormalised (1, 2) qubit reads -0.6.

print("(1, 2) ->", expval_z(StateVector(1, [1, 2]), 0))

# %%
# The default layout: H on every wire, one RY data slot per wire, a trainable
# Rz.Rx.Rz block per wire, then a CNOT chain.

spec = default_circuit(5)
for g in circuit_gates(spec, np.linspace(0.1, 0.5, 5), np.zeros(spec.n_params))[:12]:
    print(g.kind, g.target, g.control, np.round(g.params, 3))
print("...", spec.n_params, "trainable angles in total")

# %%
# Random trainable angles, data angles in [0, pi/2]. Wire 0 is read before
# any CNOT touches it; the others carry parities of their neighbours and read
# much closer to zero. Keep that in mind when reading the training curves.

rng = np.random.default_rng(0)
data = rng.uniform(0, np.pi / 2, 5)
thetas = rng.uniform(0, 2 * np.pi, spec.n_params)
print("data angles:", data)
print("<Z>:        ", run_circuit(spec, data, thetas))

# %%
# Gradients come from the parameter-shift rule. Compare against a central difference.

up = np.ones(5)
exact = param_shift_grad(spec, data, thetas, up)
eps = 1e-5
numeric = np.array([
    (up @ run_circuit(spec, data, thetas + eps * e) - up @ run_circuit(spec, data, thetas - eps * e)) / (2 * eps)
    for e in np.eye(spec.n_params)
])
print("max |shift - finite diff|:", np.abs(exact - numeric).max())

# %%
# FRQI stores a whole 2x2 image in three qubits; the colour qubit is the top bit.

img = np.array([0.0, 0.25, 0.5, 1.0])
print("FRQI amplitudes:", frqi_encode(img).amps.real)
