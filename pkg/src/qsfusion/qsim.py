"""Dense statevector simulation for the variational circuit head.

Qubit ordering is little-endian: qubit ``q`` is bit ``q`` of the amplitude
index, so on three qubits ``|q2 q1 q0> = |100>`` is amplitude 4.

Everything here is a pure function of its inputs. Batched entry points take a
leading sample axis: amplitudes of shape ``(B, 2**n)`` and data angles of shape
``(B, n_data_slots)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError

MAX_QUBITS = 24
SHIFT = pi / 2

H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)


def rx_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta):
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def romega_matrix(theta_z1, theta_x, theta_z2):
    """Combined rotation ``Rz(theta_z2) @ Rx(theta_x) @ Rz(theta_z1)``.

    ``theta_z1`` acts first on the state. Passing the same angle three times
    gives the single-angle form.
    """
    return rz_matrix(theta_z2) @ rx_matrix(theta_x) @ rz_matrix(theta_z1)


_ROTATIONS = {"RX": rx_matrix, "RY": ry_matrix, "RZ": rz_matrix}


def _batched_rotation(axis, angles):
    """Stack of rotation matrices, shape ``(B, 2, 2)``, one per angle."""
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    out = np.empty(angles.shape + (2, 2), dtype=complex)
    if axis == "RY":
        out[..., 0, 0], out[..., 0, 1] = c, -s
        out[..., 1, 0], out[..., 1, 1] = s, c
    elif axis == "RX":
        out[..., 0, 0], out[..., 0, 1] = c, -1j * s
        out[..., 1, 0], out[..., 1, 1] = -1j * s, c
    else:
        out[..., 0, 0], out[..., 1, 1] = np.exp(-0.5j * angles), np.exp(0.5j * angles)
        out[..., 0, 1] = out[..., 1, 0] = 0
    return out


# ---------------------------------------------------------------------------
# States and gates
# ---------------------------------------------------------------------------

@dataclass
class StateVector:
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (2**self.n_qubits,):
            raise ShapeError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amps.shape}"
            )

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def probabilities(self):
        return np.abs(self.amps) ** 2


GATE_KINDS = ("H", "RX", "RY", "RZ", "CNOT", "ROmega")
_N_PARAMS = {"H": 0, "RX": 1, "RY": 1, "RZ": 1, "CNOT": 0, "ROmega": 3}


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != _N_PARAMS[self.kind]:
            raise ValidationError(f"{self.kind} takes {_N_PARAMS[self.kind]} angle(s), got {len(self.params)}")
        if (self.kind == "CNOT") != (self.control is not None):
            raise ValidationError("a control qubit is required for CNOT and only for CNOT")
        if self.control is not None and self.control == self.target:
            raise ValidationError("control and target must differ")

    def matrix(self):
        """2x2 matrix, or 4x4 for CNOT in the basis ``|control, target>``."""
        if self.kind == "H":
            return H_MATRIX.copy()
        if self.kind == "ROmega":
            return romega_matrix(*self.params)
        if self.kind == "CNOT":
            u = np.eye(4, dtype=complex)
            u[2:, 2:] = X_MATRIX
            return u
        return _ROTATIONS[self.kind](self.params[0])

    def qubits(self):
        return (self.target,) if self.control is None else (self.control, self.target)


def new_state(n_qubits):
    """The all-zeros computational basis state on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError("n_qubits", f"must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def _apply_1q(amps, u, qubit, n):
    """Apply ``u`` (2x2, or (B,2,2) against a leading batch axis) to ``qubit``."""
    lead = amps.shape[:-1]
    psi = amps.reshape(lead + (2 ** (n - 1 - qubit), 2, 2**qubit))
    a0, a1 = psi[..., 0, :], psi[..., 1, :]
    if u.ndim == 2:
        out0 = u[0, 0] * a0 + u[0, 1] * a1
        out1 = u[1, 0] * a0 + u[1, 1] * a1
    else:
        u = u[:, :, :, None, None]
        out0 = u[:, 0, 0] * a0 + u[:, 0, 1] * a1
        out1 = u[:, 1, 0] * a0 + u[:, 1, 1] * a1
    return np.stack([out0, out1], axis=-2).reshape(amps.shape)


def _apply_cnot(amps, control, target, n):
    lead = amps.shape[:-1]
    psi = amps.reshape(lead + (2,) * n).copy()
    ax_c = len(lead) + n - 1 - control
    ax_t = len(lead) + n - 1 - target
    sel = [slice(None)] * psi.ndim
    sel[ax_c] = 1
    sel = tuple(sel)
    # Indexing drops the control axis, so the target axis shifts down past it.
    psi[sel] = np.flip(psi[sel], axis=ax_t - (ax_t > ax_c))
    return psi.reshape(amps.shape)


def _check_qubit(q, n):
    if not 0 <= q < n:
        raise IndexError(f"qubit index {q} out of range for {n} qubits")


def apply_gate(state, gate):
    """Return a new state with ``gate`` applied."""
    n = state.n_qubits
    for q in gate.qubits():
        _check_qubit(q, n)
    if gate.kind == "CNOT":
        amps = _apply_cnot(state.amps, gate.control, gate.target, n)
    else:
        amps = _apply_1q(state.amps, gate.matrix(), gate.target, n)
    return StateVector(n, amps)


def _expvals(amps, n):
    """<Z_q> for every qubit; trailing axis of the result indexes the qubit."""
    probs = np.abs(amps) ** 2
    lead = probs.shape[:-1]
    out = np.empty(lead + (n,))
    for q in range(n):
        p = probs.reshape(lead + (2 ** (n - 1 - q), 2, 2**q))
        out[..., q] = p[..., 0, :].sum(axis=(-2, -1)) - p[..., 1, :].sum(axis=(-2, -1))
    return out


def expval_z(state, qubit):
    """Pauli-Z expectation of one qubit. Unnormalized states are normalized first."""
    _check_qubit(qubit, state.n_qubits)
    probs = state.probabilities().reshape(2 ** (state.n_qubits - 1 - qubit), 2, 2**qubit)
    p0, p1 = probs[:, 0, :].sum(), probs[:, 1, :].sum()
    return float((p0 - p1) / (p0 + p1))


# ---------------------------------------------------------------------------
# FRQI image encoding
# ---------------------------------------------------------------------------

def frqi_encode(pixels):
    """FRQI state of a square image with ``4**k`` pixels in [0, 1].

    Pixel ``i`` maps to the angle ``pixels[i] * pi / 2``. The result has
    ``2k + 1`` qubits: qubits ``0..2k-1`` hold the position ``i`` and the top
    qubit holds the colour, so amplitude ``c * 4**k + i`` is
    ``cos(angle_i) / 2**k`` for ``c = 0`` and ``sin(angle_i) / 2**k`` for ``c = 1``.
    """
    pixels = np.asarray(pixels, dtype=float).ravel()
    size = pixels.size
    k = 0
    while 4**k < size:
        k += 1
    if size == 0 or 4**k != size:
        raise ValidationError(f"FRQI needs a power-of-4 pixel count, got {size}")
    if np.any(pixels < 0) or np.any(pixels > 1) or not np.all(np.isfinite(pixels)):
        raise ValidationError("FRQI pixels must lie in [0, 1]")
    angles = pixels * (pi / 2)
    amps = np.concatenate([np.cos(angles), np.sin(angles)]) / 2**k
    return StateVector(2 * k + 1, amps.astype(complex))


# ---------------------------------------------------------------------------
# Circuit layouts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HadamardAll:
    pass


@dataclass(frozen=True)
class DataRY:
    # slots[q] is the data-angle index fed to qubit q
    slots: tuple


@dataclass(frozen=True)
class ROmegaAll:
    # params[q] = (z1, x, z2) parameter indices for qubit q
    params: tuple


@dataclass(frozen=True)
class ParamRotation:
    axis: str
    # params[q] is the parameter index for qubit q, or None to skip it
    params: tuple


@dataclass(frozen=True)
class CnotChain:
    ring: bool = False


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    layers: tuple
    n_data_slots: int
    n_params: int
    _ops: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigError("n_qubits", f"must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        object.__setattr__(self, "_ops", tuple(_compile(self)))

    @property
    def ops(self):
        return self._ops


def _compile(spec):
    """Flatten layers into ``(kind, qubits, source)`` ops.

    ``source`` is ``None`` for fixed gates, ``("data", slot)`` or ``("param", j)``.
    """
    n = spec.n_qubits
    ops = []

    def per_qubit(values, what):
        if len(values) != n:
            raise ValidationError(f"{what} lists {len(values)} entries for {n} qubits")
        return values

    def param(j):
        if not 0 <= j < spec.n_params:
            raise ValidationError(f"parameter index {j} out of range for n_params={spec.n_params}")
        return ("param", j)

    for layer in spec.layers:
        if isinstance(layer, HadamardAll):
            ops.extend(("H", (q,), None) for q in range(n))
        elif isinstance(layer, DataRY):
            for q, slot in enumerate(per_qubit(layer.slots, "DataRY")):
                if not 0 <= slot < spec.n_data_slots:
                    raise ValidationError(f"data slot {slot} out of range for n_data_slots={spec.n_data_slots}")
                ops.append(("RY", (q,), ("data", slot)))
        elif isinstance(layer, ROmegaAll):
            for q, (z1, x, z2) in enumerate(per_qubit(layer.params, "ROmegaAll")):
                ops.append(("RZ", (q,), param(z1)))
                ops.append(("RX", (q,), param(x)))
                ops.append(("RZ", (q,), param(z2)))
        elif isinstance(layer, ParamRotation):
            if layer.axis not in _ROTATIONS:
                raise ValidationError(f"rotation axis must be RX, RY or RZ, got {layer.axis!r}")
            for q, j in enumerate(per_qubit(layer.params, "ParamRotation")):
                if j is not None:
                    ops.append((layer.axis, (q,), param(j)))
        elif isinstance(layer, CnotChain):
            pairs = [(q, q + 1) for q in range(n - 1)]
            if layer.ring and n > 2:
                pairs.append((n - 1, 0))
            ops.extend(("CNOT", pair, None) for pair in pairs)
        else:
            raise ValidationError(f"unknown layer {layer!r}")
    return ops


def default_circuit(n_qubits, shared_omega=False, ring=False):
    """Hadamard on all qubits, data RY, trainable Rz-Rx-Rz, CNOT chain.

    With ``shared_omega`` each qubit's three rotations reuse one angle
    (``n_qubits`` parameters instead of ``3 * n_qubits``).
    """
    n = n_qubits
    if shared_omega:
        omega = tuple((q, q, q) for q in range(n))
        n_params = n
    else:
        omega = tuple((3 * q, 3 * q + 1, 3 * q + 2) for q in range(n))
        n_params = 3 * n
    layers = (HadamardAll(), DataRY(tuple(range(n))), ROmegaAll(omega), CnotChain(ring=ring))
    return CircuitSpec(n, layers, n_data_slots=n, n_params=n_params)


def circuit_gates(spec, data_angles, params):
    """Expand a layout into concrete :class:`Gate` objects for one sample."""
    data_angles, params = _check_inputs(spec, data_angles, params)
    if data_angles.ndim != 1:
        raise ShapeError("circuit_gates takes a single sample")
    gates = []
    for kind, qubits, source in spec.ops:
        if kind == "CNOT":
            gates.append(Gate("CNOT", qubits[1], control=qubits[0]))
        elif source is None:
            gates.append(Gate(kind, qubits[0]))
        else:
            gates.append(Gate(kind, qubits[0], params=(_angle(source, data_angles, params),)))
    return gates


# ---------------------------------------------------------------------------
# Circuit execution and gradients
# ---------------------------------------------------------------------------

def _check_inputs(spec, data_angles, params):
    data_angles = np.asarray(data_angles, dtype=float)
    params = np.asarray(params, dtype=float)
    if data_angles.ndim not in (1, 2) or data_angles.shape[-1] != spec.n_data_slots:
        raise ShapeError(f"data_angles must end in length {spec.n_data_slots}, got shape {data_angles.shape}")
    if params.shape != (spec.n_params,):
        raise ShapeError(f"params must have shape ({spec.n_params},), got {params.shape}")
    return data_angles, params


def _angle(source, data, params):
    kind, idx = source
    return data[..., idx] if kind == "data" else params[idx]


def _apply_op(amps, op, data, params, n, shift=0.0):
    kind, qubits, source = op
    if kind == "CNOT":
        return _apply_cnot(amps, qubits[0], qubits[1], n)
    if kind == "H":
        return _apply_1q(amps, H_MATRIX, qubits[0], n)
    angle = _angle(source, data, params) + shift
    if np.ndim(angle) == 0:
        u = _ROTATIONS[kind](angle)
    else:
        u = _batched_rotation(kind, angle)
    return _apply_1q(amps, u, qubits[0], n)


def _initial(n, batch):
    amps = np.zeros((batch, 2**n), dtype=complex)
    amps[:, 0] = 1.0
    return amps


def run_circuit(spec, data_angles, params):
    """Prepare ``|0...0>``, apply the layout and return ``<Z>`` on every qubit.

    ``data_angles`` may be one sample, shape ``(n_data_slots,)``, or a batch,
    shape ``(B, n_data_slots)``; the result has shape ``(n_qubits,)`` or
    ``(B, n_qubits)`` to match.
    """
    data_angles, params = _check_inputs(spec, data_angles, params)
    single = data_angles.ndim == 1
    data = data_angles[None, :] if single else data_angles
    n = spec.n_qubits
    amps = _initial(n, data.shape[0])
    for op in spec.ops:
        amps = _apply_op(amps, op, data, params, n)
    z = _expvals(amps, n)
    return z[0] if single else z


def param_shift_grad(spec, data_angles, params, upstream):
    """Gradient of ``sum(upstream * <Z>)`` with respect to ``params``.

    Each trainable rotation is shifted by +/- pi/2 on its own. A parameter that
    appears in several rotations collects the sum of their shift terms. For a
    batch, ``upstream`` has shape ``(B, n_qubits)`` and the per-sample
    gradients are summed in sample order.
    """
    data_angles, params = _check_inputs(spec, data_angles, params)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != data_angles.shape[:-1] + (spec.n_qubits,):
        raise ShapeError(
            f"upstream must have shape {data_angles.shape[:-1] + (spec.n_qubits,)}, got {upstream.shape}"
        )
    data = np.atleast_2d(data_angles)
    up = np.atleast_2d(upstream)
    n = spec.n_qubits
    grad = np.zeros(spec.n_params)
    if not np.any(up):
        return grad

    # Cache the state in front of every trainable rotation; a shifted run
    # only needs to replay the gates from that point on.
    ops = spec.ops
    amps = _initial(n, data.shape[0])
    prefixes = {}
    for i, op in enumerate(ops):
        if op[2] is not None and op[2][0] == "param":
            prefixes[i] = amps
        amps = _apply_op(amps, op, data, params, n)

    for i, before in prefixes.items():
        terms = []
        for shift in (SHIFT, -SHIFT):
            a = _apply_op(before, ops[i], data, params, n, shift=shift)
            for op in ops[i + 1:]:
                a = _apply_op(a, op, data, params, n)
            terms.append(_expvals(a, n))
        dz = 0.5 * (terms[0] - terms[1])
        grad[ops[i][2][1]] += float(np.sum(up * dz))
    return grad
