"""Gate and circuit representation, metrics, and serialization.

Gate matrices order the first listed qubit as the most significant bit
of the matrix index; e.g. CNOT with ``qubits=(control, target)`` is the
textbook matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, NonUnitaryError, SiteRangeError
from .kak import PAULI_X, PAULI_Y, PAULI_Z, kak_decompose, interaction_unitary

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CNOT", "CZ", "U1", "U2", "SU4", "UQ")

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def rotation_matrix(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "Z":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]])
    raise KeyError(axis)


def single_qubit_zyz(theta: float, phi: float, lam: float) -> np.ndarray:
    """Rz(phi) Ry(theta) Rz(lam)."""
    return rotation_matrix("Z", phi) @ rotation_matrix("Y", theta) @ rotation_matrix("Z", lam)


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, complex]:
    """(theta, phi, lam, phase) with u = phase * Rz(phi) Ry(theta) Rz(lam)."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    su = u / np.sqrt(det)
    theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    if abs(su[0, 0]) < 1e-12:  # theta = pi
        phi, lam = 2 * np.angle(su[1, 0]), 0.0
    elif abs(su[1, 0]) < 1e-12:  # theta = 0
        phi, lam = 2 * np.angle(su[1, 1]), 0.0
    else:
        phi = np.angle(su[1, 0]) - np.angle(su[0, 0])
        lam = np.angle(-su[0, 1]) - np.angle(su[0, 0])
    cand = single_qubit_zyz(theta, phi, lam)
    idx = np.unravel_index(np.argmax(np.abs(cand)), cand.shape)
    phase = u[idx] / cand[idx]
    return theta, phi, lam, phase


def su4_from_params(theta) -> np.ndarray:
    """15-parameter SU(4) block: locals, Cartan interaction, locals.

    Layout: theta[0:3]/[3:6] left locals (ZYZ angles, first/second qubit),
    theta[6:9] interaction coefficients, theta[9:12]/[12:15] right locals.
    """
    t = np.asarray(theta, dtype=float)
    if t.shape != (15,):
        raise DimensionMismatchError(f"expected 15 parameters, got {t.shape}")
    a1 = single_qubit_zyz(*t[0:3])
    b1 = single_qubit_zyz(*t[3:6])
    a2 = single_qubit_zyz(*t[9:12])
    b2 = single_qubit_zyz(*t[12:15])
    return np.kron(a1, b1) @ interaction_unitary(*t[6:9]) @ np.kron(a2, b2)


def su4_inverse_params(theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)

    def inv3(x):  # params are (theta, phi, lam) for Rz(phi)Ry(theta)Rz(lam);
        # the inverse is Rz(-lam)Ry(-theta)Rz(-phi)
        return np.array([-x[0], -x[2], -x[1]])

    return np.concatenate([inv3(t[9:12]), inv3(t[12:15]), -t[6:9], inv3(t[0:3]), inv3(t[3:6])])


@dataclass
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    payload: Optional[np.ndarray] = None  # fixed matrix for U1/U2/UQ

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        self.qubits = tuple(int(q) for q in self.qubits)
        self.params = tuple(float(p) for p in self.params)
        if len(set(self.qubits)) != len(self.qubits):
            raise SiteRangeError("gate qubits must be distinct")
        if any(not math.isfinite(p) for p in self.params):
            raise ValueError("gate parameters must be finite")
        n_expected = {"RX": 1, "RY": 1, "RZ": 1, "CNOT": 2, "CZ": 2,
                      "U1": 1, "U2": 2, "SU4": 2}.get(self.kind)
        if n_expected is not None and len(self.qubits) != n_expected:
            raise SiteRangeError(f"{self.kind} needs {n_expected} qubits")
        if self.kind in ROTATION_KINDS and len(self.params) != 1:
            raise ValueError(f"{self.kind} needs one angle")
        if self.kind == "SU4" and len(self.params) != 15:
            raise ValueError("SU4 needs 15 parameters")
        if self.kind in ("U1", "U2", "UQ"):
            dim = 2 ** len(self.qubits)
            m = np.asarray(self.payload, dtype=complex)
            if m.shape != (dim, dim):
                raise DimensionMismatchError(f"{self.kind} payload must be {dim}x{dim}")
            if np.linalg.norm(m @ m.conj().T - np.eye(dim)) > 1e-10 * dim:
                raise NonUnitaryError(f"{self.kind} payload is not unitary to 1e-10")
            self.payload = m

    def matrix(self) -> np.ndarray:
        if self.kind in ROTATION_KINDS:
            return rotation_matrix(self.kind[1], self.params[0])
        if self.kind == "CNOT":
            return CNOT_MATRIX
        if self.kind == "CZ":
            return CZ_MATRIX
        if self.kind == "SU4":
            return su4_from_params(self.params)
        return self.payload

    def inverse(self) -> "Gate":
        if self.kind in ROTATION_KINDS:
            return Gate(self.kind, self.qubits, (-self.params[0],))
        if self.kind in ("CNOT", "CZ"):
            return Gate(self.kind, self.qubits)
        if self.kind == "SU4":
            return Gate("SU4", self.qubits, tuple(su4_inverse_params(self.params)))
        return Gate(self.kind, self.qubits, (), self.payload.conj().T)


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    initial_state_tag: str = "zero"  # or "mps" with an attached reference
    initial_state: Optional[object] = None

    def __post_init__(self):
        for g in self.gates:
            self._check_gate(g)

    def _check_gate(self, g: Gate) -> None:
        if any(q < 0 or q >= self.n_qubits for q in g.qubits):
            raise SiteRangeError(f"gate {g.kind} qubits {g.qubits} out of range")

    def append(self, gate: Gate) -> None:
        self._check_gate(gate)
        self.gates.append(gate)

    def extend(self, gates) -> None:
        for g in gates:
            self.append(g)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)],
                       self.initial_state_tag, self.initial_state)

    def __add__(self, other: "Circuit") -> "Circuit":
        if self.n_qubits != other.n_qubits:
            raise DimensionMismatchError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, list(self.gates) + list(other.gates),
                       self.initial_state_tag, self.initial_state)


def inverse(c: Circuit) -> Circuit:
    return c.inverse()


def qsd_cnot_count(n: int) -> int:
    """Generic n-qubit unitary CNOT bound via quantum Shannon decomposition."""
    if n <= 1:
        return 0
    if n == 2:
        return 3
    return round(23 / 48 * 4 ** n - 3 / 2 * 2 ** n + 4 / 3)


def _gate_cnot_cost(g: Gate, trivial_tol: float = 1e-9) -> int:
    if len(g.qubits) == 1:
        return 0
    if g.kind in ("CNOT", "CZ"):
        return 1
    if g.kind == "UQ" and len(g.qubits) > 2:
        return qsd_cnot_count(len(g.qubits))
    dec = kak_decompose(g.matrix())
    if max(abs(x) for x in dec.coefficients) < trivial_tol:
        return 0  # trivially-small block, eliminated from metrics
    return dec.cnot_cost


def cnot_metrics(c: Circuit) -> dict:
    """CNOT count and CNOT-layer depth (ASAP schedule on qubit wires)."""
    count = 0
    wire_time = [0] * c.n_qubits
    for g in c.gates:
        cost = _gate_cnot_cost(g)
        if cost == 0:
            continue
        count += cost
        start = max(wire_time[q] for q in g.qubits)
        for q in g.qubits:
            wire_time[q] = start + cost
    depth = max(wire_time) if wire_time else 0
    return {"depth": depth, "count": count}


def simplify_circuit(c: Circuit, tol: float = 1e-9) -> Circuit:
    """Replace two-qubit blocks with near-zero interaction by their local factors."""
    out = Circuit(c.n_qubits, [], c.initial_state_tag, c.initial_state)
    for g in c.gates:
        if len(g.qubits) == 2 and g.kind in ("U2", "SU4"):
            dec = kak_decompose(g.matrix())
            if max(abs(x) for x in dec.coefficients) < tol:
                a = dec.k1a @ dec.k2a * dec.global_phase
                b = dec.k1b @ dec.k2b
                out.append(Gate("U1", (g.qubits[0],), (), a))
                out.append(Gate("U1", (g.qubits[1],), (), b))
                continue
        out.append(g)
    return out


# -- serialization ----------------------------------------------------


def circuit_to_json_dict(c: Circuit) -> dict:
    gates = []
    for g in c.gates:
        entry = {"kind": g.kind, "q": list(g.qubits)}
        if g.params:
            entry["params"] = list(g.params)
        if g.payload is not None:
            entry["matrix"] = {
                "re": g.payload.real.tolist(),
                "im": g.payload.imag.tolist(),
            }
        gates.append(entry)
    return {"n": c.n_qubits, "gates": gates}


def circuit_from_json_dict(d: dict) -> Circuit:
    gates = []
    for entry in d["gates"]:
        payload = None
        if "matrix" in entry:
            m = entry["matrix"]
            payload = np.asarray(m["re"], dtype=float) + 1j * np.asarray(m["im"], dtype=float)
        gates.append(Gate(entry["kind"], tuple(entry["q"]),
                          tuple(entry.get("params", ())), payload))
    return Circuit(d["n"], gates)


def save_circuit(c: Circuit, path: str) -> None:
    with open(path, "w") as f:
        json.dump(circuit_to_json_dict(c), f)


def load_circuit(path: str) -> Circuit:
    with open(path) as f:
        return circuit_from_json_dict(json.load(f))


# -- OpenQASM-2 subset export ----------------------------------------


def _qasm_1q(u: np.ndarray, q: int) -> list[str]:
    theta, phi, lam, _ = zyz_angles(u)
    return [f"u3({theta:.12g},{phi:.12g},{lam:.12g}) q[{q}];"]


def _qasm_2q_block(u: np.ndarray, qa: int, qb: int) -> list[str]:
    """Correct (not depth-optimal) CNOT-basis rendering of a 4x4 unitary."""
    dec = kak_decompose(u)
    cx, cy, cz = dec.coefficients
    lines = []
    lines += _qasm_1q(dec.k2a, qa)
    lines += _qasm_1q(dec.k2b, qb)
    # exp(i cy YY) = (S x S) CNOT (Rx(-2 cy) x I) CNOT (S^dag x S^dag)
    s = np.diag([1, 1j]).astype(complex)
    lines += _qasm_1q(s.conj().T, qa)
    lines += _qasm_1q(s.conj().T, qb)
    lines.append(f"cx q[{qa}],q[{qb}];")
    lines.append(f"rx({-2 * cy:.12g}) q[{qa}];")
    lines.append(f"cx q[{qa}],q[{qb}];")
    lines += _qasm_1q(s, qa)
    lines += _qasm_1q(s, qb)
    # exp(i cx XX) * exp(i cz ZZ) = CNOT (Rx(-2 cx) x Rz(-2 cz)) CNOT
    lines.append(f"cx q[{qa}],q[{qb}];")
    lines.append(f"rx({-2 * cx:.12g}) q[{qa}];")
    lines.append(f"rz({-2 * cz:.12g}) q[{qb}];")
    lines.append(f"cx q[{qa}],q[{qb}];")
    lines += _qasm_1q(dec.k1a, qa)
    lines += _qasm_1q(dec.k1b, qb)
    return lines


def to_qasm(c: Circuit) -> str:
    """OpenQASM-2 rendering with rx/ry/rz/u3/cx; SU4/U2 blocks are decomposed."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n_qubits}];"]
    for g in c.gates:
        if g.kind in ROTATION_KINDS:
            lines.append(f"{g.kind.lower()}({g.params[0]:.12g}) q[{g.qubits[0]}];")
        elif g.kind == "CNOT":
            lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];")
        elif g.kind == "CZ":
            lines.append(f"cz q[{g.qubits[0]}],q[{g.qubits[1]}];")
        elif g.kind == "U1":
            lines += _qasm_1q(g.payload, g.qubits[0])
        elif g.kind in ("U2", "SU4"):
            lines += _qasm_2q_block(g.matrix(), g.qubits[0], g.qubits[1])
        else:
            raise NonUnitaryError("UQ gates have no QASM rendering; decompose first")
    return "\n".join(lines) + "\n"
