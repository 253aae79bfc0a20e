"""Dense statevector ground truth for small systems.

Statevectors are little-endian: basis index n has bit k equal to the
state of qubit/site k, matching ``MPSState.to_dense``. This is the single
documented conversion point between the MPS and dense worlds.
"""

from __future__ import annotations

import numpy as np

from .errors import OracleCapError

DEFAULT_CAP = 14


def apply_dense_gate(vec: np.ndarray, qubits: tuple[int, ...], u: np.ndarray,
                     n_qubits: int) -> np.ndarray:
    """Apply a gate matrix to a dense vector.

    The gate matrix basis orders the first listed qubit as the most
    significant bit of its index, consistent with the MPS simulator.
    """
    q = len(qubits)
    view = vec.reshape((2,) * n_qubits)
    # qubit k lives on axis n_qubits - 1 - k
    axes = [n_qubits - 1 - qb for qb in qubits]
    view = np.moveaxis(view, axes, range(q))
    shape = view.shape
    out = (u @ view.reshape(2 ** q, -1)).reshape(shape)
    out = np.moveaxis(out, range(q), axes)
    return out.reshape(-1)


def dense_simulate(circuit, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact amplitudes of circuit applied to |0...0>."""
    from .circuits import Circuit  # local import to avoid a cycle

    assert isinstance(circuit, Circuit)
    n = circuit.n_qubits
    if n > cap:
        raise OracleCapError(f"{n} qubits exceeds dense cap {cap}")
    vec = np.zeros(2 ** n, dtype=complex)
    vec[0] = 1.0
    for gate in circuit.gates:
        vec = apply_dense_gate(vec, tuple(gate.qubits), gate.matrix(), n)
    return vec


def dense_apply_circuit(circuit, vec: np.ndarray, cap: int = DEFAULT_CAP) -> np.ndarray:
    n = circuit.n_qubits
    if n > cap:
        raise OracleCapError(f"{n} qubits exceeds dense cap {cap}")
    out = np.asarray(vec, dtype=complex).copy()
    for gate in circuit.gates:
        out = apply_dense_gate(out, tuple(gate.qubits), gate.matrix(), n)
    return out


def dense_xxz_hamiltonian(params) -> np.ndarray:
    """Assemble the spin-chain Hamiltonian as a dense matrix."""
    from .physics import XXZParams

    assert isinstance(params, XXZParams)
    L = params.L
    if L > 14:
        raise OracleCapError(f"{L} sites exceeds dense cap 14")
    sx = np.array([[0, 1], [1, 0]], dtype=complex) / 2
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
    sz = np.diag([0.5, -0.5]).astype(complex)
    dim = 2 ** L
    h = np.zeros((dim, dim), dtype=complex)

    def embed(op: np.ndarray, site: int) -> np.ndarray:
        mats = [np.eye(2, dtype=complex)] * L
        mats[L - 1 - site] = op  # axis 0 is the most significant bit
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    for i in range(L - 1):
        h += embed(sx, i) @ embed(sx, i + 1)
        h += embed(sy, i) @ embed(sy, i + 1)
        h += params.J_z * (embed(sz, i) @ embed(sz, i + 1))
    for i in range(L):
        h -= params.h_z * embed(sz, i)
    return h


def dense_ground_state(params) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the assembled Hamiltonian."""
    h = dense_xxz_hamiltonian(params)
    vals, vecs = np.linalg.eigh(h)
    return float(vals[0]), vecs[:, 0]


def dense_evolve(psi: np.ndarray, params, t: float, cap: int = 12) -> np.ndarray:
    """exp(-iHt) psi via eigendecomposition."""
    n = int(np.log2(len(psi)))
    if n > cap:
        raise OracleCapError(f"{n} sites exceeds dense evolution cap {cap}")
    h = dense_xxz_hamiltonian(params)
    vals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * vals * t)
    return vecs @ (phases * (vecs.conj().T @ psi))


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(abs(np.vdot(a, b)) ** 2 / (na ** 2 * nb ** 2))
