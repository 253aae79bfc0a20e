"""Cartan (KAK) decomposition of two-qubit unitaries.

Any U in U(4) factors as

    U = phase * (k1a (x) k1b) * exp(i (cx XX + cy YY + cz ZZ)) * (k2a (x) k2b)

with the interaction coefficients reduced to a canonical cell
(pi/4 >= cx >= cy >= |cz|, cz >= 0 unless cx = pi/4). The coefficient
zero-pattern determines the minimal CNOT cost (0-3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitaryError

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

# Magic (Bell-like) basis: conjugation maps SU(2)xSU(2) to SO(4) and
# diagonalizes XX, YY, ZZ.
MAGIC = np.array(
    [
        [1, 0, 0, 1j],
        [0, 1j, 1, 0],
        [0, 1j, -1, 0],
        [1, 0, 0, -1j],
    ],
    dtype=complex,
) / np.sqrt(2)

# theta_k = sum_a W[k, a] * c_a + phi : diagonal phases of the
# interaction exponential in the magic basis, plus a global phase column.
_W = np.zeros((4, 4))
for _a, _p in enumerate(PAULIS):
    _W[:, _a] = np.real(np.diag(MAGIC.conj().T @ np.kron(_p, _p) @ MAGIC))
_W[:, 3] = 1.0


def interaction_unitary(cx: float, cy: float, cz: float) -> np.ndarray:
    """exp(i (cx XX + cy YY + cz ZZ))."""
    h = sum(c * np.kron(p, p) for c, p in zip((cx, cy, cz), PAULIS))
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


@dataclass
class TwoQubitDecomposition:
    coefficients: tuple[float, float, float]
    k1a: np.ndarray  # left local on the first (most significant) qubit
    k1b: np.ndarray
    k2a: np.ndarray
    k2b: np.ndarray
    global_phase: complex
    cnot_cost: int

    def rebuild(self) -> np.ndarray:
        cx, cy, cz = self.coefficients
        return (
            self.global_phase
            * np.kron(self.k1a, self.k1b)
            @ interaction_unitary(cx, cy, cz)
            @ np.kron(self.k2a, self.k2b)
        )


def _simultaneous_diagonalize(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P real orthogonal with P.T @ s @ P diagonal, for symmetric unitary s."""
    a, b = s.real, s.imag
    for tol in (1e-12, 1e-9, 1e-6, 1e-3):
        wa, va = np.linalg.eigh(a)
        cols = []
        i = 0
        while i < 4:
            j = i
            while j < 4 and wa[j] - wa[i] <= tol:
                j += 1
            block = va[:, i:j]
            wb, vb = np.linalg.eigh(block.T @ b @ block)
            cols.append(block @ vb)
            i = j
        p = np.hstack(cols)
        d = p.T @ s @ p
        if np.abs(d - np.diag(np.diag(d))).max() < 1e-10:
            return p, np.diag(d)
    raise NonUnitaryError("failed to diagonalize symmetric part of the magic transform")


def _decompose_kron(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a tensor-product unitary into (A, B) with u = A (x) B exactly."""
    r, c = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    i0, k0 = divmod(r, 2)
    j0, l0 = divmod(c, 2)
    b_raw = u[2 * i0: 2 * i0 + 2, 2 * j0: 2 * j0 + 2]
    det = np.linalg.det(b_raw)
    b = b_raw / np.sqrt(det)
    a = np.array(
        [[u[2 * i + k0, 2 * j + l0] for j in range(2)] for i in range(2)],
        dtype=complex,
    ) / b[k0, l0]
    return a, b


# local conjugators used by the canonicalization moves: V sigma_i V^dag = +-sigma_j
_SWAP_CONJ = {
    frozenset((0, 1)): np.diag([1, 1j]).astype(complex),              # S: X<->Y
    frozenset((0, 2)): np.array([[1, 1], [1, -1]]) / np.sqrt(2) + 0j,  # H: X<->Z
    frozenset((1, 2)): np.array([[np.cos(np.pi / 4), -1j * np.sin(np.pi / 4)],
                                 [-1j * np.sin(np.pi / 4), np.cos(np.pi / 4)]]),  # Rx(pi/2): Y<->Z
}


def _canonicalize(c: np.ndarray, l4: np.ndarray, r4: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = np.array(c, dtype=float)

    def shift(k: int, n: int):
        # c_k -> c_k - n*pi/2, compensated by (i sigma_k sigma_k)^n on the left
        nonlocal l4
        c[k] -= n * np.pi / 2
        f = np.linalg.matrix_power(1j * np.kron(PAULIS[k], PAULIS[k]), n % 4)
        l4 = l4 @ f

    def negate(i: int, j: int):
        nonlocal l4, r4
        k = 3 - i - j
        f = np.kron(PAULIS[k], np.eye(2))
        l4 = l4 @ f
        r4 = f @ r4
        c[i] *= -1
        c[j] *= -1

    def swap(i: int, j: int):
        nonlocal l4, r4
        v = _SWAP_CONJ[frozenset((i, j))]
        f = np.kron(v, v)
        l4 = l4 @ f
        r4 = f.conj().T @ r4
        c[i], c[j] = c[j], c[i]

    for k in range(3):
        shift(k, int(np.floor(c[k] / (np.pi / 2) + 0.5)))  # into (-pi/4, pi/4]
    # at most one negative coefficient
    neg = [k for k in range(3) if c[k] < -1e-14]
    if len(neg) >= 2:
        negate(neg[0], neg[1])
        neg = [k for k in range(3) if c[k] < -1e-14]
    if len(neg) == 1:
        k_min = int(np.argmin(np.abs(c)))
        if neg[0] != k_min:
            negate(neg[0], k_min)
    # sort descending by absolute value
    order = np.argsort(-np.abs(c), kind="stable")
    if order[0] != 0:
        swap(0, int(order[0]))
        order = np.argsort(-np.abs(c), kind="stable")
    if order[1] != 1:
        swap(1, 2)
    # z carries any remaining sign; flip it when x sits on the pi/4 face
    if c[2] < -1e-14 and abs(c[0] - np.pi / 4) < 1e-12:
        shift(0, 1)      # x -> -pi/4
        negate(0, 2)     # -> (pi/4, y, -z)
    return c, l4, r4


def kak_decompose(u: np.ndarray, atol: float = 1e-10) -> TwoQubitDecomposition:
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise NonUnitaryError(f"expected 4x4 matrix, got {u.shape}")
    if np.linalg.norm(u @ u.conj().T - np.eye(4)) > atol * 4:
        raise NonUnitaryError("matrix is not unitary to 1e-10")

    det = np.linalg.det(u)
    phase0 = det ** 0.25
    us = u / phase0
    m = MAGIC.conj().T @ us @ MAGIC
    p, d = _simultaneous_diagonalize(m.T @ m)
    if np.linalg.det(p) < 0:
        p[:, 0] *= -1
    theta = np.angle(d) / 2
    sigma = np.exp(1j * theta)
    q = m @ p @ np.diag(1 / sigma)
    if np.linalg.det(q).real < 0:
        sigma[0] *= -1
        theta[0] += np.pi
        q[:, 0] *= -1
    # q must now be real orthogonal
    if np.abs(q.imag).max() > 1e-8:
        raise NonUnitaryError("magic-basis factor failed to become real")
    q = q.real

    sol = np.linalg.solve(_W, theta)
    c = sol[:3]
    phi = sol[3]
    l4 = MAGIC @ q @ MAGIC.conj().T
    r4 = MAGIC @ p.T @ MAGIC.conj().T
    g = phase0 * np.exp(1j * phi)

    c, l4, r4 = _canonicalize(c, l4, r4)
    k1a, k1b = _decompose_kron(l4)
    k2a, k2b = _decompose_kron(r4)
    # fold any residual split-phase mismatch into the global phase
    rebuilt = np.kron(k1a, k1b) @ interaction_unitary(*c) @ np.kron(k2a, k2b)
    idx = np.unravel_index(np.argmax(np.abs(rebuilt)), rebuilt.shape)
    g = u[idx] / rebuilt[idx]

    return TwoQubitDecomposition(
        coefficients=(float(c[0]), float(c[1]), float(c[2])),
        k1a=k1a, k1b=k1b, k2a=k2a, k2b=k2b,
        global_phase=complex(g),
        cnot_cost=_cnot_cost(c),
    )


def _cnot_cost(c: np.ndarray, tol: float = 1e-9) -> int:
    ax = np.abs(c)
    if ax.max() < tol:
        return 0
    if abs(c[0] - np.pi / 4) < tol and ax[1] < tol and ax[2] < tol:
        return 1
    if ax[2] < tol:
        return 2
    return 3


def cnot_cost_of(u: np.ndarray) -> int:
    return kak_decompose(u).cnot_cost
