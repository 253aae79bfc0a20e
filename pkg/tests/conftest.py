"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from mpsaqc.circuits import Circuit, Gate
from mpsaqc.tensor import MPSState


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fixing."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_mps(L: int, chi: int, seed: int) -> MPSState:
    rng = np.random.default_rng(seed)
    return MPSState.random_state(L, chi, rng).normalized()


def random_circuit(L: int, depth: int, rng: np.random.Generator,
                   two_qubit_prob: float = 0.5) -> Circuit:
    """Random circuit mixing rotations, CNOTs, and generic 4x4 unitaries."""
    circ = Circuit(L)
    for _ in range(depth):
        if L > 1 and rng.random() < two_qubit_prob:
            i = int(rng.integers(0, L - 1))
            if rng.random() < 0.5:
                circ.append(Gate("CNOT", (i, i + 1)))
            else:
                circ.append(Gate("U2", (i, i + 1), (), random_unitary(4, rng)))
        else:
            q = int(rng.integers(0, L))
            kind = ("RX", "RY", "RZ")[rng.integers(0, 3)]
            circ.append(Gate(kind, (q,), (float(rng.uniform(-np.pi, np.pi)),)))
    return circ


@pytest.fixture
def rng():
    return np.random.default_rng(42)
