"""Benchmark target generation and aggregate statistics helpers."""

from __future__ import annotations

import numpy as np

from .circuits import Circuit, Gate
from .simulator import simulate
from .tensor import MPSState, TruncationPolicy


def random_brickwork_circuit(L: int, rng: np.random.Generator) -> Circuit:
    """One layer of random single-CNOT blocks over a random product layer.

    Each block is a CNOT followed by Ry/Rz rotations on the control and
    Ry/Rx on the target, so every bond of the generated state has
    dimension exactly 2 (a single CNOT crosses each cut once).
    """
    circ = Circuit(L)
    for q in range(L):
        a, b, c = rng.uniform(-np.pi, np.pi, 3)
        circ.append(Gate("RZ", (q,), (a,)))
        circ.append(Gate("RY", (q,), (b,)))
        circ.append(Gate("RZ", (q,), (c,)))
    pairs = [(i, i + 1) for i in range(0, L - 1, 2)] + \
            [(i, i + 1) for i in range(1, L - 1, 2)]
    for (i, j) in pairs:
        circ.append(Gate("CNOT", (i, j)))
        t1, t2, t3, t4 = rng.uniform(-np.pi, np.pi, 4)
        circ.append(Gate("RY", (i,), (t1,)))
        circ.append(Gate("RZ", (i,), (t2,)))
        circ.append(Gate("RY", (j,), (t3,)))
        circ.append(Gate("RX", (j,), (t4,)))
    return circ


def random_chi2_state(L: int, seed: int) -> MPSState:
    """Random bond-dimension-2 MPS from a one-layer brickwork circuit."""
    rng = np.random.default_rng(seed)
    # negligible threshold only sheds numerically-zero Schmidt values
    state = simulate(random_brickwork_circuit(L, rng), policy=TruncationPolicy(1e-24, None))
    return state.normalized()


def aggregate(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        "min": float(arr.min()),
        "max": float(arr.max()),
    }
