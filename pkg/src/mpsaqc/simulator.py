"""Evaluate circuits into MPS states under a truncation policy.

Non-adjacent two-qubit gates are routed with transient SWAP chains so
that long-range couplings (all-to-all adaptive ansatzes) stay simulable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, Gate, SWAP_MATRIX
from .errors import DimensionMismatchError, SiteRangeError
from .tensor import (
    EXACT,
    MPSState,
    TruncationPolicy,
    apply_multi_site_gate,
    apply_single_site_gate,
    apply_two_site_gate,
)


def _apply_gate(state: MPSState, gate: Gate, policy: TruncationPolicy) -> MPSState:
    qubits = gate.qubits
    if len(qubits) == 1:
        return apply_single_site_gate(state, qubits[0], gate.matrix())
    if len(qubits) == 2:
        a, b = qubits
        u = gate.matrix()
        if a > b:
            a, b = b, a
            u = SWAP_MATRIX @ u @ SWAP_MATRIX
        if b == a + 1:
            return apply_two_site_gate(state, a, u, policy)
        # route with a transient SWAP chain: bring b next to a, apply, undo
        for k in range(b - 1, a, -1):
            state = apply_two_site_gate(state, k, SWAP_MATRIX, policy)
        state = apply_two_site_gate(state, a, u, policy)
        for k in range(a + 1, b):
            state = apply_two_site_gate(state, k, SWAP_MATRIX, policy)
        return state
    # UQ on contiguous ascending qubits
    qs = sorted(qubits)
    if qs != list(range(qs[0], qs[0] + len(qs))) or list(qubits) != qs:
        raise SiteRangeError("multi-qubit gates must act on contiguous ascending qubits")
    return apply_multi_site_gate(state, qs[0], gate.matrix(), len(qs), policy)


def simulate(circuit: Circuit, init: MPSState | None = None,
             policy: TruncationPolicy = EXACT) -> MPSState:
    """Apply the circuit's gates to ``init`` (default: its tagged initial state)."""
    if init is None:
        if circuit.initial_state_tag == "mps" and circuit.initial_state is not None:
            init = circuit.initial_state
        else:
            init = MPSState.zero_state(circuit.n_qubits)
    if init.length != circuit.n_qubits:
        raise DimensionMismatchError(
            f"initial state has {init.length} sites, circuit has {circuit.n_qubits}")
    state = init.copy()
    state.discarded_weight = 0.0
    for gate in circuit.gates:
        state = _apply_gate(state, gate, policy)
    return state


@dataclass
class SimulationContext:
    """A cached MPS prefix plus the gates still pending on top of it."""

    cached_state: MPSState
    pending_gates: list[Gate] = field(default_factory=list)
    policy: TruncationPolicy = EXACT

    @property
    def n_qubits(self) -> int:
        return self.cached_state.length

    def extend_cache(self, gates: list[Gate]) -> None:
        """Absorb gates into the cached prefix (they become fixed)."""
        state = self.cached_state
        for g in gates:
            state = _apply_gate(state, g, self.policy)
        self.cached_state = state

    def append(self, gate: Gate) -> None:
        if any(q < 0 or q >= self.n_qubits for q in gate.qubits):
            raise SiteRangeError(f"gate qubits {gate.qubits} out of range")
        self.pending_gates.append(gate)


def evaluate_with_cache(ctx: SimulationContext) -> MPSState:
    """Evaluate pending gates on the cached prefix.

    Follows the identical truncation path the uncached evaluation of the
    full circuit would take under the same policy.
    """
    state = ctx.cached_state.copy()
    for gate in ctx.pending_gates:
        if any(q >= ctx.n_qubits for q in gate.qubits):
            raise DimensionMismatchError("pending gate exceeds cached state width")
        state = _apply_gate(state, gate, ctx.policy)
    return state
