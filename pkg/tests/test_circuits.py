"""Circuit-model tests: gates, inversion, CNOT metrics, SU(4) block,
serialization, and QASM export."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpsaqc.circuits import (
    CNOT_MATRIX,
    Circuit,
    Gate,
    circuit_from_json_dict,
    circuit_to_json_dict,
    cnot_metrics,
    load_circuit,
    qsd_cnot_count,
    rotation_matrix,
    save_circuit,
    simplify_circuit,
    single_qubit_zyz,
    su4_from_params,
    su4_inverse_params,
    to_qasm,
    zyz_angles,
)
from mpsaqc.errors import NonUnitaryError, SiteRangeError
from mpsaqc.oracle import dense_simulate, state_fidelity
from mpsaqc.simulator import simulate
from mpsaqc.tensor import EXACT, fidelity

from conftest import random_circuit, random_unitary


class TestGate:
    def test_rotation_matrices_special_values(self):
        assert np.allclose(rotation_matrix("X", np.pi),
                           -1j * np.array([[0, 1], [1, 0]]))
        assert np.allclose(rotation_matrix("Z", 0), np.eye(2))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            Gate("H", (0,))

    def test_duplicate_qubits_rejected(self):
        with pytest.raises(SiteRangeError):
            Gate("CNOT", (1, 1))

    def test_nonunitary_payload_rejected(self):
        with pytest.raises(NonUnitaryError):
            Gate("U1", (0,), (), np.array([[1, 1], [0, 1]], dtype=complex))

    def test_nonfinite_angle_rejected(self):
        with pytest.raises(ValueError):
            Gate("RX", (0,), (float("nan"),))

    def test_gate_inverse_matrix(self, rng):
        for kind in ("RX", "RY", "RZ"):
            g = Gate(kind, (0,), (0.7,))
            assert np.allclose(g.matrix() @ g.inverse().matrix(), np.eye(2))
        u = random_unitary(4, rng)
        g = Gate("U2", (0, 1), (), u)
        assert np.allclose(g.matrix() @ g.inverse().matrix(), np.eye(4), atol=1e-12)


class TestZYZ:
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        u = random_unitary(2, rng)
        theta, phi, lam, phase = zyz_angles(u)
        assert np.allclose(phase * single_qubit_zyz(theta, phi, lam), u, atol=1e-9)

    def test_diagonal_case(self):
        u = np.diag([1.0, 1j])
        theta, phi, lam, phase = zyz_angles(u)
        assert np.allclose(phase * single_qubit_zyz(theta, phi, lam), u, atol=1e-12)


class TestSU4:
    def test_zero_params_identity(self):
        u = su4_from_params(np.zeros(15))
        phase = u[0, 0]
        assert np.allclose(u, phase * np.eye(4), atol=1e-12)

    def test_random_params_unitary(self, rng):
        t = rng.uniform(-np.pi, np.pi, 15)
        u = su4_from_params(t)
        assert np.linalg.norm(u @ u.conj().T - np.eye(4)) < 1e-12

    def test_inverse_params(self, rng):
        t = rng.uniform(-np.pi, np.pi, 15)
        u = su4_from_params(t)
        v = su4_from_params(su4_inverse_params(t))
        prod = u @ v
        phase = prod[0, 0]
        assert np.allclose(prod, phase * np.eye(4), atol=1e-10)

    def test_cnot_reachable(self):
        # interaction coefficient (pi/4, 0, 0) with Hadamard-like locals
        # is locally equivalent to CNOT: verify via the kak cost
        from mpsaqc.kak import kak_decompose

        t = np.zeros(15)
        t[6] = np.pi / 4
        assert kak_decompose(su4_from_params(t)).cnot_cost == 1


class TestCircuit:
    def test_out_of_range_gate_rejected(self):
        c = Circuit(2)
        with pytest.raises(SiteRangeError):
            c.append(Gate("RX", (2,), (0.1,)))

    def test_double_inverse_structural(self, rng):
        c = random_circuit(4, 12, rng)
        back = c.inverse().inverse()
        assert len(back.gates) == len(c.gates)
        for g, h in zip(c.gates, back.gates):
            assert g.kind == h.kind and g.qubits == h.qubits
            assert np.allclose(g.matrix(), h.matrix(), atol=1e-12)

    def test_inverse_round_trip_fidelity(self, rng):
        c = random_circuit(6, 20, rng)
        state = simulate(c + c.inverse(), policy=EXACT)
        from mpsaqc.tensor import MPSState

        assert abs(fidelity(state, MPSState.zero_state(6)) - 1.0) < 1e-9


class TestCnotMetrics:
    def test_empty_circuit(self):
        m = cnot_metrics(Circuit(3))
        assert m == {"depth": 0, "count": 0}

    def test_single_cnot(self):
        c = Circuit(2, [Gate("CNOT", (0, 1))])
        assert cnot_metrics(c) == {"depth": 1, "count": 1}

    def test_brickwork_layer_l50(self, rng):
        # one brickwork layer of generic blocks: 3 CNOTs per block,
        # even sublayer then odd sublayer -> depth 6, count 3*(L-1)
        L = 50
        c = Circuit(L)
        pairs = [(i, i + 1) for i in range(0, L - 1, 2)] + \
                [(i, i + 1) for i in range(1, L - 1, 2)]
        for p in pairs:
            c.append(Gate("U2", p, (), random_unitary(4, rng)))
        m = cnot_metrics(c)
        assert m["depth"] == 6
        assert m["count"] == 3 * (L - 1)

    def test_staircase_two_cnot_blocks(self):
        # 49 sequential 2-CNOT blocks -> depth = count = 98
        L = 50
        c = Circuit(L)
        block = np.kron(np.eye(2), rotation_matrix("Y", 0.3)) @ CNOT_MATRIX \
            @ np.kron(rotation_matrix("Y", 0.4), np.eye(2)) @ CNOT_MATRIX
        for i in range(L - 1):
            c.append(Gate("U2", (i, i + 1), (), block))
        m = cnot_metrics(c)
        assert m["depth"] == 98
        assert m["count"] == 98

    def test_one_qubit_gates_free(self):
        c = Circuit(2, [Gate("RX", (0,), (1.0,)), Gate("RZ", (1,), (0.5,))])
        assert cnot_metrics(c) == {"depth": 0, "count": 0}

    def test_monotone_under_append(self, rng):
        c = Circuit(4)
        prev = (0, 0)
        for _ in range(20):
            i = int(rng.integers(0, 3))
            c.append(Gate("U2", (i, i + 1), (), random_unitary(4, rng)))
            m = cnot_metrics(c)
            assert m["depth"] >= prev[0] and m["count"] >= prev[1]
            assert m["depth"] <= m["count"]
            prev = (m["depth"], m["count"])

    def test_trivial_blocks_eliminated(self):
        c = Circuit(2, [Gate("U2", (0, 1), (), np.eye(4, dtype=complex))])
        assert cnot_metrics(c) == {"depth": 0, "count": 0}

    def test_qsd_counts(self):
        # standard quantum-Shannon-decomposition CNOT counts
        assert qsd_cnot_count(2) == 3
        assert qsd_cnot_count(3) == 20


class TestSimplify:
    def test_removes_identity_blocks(self, rng):
        c = Circuit(3, [Gate("U2", (0, 1), (), np.eye(4, dtype=complex)),
                        Gate("U2", (1, 2), (), random_unitary(4, rng))])
        out = simplify_circuit(c)
        # the trivial block is replaced by its (identity) local factors
        assert sum(len(g.qubits) == 2 for g in out.gates) == 1
        assert cnot_metrics(out)["count"] == 3


class TestSerialization:
    def test_json_round_trip(self, rng, tmp_path):
        c = random_circuit(5, 15, rng)
        path = str(tmp_path / "circ.json")
        save_circuit(c, path)
        back = load_circuit(path)
        a = dense_simulate(c)
        b = dense_simulate(back)
        assert state_fidelity(a, b) >= 1.0 - 1e-12

    def test_dict_preserves_kinds(self, rng):
        c = random_circuit(4, 10, rng)
        back = circuit_from_json_dict(circuit_to_json_dict(c))
        assert [g.kind for g in back.gates] == [g.kind for g in c.gates]


class TestQasm:
    def test_header_and_gates(self, rng):
        c = random_circuit(3, 8, rng)
        text = to_qasm(c)
        assert text.startswith("OPENQASM 2.0;")
        assert "qreg q[3];" in text

    def test_su4_block_is_decomposed(self, rng):
        c = Circuit(2, [Gate("SU4", (0, 1), tuple(rng.uniform(-1, 1, 15)))])
        text = to_qasm(c)
        # rendering splits the interaction into a YY stage and an XX+ZZ
        # stage (4 cx); the kak-based metric still reports the minimal 3
        assert text.count("cx ") == 4
        assert cnot_metrics(c)["count"] == 3
