"""Cartan decomposition tests: reassembly, Weyl-chamber canonicalization,
and minimal-CNOT classification."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpsaqc.circuits import CNOT_MATRIX, CZ_MATRIX, SWAP_MATRIX
from mpsaqc.errors import NonUnitaryError
from mpsaqc.kak import cnot_cost_of, interaction_unitary, kak_decompose

from conftest import random_unitary


def reassembly_error(u):
    d = kak_decompose(u)
    return np.linalg.norm(d.rebuild() - u)


class TestClassification:
    def test_identity_cost_zero(self):
        assert cnot_cost_of(np.eye(4, dtype=complex)) == 0

    def test_local_gates_cost_zero(self, rng):
        u = np.kron(random_unitary(2, rng), random_unitary(2, rng))
        assert cnot_cost_of(u) == 0

    def test_cnot_cost_one(self):
        assert cnot_cost_of(CNOT_MATRIX) == 1

    def test_cz_cost_one(self):
        assert cnot_cost_of(CZ_MATRIX) == 1

    def test_locally_dressed_cnot_cost_one(self, rng):
        u = np.kron(random_unitary(2, rng), random_unitary(2, rng)) \
            @ CNOT_MATRIX \
            @ np.kron(random_unitary(2, rng), random_unitary(2, rng))
        assert cnot_cost_of(u) == 1

    def test_swap_cost_three(self):
        assert cnot_cost_of(SWAP_MATRIX) == 3

    def test_two_cnot_product(self, rng):
        u = CNOT_MATRIX @ np.kron(random_unitary(2, rng), random_unitary(2, rng)) \
            @ CNOT_MATRIX
        assert cnot_cost_of(u) == 2

    def test_haar_random_cost_three(self, rng):
        costs = [cnot_cost_of(random_unitary(4, rng)) for _ in range(50)]
        assert all(c == 3 for c in costs)


class TestWeylChamber:
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_coefficients_in_chamber(self, seed):
        rng = np.random.default_rng(seed)
        d = kak_decompose(random_unitary(4, rng))
        cx, cy, cz = d.coefficients
        assert np.pi / 4 + 1e-9 >= cx >= cy >= abs(cz) - 1e-12
        assert cz >= -np.pi / 4 - 1e-9

    def test_interaction_unitary_roundtrip(self, rng):
        c = sorted(rng.uniform(0, np.pi / 4, 3), reverse=True)
        u = interaction_unitary(*c)
        d = kak_decompose(u)
        assert np.allclose(sorted(d.coefficients, reverse=True), c, atol=1e-8)


class TestReassembly:
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_random_unitaries(self, seed):
        rng = np.random.default_rng(seed)
        assert reassembly_error(random_unitary(4, rng)) < 1e-8

    def test_named_gates(self):
        for u in (np.eye(4, dtype=complex), CNOT_MATRIX, CZ_MATRIX, SWAP_MATRIX):
            assert reassembly_error(u) < 1e-8

    def test_nonunitary_rejected(self):
        with pytest.raises(NonUnitaryError):
            kak_decompose(np.ones((4, 4), dtype=complex))

    def test_wrong_shape_rejected(self):
        with pytest.raises(NonUnitaryError):
            kak_decompose(np.eye(3, dtype=complex))
