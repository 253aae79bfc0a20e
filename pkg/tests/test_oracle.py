"""Dense reference-oracle tests: statevector simulation, exact
diagonalization, and exact propagators."""

import numpy as np
import pytest

from mpsaqc.circuits import Circuit, Gate
from mpsaqc.errors import OracleCapError
from mpsaqc.oracle import (
    dense_evolve,
    dense_ground_state,
    dense_simulate,
    dense_xxz_hamiltonian,
    state_fidelity,
)
from mpsaqc.physics import XXZParams

from conftest import random_circuit


class TestDenseSimulate:
    def test_empty_circuit_basis_vector(self):
        vec = dense_simulate(Circuit(3))
        want = np.zeros(8)
        want[0] = 1.0
        assert np.allclose(vec, want)

    def test_hadamard_like_rotation(self):
        # RY(pi/2)|0> = (|0> + |1>)/sqrt(2)
        c = Circuit(1, [Gate("RY", (0,), (np.pi / 2,))])
        vec = dense_simulate(c)
        assert np.allclose(vec, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)

    def test_cap_enforced(self):
        with pytest.raises(OracleCapError):
            dense_simulate(Circuit(15))

    def test_unitarity(self, rng):
        c = random_circuit(8, 30, rng)
        assert abs(np.linalg.norm(dense_simulate(c)) - 1.0) < 1e-12


class TestDenseGroundState:
    def test_two_site_heisenberg_singlet(self):
        e, vec = dense_ground_state(XXZParams(2, 1.0, 0.0))
        assert abs(e - (-0.75)) < 1e-12

    def test_large_field_product_limit(self):
        e, vec = dense_ground_state(XXZParams(2, 1.0, 50.0))
        # |00> (both spins up, little-endian index 0) dominates
        assert abs(abs(vec[0]) - 1.0) < 1e-3

    def test_hermitian_hamiltonian(self):
        h = dense_xxz_hamiltonian(XXZParams(6, 2.5, 0.3))
        assert np.linalg.norm(h - h.conj().T) < 1e-12

    def test_matches_dmrg_at_l8(self):
        from mpsaqc.physics import DmrgConfig, ground_state

        p = XXZParams(8, 2.5, 0.0)
        e_dense, _ = dense_ground_state(p)
        _, e_dmrg, _ = ground_state(p, DmrgConfig(truncation_cutoff=1e-8))
        assert abs(e_dense - e_dmrg) < 1e-8
        assert e_dmrg >= e_dense - 1e-10  # variational bound


class TestDenseEvolve:
    def test_time_zero_identity(self, rng):
        p = XXZParams(4, 1.5, 0.2)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        psi /= np.linalg.norm(psi)
        out = dense_evolve(psi, p, 0.0)
        assert state_fidelity(out, psi) >= 1.0 - 1e-12

    def test_eigenstate_phase_only(self):
        p = XXZParams(4, 1.5, 0.0)
        e, vec = dense_ground_state(p)
        out = dense_evolve(vec, p, 1.7)
        assert state_fidelity(out, vec) >= 1.0 - 1e-12
        assert abs(np.vdot(vec, out) - np.exp(-1j * e * 1.7)) < 1e-10

    def test_norm_preserved(self, rng):
        p = XXZParams(5, 2.0, 0.4)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        out = dense_evolve(psi, p, 2.3)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12
