"""Tensor-core unit and property tests: canonical forms, truncation,
compression, observables, and serialization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpsaqc.circuits import CNOT_MATRIX
from mpsaqc.errors import DimensionMismatchError, SiteRangeError
from mpsaqc.tensor import (
    EXACT,
    MPOOperator,
    MPSState,
    TruncationPolicy,
    apply_single_site_gate,
    apply_two_site_gate,
    canonicalize,
    compress,
    expectation_sz,
    fidelity,
    inner_product,
    isometry_residuals,
    load_mps,
    mpo_expectation,
    mps_from_json_dict,
    mps_to_json_dict,
    save_mps,
    truncate_spectrum,
    two_site_correlation,
)

from conftest import random_mps, random_unitary


HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


class TestMPSStateBasics:
    def test_zero_state_bonds(self):
        s = MPSState.zero_state(6)
        assert s.bond_dims() == [1] * 5  # interior bonds only
        assert abs(s.norm() - 1.0) < 1e-12

    def test_basis_state_dense(self):
        s = MPSState.basis_state([1, 0, 1])
        vec = s.to_dense()
        # little-endian: site 0 is the least significant bit
        assert abs(vec[0b101] - 1.0) < 1e-12

    def test_shape_chain_validation(self):
        s = MPSState.zero_state(4)
        s.tensors[1] = np.zeros((2, 2, 1), dtype=complex)
        with pytest.raises(DimensionMismatchError):
            s.validate()

    def test_norm_log_scale(self):
        s = random_mps(8, 4, 0)
        scaled = s.copy()
        scaled.norm_log += 3.0
        assert abs(scaled.norm() - np.exp(3.0)) < 1e-9


class TestInnerProduct:
    def test_self_overlap_is_one(self):
        s = random_mps(8, 4, 1)
        assert abs(inner_product(s, s) - 1.0) < 1e-12

    def test_orthogonal_product_states(self):
        zero = MPSState.zero_state(4)
        neel = MPSState.basis_state([0, 1, 0, 1])
        assert abs(inner_product(zero, neel)) < 1e-14

    def test_matches_dense_dot(self):
        a = random_mps(8, 4, 2)
        b = random_mps(8, 4, 3)
        want = np.vdot(a.to_dense(), b.to_dense())
        assert abs(inner_product(a, b) - want) < 1e-10

    def test_length_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            inner_product(MPSState.zero_state(3), MPSState.zero_state(4))


class TestCanonicalize:
    def test_product_state_unchanged(self):
        s = MPSState.basis_state([0, 1, 0])
        c = canonicalize(s, 0)
        assert abs(abs(inner_product(s, c)) - 1.0) < 1e-12

    @pytest.mark.parametrize("center", [0, 3, 7])
    def test_isometry_residuals(self, center):
        s = random_mps(8, 4, 4)
        c = canonicalize(s, center)
        res = isometry_residuals(c)
        for k, r in enumerate(res):
            if k != center:
                assert r < 1e-10

    def test_overlap_preserved_many(self):
        for seed in range(50):
            s = random_mps(6, 3, 100 + seed)
            c = canonicalize(s, seed % 6)
            assert abs(abs(inner_product(s, c)) - 1.0) < 1e-10

    def test_center_out_of_range(self):
        with pytest.raises(SiteRangeError):
            canonicalize(MPSState.zero_state(4), 4)

    def test_incremental_center_moves_match_full(self):
        s = random_mps(10, 6, 5)
        a = canonicalize(canonicalize(s, 7), 2)
        b = canonicalize(s, 2)
        assert abs(abs(inner_product(a, b)) - 1.0) < 1e-12
        for k, r in enumerate(isometry_residuals(a)):
            if k != 2:
                assert r < 1e-10


class TestTruncation:
    def test_spectrum_budget(self):
        s = np.array([0.9, 0.4, 0.1, 0.05, 0.01])
        s = s / np.linalg.norm(s)
        keep, discarded = truncate_spectrum(s, TruncationPolicy(1e-3, None))
        assert discarded <= 1e-3
        assert np.sum(s[keep:] ** 2) <= 1e-3

    def test_max_bond_enforced(self):
        s = np.ones(8) / np.sqrt(8)
        keep, discarded = truncate_spectrum(s, TruncationPolicy(0.0, 3))
        assert keep == 3

    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_budget_property(self, seed):
        rng = np.random.default_rng(seed)
        spec = np.sort(rng.uniform(0, 1, size=10))[::-1]
        spec = spec / np.linalg.norm(spec)
        thr = float(rng.uniform(0, 0.2))
        keep, discarded = truncate_spectrum(spec, TruncationPolicy(thr, None))
        assert discarded <= thr + 1e-15
        assert keep >= 1


class TestGateApplication:
    def test_identity_two_site(self):
        s = random_mps(6, 3, 6)
        out = apply_two_site_gate(s, 2, np.eye(4, dtype=complex), EXACT)
        assert abs(fidelity(out, s) - 1.0) < 1e-12

    def test_cnot_makes_bell_pair(self):
        plus = np.array([1, 1]) / np.sqrt(2)
        zero = np.array([1, 0])
        s = MPSState.product_state([plus, zero])
        out = apply_two_site_gate(s, 0, CNOT_MATRIX, EXACT)
        assert out.max_bond() == 2
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        assert abs(abs(np.vdot(out.to_dense(), bell)) - 1.0) < 1e-12

    def test_random_su4_matches_dense(self, rng):
        from mpsaqc.oracle import apply_dense_gate

        s = random_mps(8, 4, 7)
        u = random_unitary(4, rng)
        out = apply_two_site_gate(s, 3, u, EXACT)
        dense = apply_dense_gate(s.to_dense(), (3, 4), u, 8)
        f = abs(np.vdot(out.to_dense(), dense)) ** 2
        assert f >= 1.0 - 1e-9

    def test_single_site_x(self):
        s = MPSState.zero_state(5)
        out = apply_single_site_gate(s, 2, PAULI_X)
        assert abs(out.to_dense()[0b00100] - 1.0) < 1e-12

    def test_z_on_zero_unchanged(self):
        s = MPSState.zero_state(3)
        out = apply_single_site_gate(s, 1, PAULI_Z)
        assert abs(fidelity(out, s) - 1.0) < 1e-12

    def test_nonunitary_rejected(self):
        from mpsaqc.errors import NonUnitaryError

        with pytest.raises(NonUnitaryError):
            apply_single_site_gate(MPSState.zero_state(2), 0,
                                   np.array([[1, 0], [0, 2]], dtype=complex))


class TestCompress:
    def test_product_state_chi1(self):
        s = MPSState.basis_state([0, 1, 1, 0])
        out, fid = compress(s, 1)
        assert abs(fid - 1.0) < 1e-12

    def test_variational_not_worse_than_svd(self):
        s = random_mps(8, 8, 8)
        _, f_svd = compress(s, 2, method="svd")
        _, f_var = compress(s, 2, method="variational")
        assert f_var >= f_svd - 1e-9

    def test_unbounded_is_identity(self):
        s = random_mps(8, 4, 9)
        out, fid = compress(s, 64)
        assert fid >= 1.0 - 1e-12

    def test_variational_fixed_point(self):
        s = random_mps(8, 8, 10)
        out1, f1 = compress(s, 2, method="variational")
        # re-running from the previous output should not improve further
        out2, f2 = compress(s, 2, method="variational")
        assert abs(f1 - f2) < 1e-6


class TestObservables:
    def test_sz_on_zero(self):
        assert abs(expectation_sz(MPSState.zero_state(3), 0) - 0.5) < 1e-12

    def test_sz_on_plus(self):
        plus = np.array([1, 1]) / np.sqrt(2)
        s = MPSState.product_state([plus, plus])
        assert abs(expectation_sz(s, 0)) < 1e-12

    def test_sz_matches_dense(self):
        s = random_mps(8, 4, 11)
        vec = s.to_dense()
        k = 3
        signs = np.array([0.5 if not (n >> k) & 1 else -0.5 for n in range(len(vec))])
        want = float(np.sum(signs * np.abs(vec) ** 2))
        assert abs(expectation_sz(s, k) - want) < 1e-10

    def test_correlation_product_state_zero(self):
        s = MPSState.basis_state([0, 1, 0, 1])
        assert abs(two_site_correlation(s, 0, 3)) < 1e-12

    def test_correlation_bell_pair(self):
        plus = np.array([1, 1]) / np.sqrt(2)
        zero = np.array([1, 0])
        s = MPSState.product_state([plus, zero])
        bell = apply_two_site_gate(s, 0, CNOT_MATRIX, EXACT)
        assert abs(two_site_correlation(bell, 0, 1) - 0.25) < 1e-12

    def test_correlation_diagonal_rejected(self):
        with pytest.raises(SiteRangeError):
            two_site_correlation(MPSState.zero_state(4), 2, 2)

    def test_gauge_invariance(self):
        s = random_mps(8, 4, 12)
        c = canonicalize(s, 5)
        assert abs(expectation_sz(s, 2) - expectation_sz(c, 2)) < 1e-10
        assert abs(two_site_correlation(s, 1, 6) - two_site_correlation(c, 1, 6)) < 1e-10


class TestMPO:
    def test_neel_energy_classical(self):
        from mpsaqc.physics import XXZParams, neel_state, xxz_mpo

        L, jz = 6, 2.5
        h = xxz_mpo(XXZParams(L, jz, 0.0))
        e = mpo_expectation(neel_state(L), h)
        assert abs(e - jz * (L - 1) * (-0.25)) < 1e-10

    def test_field_energy_on_zero(self):
        from mpsaqc.physics import XXZParams, xxz_mpo

        L, hz = 5, 0.7
        h = xxz_mpo(XXZParams(L, 0.0, hz))
        e = mpo_expectation(MPSState.zero_state(L), h)
        assert abs(e - (-hz * L / 2)) < 1e-10

    def test_expectation_matches_dense(self):
        from mpsaqc.physics import XXZParams, xxz_mpo
        from mpsaqc.oracle import dense_xxz_hamiltonian

        p = XXZParams(6, 2.5, 0.3)
        h = xxz_mpo(p)
        s = random_mps(6, 4, 13)
        vec = s.to_dense()
        want = float(np.real(np.vdot(vec, dense_xxz_hamiltonian(p) @ vec)))
        assert abs(mpo_expectation(s, h) - want) < 1e-8


class TestSerialization:
    def test_round_trip(self, tmp_path):
        s = random_mps(6, 4, 14)
        path = str(tmp_path / "state.json")
        save_mps(s, path)
        back = load_mps(path)
        assert abs(fidelity(s, back) - 1.0) < 1e-12

    def test_json_dict_shape_validation(self):
        s = random_mps(4, 2, 15)
        d = mps_to_json_dict(s)
        d["tensors"][1]["shape"] = [3, 2, 2]
        with pytest.raises(DimensionMismatchError):
            mps_from_json_dict(d)

    def test_format_fields(self):
        s = random_mps(3, 2, 16)
        d = json.loads(json.dumps(mps_to_json_dict(s)))
        assert d["length"] == 3
        assert all({"shape", "re", "im"} <= set(t) for t in d["tensors"])


@given(st.integers(min_value=0, max_value=2 ** 31 - 1),
       st.integers(min_value=2, max_value=8))
@settings(max_examples=25, deadline=None)
def test_canonicalize_preserves_overlap_property(seed, length):
    s = random_mps(length, 4, seed)
    center = seed % length
    c = canonicalize(s, center)
    assert abs(abs(inner_product(s, c)) - 1.0) < 1e-10
    assert c.canonical_center == center
