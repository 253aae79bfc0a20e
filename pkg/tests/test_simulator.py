"""MPS simulator tests: dense-oracle equivalence, unitarity, gate
commutation, and prefix caching."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpsaqc.circuits import Circuit, Gate
from mpsaqc.errors import DimensionMismatchError
from mpsaqc.oracle import dense_simulate, state_fidelity
from mpsaqc.simulator import SimulationContext, evaluate_with_cache, simulate
from mpsaqc.tensor import EXACT, MPSState, TruncationPolicy, fidelity, inner_product

from conftest import random_circuit, random_mps, random_unitary


class TestSimulate:
    def test_empty_circuit(self):
        out = simulate(Circuit(5))
        assert out.bond_dims() == [1] * 4
        assert abs(out.to_dense()[0] - 1.0) < 1e-12

    def test_single_layer_bond_bound(self, rng):
        L = 50
        c = Circuit(L)
        for i in list(range(0, L - 1, 2)) + list(range(1, L - 1, 2)):
            c.append(Gate("U2", (i, i + 1), (), random_unitary(4, rng)))
        out = simulate(c, policy=EXACT)
        assert out.max_bond() <= 4

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        c = random_circuit(10, 30, rng)
        mps = simulate(c, policy=TruncationPolicy(0.0, None))
        dense = dense_simulate(c)
        f = abs(np.vdot(mps.to_dense(), dense)) ** 2
        assert f >= 1.0 - 1e-9

    def test_threshold_zero_preserves_norm(self, rng):
        c = random_circuit(8, 40, rng)
        out = simulate(c, policy=TruncationPolicy(0.0, None))
        assert abs(out.norm() - 1.0) < 1e-10

    def test_disjoint_gates_commute(self, rng):
        u1 = random_unitary(4, rng)
        u2 = random_unitary(4, rng)
        init = random_mps(6, 3, 17)
        a = simulate(Circuit(6, [Gate("U2", (0, 1), (), u1),
                                 Gate("U2", (3, 4), (), u2)]), init=init)
        b = simulate(Circuit(6, [Gate("U2", (3, 4), (), u2),
                                 Gate("U2", (0, 1), (), u1)]), init=init)
        assert abs(fidelity(a, b) - 1.0) < 1e-12

    def test_init_width_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            simulate(Circuit(4), init=MPSState.zero_state(3))

    def test_attached_initial_state(self):
        init = random_mps(4, 2, 18)
        c = Circuit(4, [], initial_state_tag="mps", initial_state=init)
        out = simulate(c)
        assert abs(fidelity(out, init) - 1.0) < 1e-12


class TestCaching:
    def test_cache_only_returns_cached(self):
        s = random_mps(5, 3, 19)
        ctx = SimulationContext(cached_state=s)
        out = evaluate_with_cache(ctx)
        assert abs(fidelity(out, s) - 1.0) < 1e-12

    def test_cached_equals_uncached(self, rng):
        policy = TruncationPolicy(1e-6, None)
        prefix = random_circuit(6, 10, rng)
        suffix = random_circuit(6, 10, rng)
        full = simulate(prefix + suffix, policy=policy)
        ctx = SimulationContext(cached_state=simulate(prefix, policy=policy),
                                policy=policy)
        for g in suffix.gates:
            ctx.append(g)
        cached = evaluate_with_cache(ctx)
        assert abs(inner_product(full, cached) - 1.0) < 1e-10

    def test_extend_cache_matches_full(self, rng):
        policy = TruncationPolicy(1e-8, None)
        a = random_circuit(5, 8, rng)
        b = random_circuit(5, 8, rng)
        ctx = SimulationContext(cached_state=simulate(a, policy=policy),
                                policy=policy)
        ctx.extend_cache(b.gates)
        full = simulate(a + b, policy=policy)
        assert abs(inner_product(full, ctx.cached_state) - 1.0) < 1e-10


@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_simulate_deterministic(seed):
    rng1 = np.random.default_rng(seed)
    c = random_circuit(6, 15, rng1)
    a = simulate(c, policy=TruncationPolicy(1e-8, None))
    b = simulate(c, policy=TruncationPolicy(1e-8, None))
    for t1, t2 in zip(a.tensors, b.tensors):
        assert np.array_equal(t1, t2)
