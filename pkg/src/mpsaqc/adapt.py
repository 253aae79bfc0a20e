"""Adaptive-ansatz MPS preparation.

Grows a circuit block by block: each iteration picks the qubit pair with
the largest cost-gradient norm, inserts an identity-resolvable
R-CNOT-R-CNOT-R block there, fits its axes and angles with rotoselect,
then re-optimizes every block's angles with rotosolve sweeps until the
infidelity cost drops below the target epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .circuits import CNOT_MATRIX, Circuit, Gate, cnot_metrics, rotation_matrix
from .errors import SiteRangeError
from .simulator import _apply_gate
from .tensor import (
    MPSState,
    TruncationPolicy,
    canonicalize,
    fidelity,
    inner_product,
)

PAULIS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
AXES = ("X", "Y", "Z")


@dataclass
class AnsatzBlock:
    """R-CNOT-R-CNOT-R two-qubit block; identity at all-zero angles.

    Slot order: (rot i, rot j) before the first CNOT, (rot i, rot j)
    between the CNOTs, (rot i, rot j) after the second. The CNOT control
    is the lower qubit index.
    """

    qubit_pair: tuple[int, int]
    axes: list[str] = field(default_factory=lambda: ["Z"] * 6)
    angles: list[float] = field(default_factory=lambda: [0.0] * 6)

    def __post_init__(self):
        i, j = self.qubit_pair
        if i == j:
            raise SiteRangeError("block qubits must differ")
        if i > j:
            raise SiteRangeError("block pair must be ordered (low, high)")
        if len(self.axes) != 6 or len(self.angles) != 6:
            raise ValueError("block has exactly 6 rotation slots")

    def matrix(self) -> np.ndarray:
        """4x4 unitary with the lower qubit as the most significant bit."""
        return _block_matrix(self.axes, self.angles)

    def copy(self) -> "AnsatzBlock":
        return AnsatzBlock(self.qubit_pair, list(self.axes), list(self.angles))


def _kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fast 2x2 (x) 2x2 Kronecker product (np.kron is slow at this size)."""
    out = np.empty((4, 4), dtype=complex)
    out[:2, :2] = a[0, 0] * b
    out[:2, 2:] = a[0, 1] * b
    out[2:, :2] = a[1, 0] * b
    out[2:, 2:] = a[1, 1] * b
    return out


def _block_matrix(axes, angles) -> np.ndarray:
    def layer(k):
        return _kron2(rotation_matrix(axes[k], angles[k]),
                      rotation_matrix(axes[k + 1], angles[k + 1]))

    return layer(4) @ CNOT_MATRIX @ layer(2) @ CNOT_MATRIX @ layer(0)


@dataclass
class AdaptConfig:
    epsilon: float = 0.01
    rotosolve_frequency: int = 1
    rotoselect_tol: float = 1e-5
    rotosolve_tol: float = 1e-3
    coupling: str = "nearest-neighbour"  # or "all-to-all"
    starting_circuit: str = "chi1"  # "chi1" | "none"
    sim_threshold: float = 1e-6
    max_blocks: int | None = None  # default 5 * L
    growth: str = "rounds"  # "rounds" | "per-block"
    max_rounds: int = 12
    polish_maxiter: int = 60

    def __post_init__(self):
        if min(self.rotoselect_tol, self.rotosolve_tol, self.epsilon) <= 0:
            raise ValueError("tolerances must be positive")
        if self.coupling not in ("nearest-neighbour", "all-to-all"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.growth not in ("rounds", "per-block"):
            raise ValueError(f"unknown growth mode {self.growth!r}")


@dataclass
class CompilationResult:
    circuit: Circuit
    fidelity: float
    cnot_depth: int
    cnot_count: int
    cost_trace: list
    blocks_added: int
    converged: bool = True


def operator_gradient(block: AnsatzBlock, i: int) -> np.ndarray:
    """Pauli insertion at slot i, conjugated by the block's CNOT tail.

    Returns the 4x4 operator G_i with dB/dtheta_i = -(i/2) * G_i * B
    evaluated at all-zero angles (where B = identity).
    """
    if not 0 <= i < 6:
        raise SiteRangeError(f"slot {i} out of range")
    p = PAULIS[block.axes[i]]
    op = np.kron(p, np.eye(2)) if i % 2 == 0 else np.kron(np.eye(2), p)
    if i in (2, 3):
        op = CNOT_MATRIX @ op @ CNOT_MATRIX
    return op


def _cross_expectation(bra: MPSState, ket: MPSState, ops: dict[int, np.ndarray]) -> complex:
    """<bra| (product of single-site ops) |ket> with log-scale folded in."""
    env = np.ones((1, 1), dtype=complex)
    log10 = (bra.norm_log + ket.norm_log) / np.log(10)
    for k in range(bra.length):
        kt = ket.tensors[k]
        if k in ops:
            kt = np.einsum("ij,ajb->aib", ops[k], kt)
        env = np.einsum("ab,aic,bid->cd", env, np.conj(bra.tensors[k]), kt)
        sc = np.abs(env).max()
        if sc > 0 and (sc > 1e100 or sc < 1e-100):
            env /= sc
            log10 += np.log10(sc)
    return complex(env[0, 0]) * 10 ** log10


def cost_gradient_at_zero(candidate: AnsatzBlock, psi: MPSState, s: MPSState) -> np.ndarray:
    """dC/dtheta at all-zero angles for C = 1 - |<s| B |psi>|^2.

    With half-angle rotations each component is -Im(<s|G_i|psi><psi|s>).
    """
    i, j = candidate.qubit_pair
    overlap = inner_product(s, psi)  # <s|psi>, block = identity at zero
    grad = np.zeros(6)
    cache: dict[str, complex] = {}
    for slot in range(6):
        g = operator_gradient(candidate, slot)
        key = _op_key(candidate, slot)
        if key not in cache:
            cache[key] = _cross_expectation(s, psi, _embed_ops(g, i, j))
        grad[slot] = -np.imag(cache[key] * np.conj(overlap))
    return grad


def _op_key(block: AnsatzBlock, slot: int) -> str:
    wire = "i" if slot % 2 == 0 else "j"
    mid = "c" if slot in (2, 3) else ""
    return block.axes[slot] + wire + mid


def _embed_ops(g: np.ndarray, i: int, j: int) -> dict[int, np.ndarray]:
    """Split a 4x4 operator that factorizes over the pair into site ops."""
    # operator_gradient outputs are tensor products of Paulis/identity
    a, b = _factor_two_qubit(g)
    ops = {}
    if not np.allclose(a, np.eye(2)):
        ops[i] = a
    if not np.allclose(b, np.eye(2)):
        ops[j] = b
    if not ops:
        ops[i] = a  # identity insertion, keep a well-defined contraction
    return ops


def _factor_two_qubit(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split g = a (x) b, valid for tensor-product operators."""
    r, c = np.unravel_index(np.argmax(np.abs(g)), g.shape)
    i0, k0 = divmod(r, 2)
    j0, l0 = divmod(c, 2)
    b = g[2 * i0: 2 * i0 + 2, 2 * j0: 2 * j0 + 2]
    b = b / b[k0, l0]
    a = np.array([[g[2 * ii + k0, 2 * jj + l0] for jj in range(2)]
                  for ii in range(2)], dtype=complex)
    return a, b


def candidate_pairs(L: int, coupling: str) -> list[tuple[int, int]]:
    if coupling == "all-to-all":
        return list(combinations(range(L), 2))
    return [(k, k + 1) for k in range(L - 1)]


def select_pair(psi: MPSState, s: MPSState, cfg: AdaptConfig,
                forbidden: set) -> tuple[tuple[int, int], float]:
    """Pair with the largest gradient norm among allowed candidates."""
    pairs = [p for p in candidate_pairs(psi.length, cfg.coupling) if p not in forbidden]
    if not pairs:
        raise SiteRangeError("no allowed qubit pairs")
    best, best_norm = pairs[0], -1.0
    for p in pairs:
        g = cost_gradient_at_zero(AnsatzBlock(p), psi, s)
        n = float(np.linalg.norm(g))
        if n > best_norm + 1e-15:
            best, best_norm = p, n
    return best, best_norm


# -- closed-form sinusoidal optimization --------------------------------


def _rotosolve_angle(c0: float, cp: float, cm: float, theta0: float) -> tuple[float, float]:
    """Minimizer and minimum of the sinusoid through C(theta0), C(+-pi/2 offsets)."""
    b = 0.5 * (cp - cm)
    a = c0 - 0.5 * (cp + cm)
    theta = theta0 - np.pi / 2 - np.arctan2(2 * c0 - cp - cm, cp - cm)
    mean = 0.5 * (cp + cm)
    amp = np.hypot(a, b)
    return _wrap_angle(theta), mean - amp


def _wrap_angle(t: float) -> float:
    return float((t + np.pi) % (2 * np.pi) - np.pi)


class _PairEvaluator:
    """Cost of the full echo as a function of one block's unitary.

    Contracts everything except the block into a 4x4 environment, so
    single-angle cost evaluations are O(1).
    """

    def __init__(self, bra: MPSState, ket: MPSState, pair: tuple[int, int]):
        self.pair = pair
        i, j = pair
        if j == i + 1:
            self.env = _adjacent_pair_env(bra, ket, i)
        else:
            self.env = _distant_pair_env(bra, ket, i, j)

    def overlap(self, block_matrix: np.ndarray) -> complex:
        return complex(np.sum(block_matrix * self.env))

    def cost(self, axes, angles) -> float:
        return 1.0 - abs(self.overlap(_block_matrix(axes, angles))) ** 2


def _adjacent_pair_env(bra: MPSState, ket: MPSState, i: int) -> np.ndarray:
    L = bra.length
    left = np.ones((1, 1), dtype=complex)
    for k in range(i):
        left = np.einsum("ab,aic,bid->cd", left, np.conj(bra.tensors[k]), ket.tensors[k])
    right = np.ones((1, 1), dtype=complex)
    for k in range(L - 1, i + 1, -1):
        right = np.einsum("cd,aic,bid->ab", right, np.conj(bra.tensors[k]), ket.tensors[k])
    bb = np.tensordot(np.conj(bra.tensors[i]), np.conj(bra.tensors[i + 1]), axes=[[2], [0]])
    kk = np.tensordot(ket.tensors[i], ket.tensors[i + 1], axes=[[2], [0]])
    env = np.einsum("ab,axyc,bzwd,cd->xyzw", left, bb, kk, right)
    return env.reshape(4, 4) * np.exp(bra.norm_log + ket.norm_log)


def _distant_pair_env(bra: MPSState, ket: MPSState, i: int, j: int) -> np.ndarray:
    env = np.zeros((4, 4), dtype=complex)
    basis = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
    for n in range(4):
        basis[n][n // 2, n % 2] = 1.0  # |row><col|
    for xi in range(2):
        for yi in range(2):
            for xj in range(2):
                for yj in range(2):
                    ops = {i: basis[xi * 2 + yi], j: basis[xj * 2 + yj]}
                    env[xi * 2 + xj, yi * 2 + yj] = _cross_expectation(bra, ket, ops)
    return env


def _slot_window(blk: AnsatzBlock, env: np.ndarray, slot: int):
    """Reduce the overlap to a function of one rotation slot.

    Returns (cost_at, fixed_side) where cost_at(theta) evaluates the full
    echo cost with only ``slot`` varied: overlap = Tr(K(theta) @ W) for a
    precomputed 4x4 window W, with K the slot's rotation layer.
    """
    m = (slot // 2) * 2  # rotation layer containing the slot: 0, 2, 4

    def layer(k):
        return _kron2(rotation_matrix(blk.axes[k], blk.angles[k]),
                      rotation_matrix(blk.axes[k + 1], blk.angles[k + 1]))

    if m == 0:
        prefix = layer(4) @ CNOT_MATRIX @ layer(2) @ CNOT_MATRIX
        w = env.T @ prefix
    elif m == 2:
        prefix = layer(4) @ CNOT_MATRIX
        w = CNOT_MATRIX @ layer(0) @ env.T @ prefix
    else:
        w = CNOT_MATRIX @ layer(2) @ CNOT_MATRIX @ layer(0) @ env.T
    partner = slot + 1 if slot % 2 == 0 else slot - 1
    fixed = rotation_matrix(blk.axes[partner], blk.angles[partner])
    on_i = slot % 2 == 0

    def cost_at(axis: str, theta: float) -> float:
        r = rotation_matrix(axis, theta)
        k = _kron2(r, fixed) if on_i else _kron2(fixed, r)
        return 1.0 - abs(np.sum(k * w.T)) ** 2

    return cost_at


def rotoselect(block: AnsatzBlock, ev: _PairEvaluator, tol: float) -> AnsatzBlock:
    """Joint axis+angle sweep with closed-form per-parameter minimization."""
    blk = block.copy()
    cost = ev.cost(blk.axes, blk.angles)
    while True:
        before = cost
        for slot in range(6):
            cost_at = _slot_window(blk, ev.env, slot)
            theta0 = blk.angles[slot]
            best = (cost, blk.axes[slot], blk.angles[slot])
            for axis in AXES:
                c0 = cost_at(axis, theta0)
                cp = cost_at(axis, theta0 + np.pi / 2)
                cm = cost_at(axis, theta0 - np.pi / 2)
                theta, cmin = _rotosolve_angle(c0, cp, cm, theta0)
                if cmin < best[0] - 1e-15:
                    best = (cmin, axis, theta)
            cost = best[0]
            blk.axes[slot] = best[1]
            blk.angles[slot] = best[2]
        if before - cost < tol:
            return blk


# -- stall recovery ------------------------------------------------------
#
# Gradient selection and cost-based rotoselect go blind when the residual
# of the echo state is misaligned with the product bra on three or more
# sites: every two-qubit move is then cost-flat to first order. The
# expected misalignment count E = sum_k <psi|(1 - |s_k><s_k|)|psi> still
# has local structure in that regime, so when per-block cost progress
# stagnates we fit blocks that minimize E instead until progress resumes.

STALL_RELATIVE_IMPROVEMENT = 0.02


def _product_factors(s: MPSState) -> list[np.ndarray]:
    """Local state vectors of a bond-dimension-1 (product) MPS."""
    if s.max_bond() != 1:
        raise DimensionMismatchError("bra state must be a product state")
    out = []
    for t in s.tensors:
        v = t[0, :, 0]
        out.append(v / np.linalg.norm(v))
    return out


def _pair_density(psi: MPSState, i: int) -> np.ndarray:
    """Normalized two-site reduced density matrix on sites (i, i+1)."""
    st = canonicalize(psi, i)
    th = np.tensordot(st.tensors[i], st.tensors[i + 1], axes=[[2], [0]])
    rho = np.einsum("lxyr,lzwr->xyzw", th, np.conj(th)).reshape(4, 4)
    return rho / np.real(np.trace(rho))


def _misalignment_operator(svecs: list, i: int) -> np.ndarray:
    """Misaligned-site counter restricted to the pair (i, i+1)."""
    pi = np.eye(2) - np.outer(svecs[i], np.conj(svecs[i]))
    pj = np.eye(2) - np.outer(svecs[i + 1], np.conj(svecs[i + 1]))
    return _kron2(pi, np.eye(2, dtype=complex)) + _kron2(np.eye(2, dtype=complex), pj)


class _MisalignmentEvaluator:
    """E restricted to one pair as a function of the block unitary."""

    def __init__(self, rho: np.ndarray, m: np.ndarray):
        self.rho = rho
        self.m = m

    def cost(self, axes, angles) -> float:
        b = _block_matrix(axes, angles)
        return float(np.real(np.trace(self.m @ b @ self.rho @ b.conj().T)))


def _select_pair_misaligned(psi: MPSState, svecs: list,
                            forbidden: set) -> tuple[tuple[int, int], float]:
    """Adjacent pair with the largest achievable decrease of E.

    The bound pairs the eigenvalues of the two-site density matrix
    (descending) with those of the misalignment counter (ascending),
    which any unitary can achieve.
    """
    best = None
    m_eigs = np.array([0.0, 1.0, 1.0, 2.0])
    st = psi
    for i in range(psi.length - 1):
        st = canonicalize(st, i)
        pair = (i, i + 1)
        if pair in forbidden:
            continue
        th = np.tensordot(st.tensors[i], st.tensors[i + 1], axes=[[2], [0]])
        rho = np.einsum("lxyr,lzwr->xyzw", th, np.conj(th)).reshape(4, 4)
        rho = rho / np.real(np.trace(rho))
        m = _misalignment_operator(svecs, i)
        current = float(np.real(np.trace(m @ rho)))
        bound = float(np.linalg.eigvalsh(rho)[::-1] @ m_eigs)
        gain = current - bound
        if best is None or gain > best[1] + 1e-15:
            best = (pair, gain, rho, m)
    if best is None:
        raise SiteRangeError("no allowed qubit pairs")
    return best


def _rotoselect_misaligned(pair: tuple[int, int], rho: np.ndarray, m: np.ndarray,
                           tol: float) -> AnsatzBlock:
    """Rotoselect a block minimizing the pair-restricted E.

    E is quadratic in the block, hence still an exact sinusoid in each
    rotation angle, so the same closed-form updates apply.
    """
    ev = _MisalignmentEvaluator(rho, m)
    blk = AnsatzBlock(pair)
    cost = ev.cost(blk.axes, blk.angles)
    while True:
        before = cost
        for slot in range(6):
            best = (cost, blk.axes[slot], blk.angles[slot])
            theta0 = blk.angles[slot]
            for axis in AXES:
                axes = list(blk.axes)
                axes[slot] = axis
                angles = list(blk.angles)

                def at(t):
                    angles[slot] = t
                    return ev.cost(axes, angles)

                theta, cmin = _rotosolve_angle(at(theta0), at(theta0 + np.pi / 2),
                                               at(theta0 - np.pi / 2), theta0)
                if cmin < best[0] - 1e-15:
                    best = (cmin, axis, theta)
            cost = best[0]
            blk.axes[slot] = best[1]
            blk.angles[slot] = best[2]
        if before - cost < tol:
            return blk


def rotosolve_block(block: AnsatzBlock, ev: _PairEvaluator) -> AnsatzBlock:
    """One angle sweep over a single block, axes fixed."""
    blk = block.copy()
    for slot in range(6):
        cost_at = _slot_window(blk, ev.env, slot)
        theta0 = blk.angles[slot]
        c0 = cost_at(blk.axes[slot], theta0)
        cp = cost_at(blk.axes[slot], theta0 + np.pi / 2)
        cm = cost_at(blk.axes[slot], theta0 - np.pi / 2)
        theta, _ = _rotosolve_angle(c0, cp, cm, theta0)
        blk.angles[slot] = theta
    return blk


class _EchoState:
    """Tracks psi_n = B_n ... B_1 |target> and the fixed bra state s."""

    def __init__(self, target: MPSState, s: MPSState, policy: TruncationPolicy):
        self.target = target
        self.s = s
        self.policy = policy
        self.blocks: list[AnsatzBlock] = []
        self.psi = target.copy()

    def apply_block(self, blk: AnsatzBlock, state: MPSState) -> MPSState:
        gate = Gate("U2", blk.qubit_pair, (), blk.matrix())
        return _apply_gate(state, gate, self.policy)

    def apply_block_inverse(self, blk: AnsatzBlock, state: MPSState) -> MPSState:
        gate = Gate("U2", blk.qubit_pair, (), blk.matrix().conj().T)
        return _apply_gate(state, gate, self.policy)

    def rebuild_psi(self) -> None:
        st = self.target.copy()
        for blk in self.blocks:
            st = self.apply_block(blk, st)
        self.psi = st

    def cost(self) -> float:
        return 1.0 - abs(inner_product(self.s, self.psi)) ** 2

    def rotosolve_sweep(self, tol: float) -> float:
        """Sweep all blocks with closed-form updates until stagnation."""
        n = len(self.blocks)
        if n == 0:
            return self.cost()
        cost = self.cost()
        while True:
            before = cost
            # forward pass: suffix bras fixed, prefix kets updated in place
            suffixes = [None] * (n + 1)
            suffixes[n] = self.s
            for k in range(n - 1, 0, -1):
                suffixes[k] = self.apply_block_inverse(self.blocks[k], suffixes[k + 1])
            prefixes = [self.target.copy()]
            for k in range(n):
                ev = _PairEvaluator(suffixes[k + 1], prefixes[-1], self.blocks[k].qubit_pair)
                self.blocks[k] = rotosolve_block(self.blocks[k], ev)
                prefixes.append(self.apply_block(self.blocks[k], prefixes[-1]))
            # backward pass: prefix kets fixed, suffix bras updated in place
            suffix = self.s
            for k in range(n - 1, -1, -1):
                ev = _PairEvaluator(suffix, prefixes[k], self.blocks[k].qubit_pair)
                self.blocks[k] = rotosolve_block(self.blocks[k], ev)
                suffix = self.apply_block_inverse(self.blocks[k], suffix)
            self.rebuild_psi()
            cost = self.cost()
            if before - cost < tol:
                return cost

    def polish(self, epsilon: float, maxiter: int = 2000) -> float:
        """Joint L-BFGS refinement of all block angles.

        Coordinate-wise sweeps can stall at points where no single-angle
        move helps; the joint quasi-Newton step escapes those. Requires
        nearest-neighbour pairs (falls back to the current cost otherwise).
        """
        import scipy.optimize

        from .aqctensor import sequence_cost_and_gradient

        n = len(self.blocks)
        pairs = [b.qubit_pair for b in self.blocks]
        if n == 0 or any(j != i + 1 for i, j in pairs):
            return self.cost()
        x0 = np.array([a for b in self.blocks for a in b.angles])

        class _Done(Exception):
            pass

        def fun(x):
            mats, ders = [], []
            for m, b in enumerate(self.blocks):
                b.angles = list(x[6 * m: 6 * m + 6])
                mm, dd = _block_matrix_and_derivs(b)
                mats.append(mm)
                ders.append(dd)
            cost, grads = sequence_cost_and_gradient(
                self.target, self.s, pairs, mats, ders, self.policy)
            if cost <= epsilon:
                raise _Done
            return cost, np.concatenate([np.asarray(g) for g in grads])

        try:
            res = scipy.optimize.minimize(
                fun, x0, jac=True, method="L-BFGS-B",
                options={"maxiter": maxiter, "ftol": 1e-14, "gtol": 1e-10})
            x = res.x
        except _Done:
            x = np.array([a for b in self.blocks for a in b.angles])
        for m, b in enumerate(self.blocks):
            b.angles = list(x[6 * m: 6 * m + 6])
        self.rebuild_psi()
        return self.cost()


def rotosolve_sweep(echo: _EchoState, tol: float) -> float:
    return echo.rotosolve_sweep(tol)


def _block_matrix_and_derivs(blk: AnsatzBlock) -> tuple[np.ndarray, list]:
    """Block unitary plus dB/dtheta_k for each of the six rotation slots."""
    lay = [_kron2(rotation_matrix(blk.axes[2 * h], blk.angles[2 * h]),
                  rotation_matrix(blk.axes[2 * h + 1], blk.angles[2 * h + 1]))
           for h in range(3)]
    b = lay[2] @ CNOT_MATRIX @ lay[1] @ CNOT_MATRIX @ lay[0]
    eye = np.eye(2)
    derivs = []
    for k in range(6):
        p = PAULIS[blk.axes[k]]
        ins = _kron2(p, eye) if k % 2 == 0 else _kron2(eye, p)
        parts = list(lay)
        parts[k // 2] = -0.5j * (ins @ parts[k // 2])
        derivs.append(parts[2] @ CNOT_MATRIX @ parts[1] @ CNOT_MATRIX @ parts[0])
    return b, derivs


def compile(target: MPSState, cfg: AdaptConfig | None = None,
            starting_layer: list | None = None) -> CompilationResult:
    """Adaptive compilation of the target MPS into a two-qubit-block circuit."""
    cfg = cfg or AdaptConfig()
    target = target.normalized()
    L = target.length
    max_blocks = cfg.max_blocks if cfg.max_blocks is not None else 5 * L
    policy = TruncationPolicy(cfg.sim_threshold, None)

    if starting_layer is not None:
        layer = starting_layer
    elif cfg.starting_circuit == "chi1":
        from .aqctensor import chi1_initialize

        layer, _ = chi1_initialize(target)
    else:
        layer = [np.eye(2, dtype=complex) for _ in range(L)]
    s = MPSState.zero_state(L)
    for q, u in enumerate(layer):
        s = _apply_gate(s, Gate("U1", (q,), (), u), policy)

    def grow(prefer_misaligned: bool) -> tuple[_EchoState, list, bool]:
        echo = _EchoState(target, s, policy)
        svecs = _product_factors(s)
        trace = [(0, echo.cost())]
        forbidden: set = set()
        stalled = False

        def add_and_optimize(blk: AnsatzBlock) -> float:
            echo.blocks.append(blk)
            echo.psi = echo.apply_block(blk, echo.psi)
            if cfg.rotosolve_frequency and len(echo.blocks) % cfg.rotosolve_frequency == 0:
                return echo.rotosolve_sweep(cfg.rotosolve_tol)
            return echo.cost()

        while trace[-1][1] > cfg.epsilon and len(echo.blocks) < max_blocks:
            prev_cost = trace[-1][1]
            pair, _norm = select_pair(echo.psi, s, cfg, forbidden)
            blk = AnsatzBlock(pair)
            ev = _PairEvaluator(s, echo.psi, pair)
            blk = rotoselect(blk, ev, cfg.rotoselect_tol)
            if stalled and cfg.coupling == "nearest-neighbour":
                # cost progress has gone locally flat: also fit a candidate
                # that minimizes the misalignment count, keep the better one
                saved_blocks = [b.copy() for b in echo.blocks]
                saved_psi = echo.psi
                cost_std = add_and_optimize(blk)
                std_blocks, std_psi = echo.blocks, echo.psi
                echo.blocks = saved_blocks
                echo.psi = saved_psi
                e_pair, _gain, rho, m = _select_pair_misaligned(echo.psi, svecs, forbidden)
                e_blk = _rotoselect_misaligned(e_pair, rho, m, cfg.rotoselect_tol)
                cost_e = add_and_optimize(e_blk)
                # slack credits the misalignment move's compounding gains
                slack = STALL_RELATIVE_IMPROVEMENT * prev_cost if prefer_misaligned else 0.0
                if cost_std < cost_e - slack:
                    echo.blocks = std_blocks
                    echo.psi = std_psi
                    cost = cost_std
                else:
                    cost = cost_e
                    pair = e_pair
            else:
                cost = add_and_optimize(blk)
            forbidden = {pair}
            improvement = prev_cost - cost
            stalled = improvement < STALL_RELATIVE_IMPROVEMENT * cost
            trace.append((len(echo.blocks), cost))
        return echo, trace, trace[-1][1] <= cfg.epsilon

    def grow_rounds() -> tuple[_EchoState, list, bool]:
        # round-based growth: each round adds identity-resolvable blocks
        # on every pair whose zero-angle gradient is non-negligible,
        # applied in parity order (even-start pairs first) so the CNOT
        # depth grows by ~4 per round, then jointly refines all angles
        echo = _EchoState(target, s, policy)
        trace = [(0, echo.cost())]
        prev = trace[-1][1]
        for _ in range(cfg.max_rounds):
            if prev <= cfg.epsilon or len(echo.blocks) >= max_blocks:
                break
            norms = {}
            for p in candidate_pairs(L, cfg.coupling):
                # probe all three uniform-axis blocks: a single axis can
                # have an identically zero gradient on symmetric states
                norms[p] = float(np.linalg.norm([
                    np.linalg.norm(cost_gradient_at_zero(
                        AnsatzBlock(p, axes=[ax] * 6), echo.psi, s))
                    for ax in AXES]))
            top = max(norms.values())
            if top < 1e-12:
                break
            chosen = [p for p in norms if norms[p] >= 0.01 * top]
            chosen.sort(key=lambda p: (p[0] % 2, p[0]))
            for pair in chosen[: max_blocks - len(echo.blocks)]:
                blk = AnsatzBlock(pair)
                ev = _PairEvaluator(s, echo.psi, pair)
                blk = rotoselect(blk, ev, cfg.rotoselect_tol)
                echo.blocks.append(blk)
                echo.psi = echo.apply_block(blk, echo.psi)
            cost = echo.polish(cfg.epsilon, maxiter=cfg.polish_maxiter)
            trace.append((len(echo.blocks), cost))
            if prev - cost < 1e-4 * prev:  # stalled
                prev = cost
                break
            prev = cost
        return echo, trace, trace[-1][1] <= cfg.epsilon

    if cfg.growth == "rounds" and cfg.coupling == "nearest-neighbour":
        echo, trace, converged = grow_rounds()
    else:
        echo, trace, converged = grow(prefer_misaligned=False)
        if not converged and cfg.coupling == "nearest-neighbour":
            echo2, trace2, converged2 = grow(prefer_misaligned=True)
            if trace2[-1][1] < trace[-1][1]:
                echo, trace, converged = echo2, trace2, converged2

    circ = Circuit(L)
    for q, u in enumerate(layer):
        circ.append(Gate("U1", (q,), (), u))
    for blk in reversed(echo.blocks):
        circ.extend(_block_gates_inverse(blk))
    from .simulator import simulate

    prepared = simulate(circ, policy=policy)
    fid = fidelity(prepared, target)
    metrics = cnot_metrics(circ)
    return CompilationResult(circuit=circ, fidelity=fid,
                             cnot_depth=metrics["depth"], cnot_count=metrics["count"],
                             cost_trace=trace, blocks_added=len(echo.blocks),
                             converged=converged)


def _block_gates_inverse(blk: AnsatzBlock) -> list[Gate]:
    """Gate list for the inverse of a block (still R-CNOT-R-CNOT-R shaped)."""
    i, j = blk.qubit_pair
    gates = []

    def rot(slot, angle):
        q = i if slot % 2 == 0 else j
        gates.append(Gate("R" + blk.axes[slot], (q,), (angle,)))

    rot(4, -blk.angles[4])
    rot(5, -blk.angles[5])
    gates.append(Gate("CNOT", (i, j)))
    rot(2, -blk.angles[2])
    rot(3, -blk.angles[3])
    gates.append(Gate("CNOT", (i, j)))
    rot(0, -blk.angles[0])
    rot(1, -blk.angles[1])
    return gates
