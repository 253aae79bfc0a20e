"""XXZ spin-chain layer: Hamiltonian MPO, DMRG ground states, Trotterized
quench circuits, TEBD reference dynamics, and magnetization observables.

The Hamiltonian is
    H = sum_i (Sx_i Sx_{i+1} + Sy_i Sy_{i+1} + J_z Sz_i Sz_{i+1}) - h_z sum_i Sz_i
with S = sigma / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .circuits import Circuit, Gate
from .errors import ConvergenceError, DimensionMismatchError
from .tensor import (
    MPOOperator,
    MPSState,
    TruncationPolicy,
    canonicalize,
    expectation_sz,
    mpo_expectation,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.diag([0.5, -0.5]).astype(complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class XXZParams:
    L: int
    J_z: float
    h_z: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least 2 sites")


@dataclass(frozen=True)
class QuenchSpec:
    ground_params: XXZParams
    quench_params: XXZParams
    dt: float = 1.0
    n_steps: int = 5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.ground_params.L != self.quench_params.L:
            raise DimensionMismatchError("quench must act on the same chain length")


@dataclass
class DmrgConfig:
    truncation_cutoff: float = 1e-4  # singular values below this (relative) are dropped
    max_bond: int = 100
    max_sweeps: int = 10
    mixer: bool = True
    energy_tol: float = 1e-10
    seed: int = 7

    def __post_init__(self):
        if self.truncation_cutoff <= 0:
            raise ValueError("cutoff must be positive")


def xxz_mpo(p: XXZParams) -> MPOOperator:
    """Bond-dimension-5 MPO for the open XXZ chain."""
    w = np.zeros((5, 2, 2, 5), dtype=complex)
    w[0, :, :, 0] = ID2
    w[0, :, :, 1] = SX
    w[0, :, :, 2] = SY
    w[0, :, :, 3] = SZ
    w[0, :, :, 4] = -p.h_z * SZ
    w[1, :, :, 4] = SX
    w[2, :, :, 4] = SY
    w[3, :, :, 4] = p.J_z * SZ
    w[4, :, :, 4] = ID2
    tensors = [w.copy() for _ in range(p.L)]
    tensors[0] = w[0:1, :, :, :].copy()
    tensors[-1] = w[:, :, :, 4:5].copy()
    op = MPOOperator(tensors)
    op.validate()
    return op


def neel_state(L: int) -> MPSState:
    """|up down up down ...> (site 0 = up = |0>)."""
    return MPSState.basis_state([k % 2 for k in range(L)])


def staggered_magnetization(s: MPSState) -> float:
    """(1/L) sum_i (-1)^i <S^z_i> with 1-based site numbering."""
    L = s.length
    st = canonicalize(s, 0)
    total = 0.0
    env = np.ones((1, 1), dtype=complex)
    # sweep the center along the chain so each local expectation is O(chi^3)
    for k in range(L):
        t = st.tensors[k]
        ket = np.einsum("ij,ajb->aib", SZ, t)
        tmp = np.tensordot(env, np.conj(t), axes=[[0], [0]])
        val = np.tensordot(tmp, ket, axes=[[0, 1], [0, 1]])
        nrm = np.tensordot(tmp, t, axes=[[0, 1], [0, 1]])
        sz_k = float((np.trace(val) / np.trace(nrm)).real) if k < L - 1 else float(
            (val[0, 0] / nrm[0, 0]).real)
        total += (-1) ** (k + 1) * sz_k
        env = np.tensordot(tmp, t, axes=[[0, 1], [0, 1]])
        # keep the environment well-scaled
        sc = np.abs(env).max()
        if sc > 0:
            env /= sc
    return total / L


def global_spin_flip(s: MPSState) -> MPSState:
    out = s.copy()
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    for k in range(out.length):
        out.tensors[k] = np.einsum("ij,ajb->aib", x, out.tensors[k])
    return out


# -- DMRG -------------------------------------------------------------


def _mpo_env_left(env, bra_t, w, ket_t):
    # env (bb, D, kb); returns environment including this site
    tmp = np.tensordot(env, np.conj(bra_t), axes=[[0], [0]])  # (D, kb, sb, br)
    tmp = np.tensordot(tmp, w, axes=[[0, 2], [0, 1]])  # (kb, br, sk, Dr)
    return np.tensordot(tmp, ket_t, axes=[[0, 2], [0, 1]])  # (br, Dr, kr)


def _mpo_env_right(env, bra_t, w, ket_t):
    # env (bb, D, kb) for sites to the right; absorb this site from the right
    tmp = np.tensordot(np.conj(bra_t), env, axes=[[2], [0]])  # (bl, sb, D, kb)
    tmp = np.tensordot(w, tmp, axes=[[3, 1], [2, 1]])  # (Dl, sk, bl, kb)
    return np.tensordot(tmp, ket_t, axes=[[1, 3], [1, 2]])  # (Dl, bl, kl) -> reorder
    # note: reordered below by caller


def _mpo_env_right_ordered(env, bra_t, w, ket_t):
    out = _mpo_env_right(env, bra_t, w, ket_t)
    return out.transpose(1, 0, 2)  # (bl, Dl, kl)


@dataclass
class DmrgStats:
    energy: float
    max_chi: int
    delta_e_last: float
    truncation_error: float
    sweeps: int
    converged: bool


def dmrg(h: MPOOperator, cfg: DmrgConfig | None = None,
         initial: MPSState | None = None) -> tuple[MPSState, float, DmrgStats]:
    """Two-site DMRG ground-state search with optional noise-based
    subspace-expansion mixer (amplitude decaying 1e-2 -> 0 over sweeps)."""
    cfg = cfg or DmrgConfig()
    L = h.length
    state = (initial or neel_state(L)).copy()
    state = canonicalize(state, 0)
    rng = np.random.default_rng(cfg.seed)

    # right environments for sites > k
    renv = [None] * (L + 1)
    renv[L] = np.ones((1, 1, 1), dtype=complex)
    for k in range(L - 1, 1, -1):
        renv[k] = _mpo_env_right_ordered(renv[k + 1], state.tensors[k], h.tensors[k], state.tensors[k])
    lenv = [None] * (L + 1)
    lenv[0] = np.ones((1, 1, 1), dtype=complex)

    energy = mpo_expectation(state, h)
    delta_e = np.inf
    max_trunc = 0.0
    sweeps_done = 0
    for sweep in range(cfg.max_sweeps):
        mixer_amp = 0.0
        if cfg.mixer:
            # decay from 1e-2 toward zero; off entirely for the final sweeps
            mixer_amp = 1e-2 * 0.3 ** sweep
            if sweep >= cfg.max_sweeps - 2:
                mixer_amp = 0.0
        max_trunc_sweep = 0.0
        for direction, sites in (("R", range(L - 2)), ("L", range(L - 2, -1, -1))):
            for k in sites:
                le, re = lenv[k], renv[k + 2]
                w1, w2 = h.tensors[k], h.tensors[k + 1]
                t1, t2 = state.tensors[k], state.tensors[k + 1]
                theta = np.tensordot(t1, t2, axes=[[2], [0]])  # (bl,s1,s2,br)
                shape = theta.shape
                energy, theta = _local_ground_state(le, w1, w2, re, theta)
                if mixer_amp > 0.0:
                    noise = rng.normal(size=shape) + 1j * rng.normal(size=shape)
                    theta = theta + mixer_amp * noise / np.linalg.norm(noise)
                    theta /= np.linalg.norm(theta)
                # split with singular-value cutoff
                mat = theta.reshape(shape[0] * 2, 2 * shape[3])
                u, sv, vh = np.linalg.svd(mat, full_matrices=False)
                total = np.sqrt((sv ** 2).sum())
                keep = max(1, int((sv >= cfg.truncation_cutoff * total).sum()))
                keep = min(keep, cfg.max_bond)
                trunc = float((sv[keep:] ** 2).sum() / total ** 2)
                max_trunc_sweep = max(max_trunc_sweep, trunc)
                u, sv, vh = u[:, :keep], sv[:keep], vh[:keep]
                sv = sv / np.sqrt((sv ** 2).sum())
                if direction == "R":
                    state.tensors[k] = u.reshape(shape[0], 2, keep)
                    state.tensors[k + 1] = (np.diag(sv) @ vh).reshape(keep, 2, shape[3])
                    state.canonical_center = k + 1
                    lenv[k + 1] = _mpo_env_left(lenv[k], state.tensors[k], w1, state.tensors[k])
                else:
                    state.tensors[k] = (u @ np.diag(sv)).reshape(shape[0], 2, keep)
                    state.tensors[k + 1] = vh.reshape(keep, 2, shape[3])
                    state.canonical_center = k
                    renv[k + 1] = _mpo_env_right_ordered(renv[k + 2], state.tensors[k + 1],
                                                         w2, state.tensors[k + 1])
        sweeps_done += 1
        max_trunc = max(max_trunc, max_trunc_sweep)
        if sweep == 0:
            e_prev = energy
        else:
            delta_e = abs(energy - e_prev)
            e_prev = energy
            if delta_e < cfg.energy_tol and mixer_amp == 0.0:
                break
    state = canonicalize(state, 0).normalized()
    energy = mpo_expectation(state, h)
    stats = DmrgStats(energy=energy, max_chi=state.max_bond(), delta_e_last=float(delta_e),
                      truncation_error=max_trunc, sweeps=sweeps_done,
                      converged=delta_e < cfg.energy_tol)
    return state, energy, stats


def _local_ground_state(le, w1, w2, re, theta0):
    """Lowest eigenpair of the two-site effective Hamiltonian."""
    bl, _, _, br = theta0.shape
    dim = bl * 2 * 2 * br

    def matvec(x):
        th = x.reshape(bl, 2, 2, br)
        # contract: le (bb, D, kb) * th(kb, s1, s2, kr)
        tmp = np.tensordot(le, th, axes=[[2], [0]])  # (bb, D, s1, s2, kr)
        tmp = np.tensordot(tmp, w1, axes=[[1, 2], [0, 2]])  # (bb, s2, kr, sb1, D)
        tmp = np.tensordot(tmp, w2, axes=[[4, 1], [0, 2]])  # (bb, kr, sb1, sb2, Dr)
        tmp = np.tensordot(tmp, re, axes=[[1, 4], [2, 1]])  # (bb, sb1, sb2, brr)
        return tmp.reshape(-1)

    if dim <= 256:
        mat = np.zeros((dim, dim), dtype=complex)
        eye = np.eye(dim)
        for j in range(dim):
            mat[:, j] = matvec(eye[:, j])
        vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
        return float(vals[0]), vecs[:, 0].reshape(theta0.shape)
    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(op, k=1, which="SA",
                                               v0=theta0.reshape(-1), tol=1e-12,
                                               maxiter=2000)
    except scipy.sparse.linalg.ArpackError as exc:  # pragma: no cover
        raise ConvergenceError(f"local eigensolver failed: {exc}") from exc
    vec = vecs[:, 0]
    return float(vals[0]), (vec / np.linalg.norm(vec)).reshape(theta0.shape)


def ground_state(p: XXZParams, cfg: DmrgConfig | None = None,
                 fix_sign: bool = True) -> tuple[MPSState, float, DmrgStats]:
    """DMRG ground state with the reported staggered magnetization <= 0."""
    h = xxz_mpo(p)
    state, energy, stats = dmrg(h, cfg)
    if fix_sign and staggered_magnetization(state) > 0:
        state = global_spin_flip(state)
    return state, energy, stats


# -- Trotterized quench circuits --------------------------------------


def bond_hamiltonian(p: XXZParams) -> np.ndarray:
    """Two-site coupling term (field excluded), first site most significant."""
    return (np.kron(SX, SX) + np.kron(SY, SY) + p.J_z * np.kron(SZ, SZ))


def bond_gate(p: XXZParams, tau: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * tau * bond_hamiltonian(p))


def _bond_groups(L: int) -> tuple[list[int], list[int]]:
    odd = [i for i in range(L - 1) if i % 2 == 0]   # (1,2),(3,4),... in 1-based labels
    even = [i for i in range(L - 1) if i % 2 == 1]
    return odd, even


def trotter2_circuit(p: XXZParams, dt: float, n_steps: int) -> Circuit:
    """Second-order Suzuki-Trotter circuit for exp(-iHt), t = n_steps*dt.

    Splitting per step: odd/2, field/2, even, field/2, odd/2, with the
    field applied as single-qubit RZ layers; adjacent odd half-steps of
    consecutive steps are merged.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    circ = Circuit(p.L)
    if n_steps == 0:
        return circ
    odd, even = _bond_groups(p.L)
    u_half = bond_gate(p, dt / 2)
    u_full = bond_gate(p, dt)

    def odd_layer(u):
        for i in odd:
            circ.append(Gate("U2", (i, i + 1), (), u))

    def field_layer():
        if p.h_z != 0.0:
            for q in range(p.L):
                circ.append(Gate("RZ", (q,), (-p.h_z * dt / 2,)))

    def even_layer():
        for i in even:
            circ.append(Gate("U2", (i, i + 1), (), u_full))

    odd_layer(u_half)
    for step in range(n_steps):
        field_layer()
        even_layer()
        field_layer()
        odd_layer(u_full if step < n_steps - 1 else u_half)
    return circ


# -- TEBD reference dynamics ------------------------------------------


@dataclass
class TebdTrajectory:
    times: np.ndarray
    sm: np.ndarray
    max_chi: int
    truncated: bool
    snapshots: dict = field(default_factory=dict)  # t -> MPSState


def tebd_evolve(s: MPSState, p: XXZParams, dt: float, t_max: float,
                policy: TruncationPolicy | None = None,
                snapshot_times: tuple[float, ...] = (),
                bond_cap: int = 400) -> TebdTrajectory:
    """Second-order TEBD trajectory recording staggered magnetization.

    The default policy discards a squared-Schmidt weight of at most
    1e-10 per cut (the analog of a 1e-5 singular-value cutoff).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    policy = policy or TruncationPolicy(1e-10, None)
    n_steps = int(round(t_max / dt))
    odd, even = _bond_groups(p.L)
    u_half = bond_gate(p, dt / 2)
    u_full = bond_gate(p, dt)
    rz_half = scipy.linalg.expm(1j * (p.h_z * dt / 2) * SZ)

    state = s.normalized()
    times = [0.0]
    sm = [staggered_magnetization(state)]
    snaps = {}
    snap_set = {round(float(t), 9) for t in snapshot_times}
    if 0.0 in snap_set:
        snaps[0.0] = state.copy()
    max_chi = state.max_bond()
    truncated = False
    for step in range(n_steps):
        state = _tebd_step(state, odd, even, u_half, u_full, rz_half, p.h_z, policy)
        t = (step + 1) * dt
        chi = state.max_bond()
        max_chi = max(max_chi, chi)
        if chi > bond_cap:
            truncated = True
            times.append(t)
            sm.append(staggered_magnetization(state))
            break
        times.append(t)
        sm.append(staggered_magnetization(state))
        key = round(float(t), 9)
        if key in snap_set:
            snaps[key] = state.copy()
    return TebdTrajectory(np.asarray(times), np.asarray(sm), max_chi, truncated, snaps)


def _tebd_step(state, odd, even, u_half, u_full, rz_half, h_z, policy):
    from .tensor import apply_single_site_gate, apply_two_site_gate

    for i in odd:
        state = apply_two_site_gate(state, i, u_half, policy)
    if h_z != 0.0:
        for q in range(state.length):
            state = apply_single_site_gate(state, q, rz_half)
    for i in even:
        state = apply_two_site_gate(state, i, u_full, policy)
    if h_z != 0.0:
        for q in range(state.length):
            state = apply_single_site_gate(state, q, rz_half)
    for i in odd:
        state = apply_two_site_gate(state, i, u_half, policy)
    return state
