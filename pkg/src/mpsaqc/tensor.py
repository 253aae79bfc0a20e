"""Open-boundary MPS/MPO engine.

Tensor conventions:
    MPS site tensors have shape (chi_left, 2, chi_right).
    MPO site tensors have shape (D_left, 2, 2, D_right) with index order
    (left bond, bra physical, ket physical, right bond).

Site 0 is the least-significant qubit when converting to a dense
statevector (little-endian, matching :mod:`mpsaqc.oracle`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, NonUnitaryError, SiteRangeError

ISOMETRY_TOL = 1e-10
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class TruncationPolicy:
    """Schmidt-truncation rule applied at every SVD cut.

    ``threshold`` is the budget for the discarded squared Schmidt weight
    per cut: the largest suffix of squared coefficients whose sum stays
    below it is dropped and the kept spectrum is renormalized.
    ``max_bond``, when set, additionally caps the kept rank (which may
    push the discarded weight above the threshold; callers see the
    actual weight via the state's ``discarded_weight`` accumulator).
    """

    threshold: float = 0.0
    max_bond: Optional[int] = None

    def __post_init__(self):
        if self.threshold < 0 or self.threshold >= 1:
            raise ValueError(f"threshold must be in [0, 1), got {self.threshold}")
        if self.max_bond is not None and self.max_bond < 1:
            raise ValueError(f"max_bond must be >= 1, got {self.max_bond}")


EXACT = TruncationPolicy(0.0, None)


def truncate_spectrum(s: np.ndarray, policy: TruncationPolicy) -> tuple[int, float]:
    """Number of singular values to keep and the discarded squared weight.

    ``s`` must be sorted descending. Ties are broken by keeping the
    earlier index (suffix-based rule on a deterministic SVD).
    """
    w = s.real ** 2
    total = w.sum()
    if total == 0.0:
        return 1, 0.0
    keep = len(s)
    if policy.threshold > 0.0:
        tail = np.cumsum(w[::-1])[::-1]  # tail[k] = sum of w[k:]
        # smallest keep-count whose discarded tail stays below threshold
        below = np.nonzero(tail < policy.threshold * total)[0]
        if below.size:
            keep = max(1, int(below[0]))
    if policy.max_bond is not None:
        keep = min(keep, policy.max_bond)
    keep = max(1, keep)
    discarded = float(w[keep:].sum() / total)
    return keep, discarded


@dataclass
class MPSState:
    """Open-boundary matrix product state over qubits.

    The represented vector is ``exp(norm_log) * contraction(tensors)``;
    ``norm_log`` absorbs scale so that overlaps of weakly-overlapping
    large systems stay representable in log space.
    """

    tensors: list[np.ndarray]
    canonical_center: Optional[int] = None
    norm_log: float = 0.0
    discarded_weight: float = 0.0

    # -- constructors -------------------------------------------------

    @classmethod
    def zero_state(cls, length: int) -> "MPSState":
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, 0, 0] = 1.0
        return cls([t.copy() for _ in range(length)], canonical_center=0)

    @classmethod
    def basis_state(cls, bits: list[int]) -> "MPSState":
        tensors = []
        for b in bits:
            t = np.zeros((1, 2, 1), dtype=complex)
            t[0, int(b), 0] = 1.0
            tensors.append(t)
        return cls(tensors, canonical_center=0)

    @classmethod
    def product_state(cls, amplitudes: list[np.ndarray]) -> "MPSState":
        tensors = []
        for a in amplitudes:
            a = np.asarray(a, dtype=complex).reshape(2)
            n = np.linalg.norm(a)
            if n == 0:
                raise ValueError("zero local amplitude vector")
            tensors.append((a / n).reshape(1, 2, 1))
        return cls(tensors, canonical_center=0)

    @classmethod
    def random_state(cls, length: int, chi: int, rng: np.random.Generator) -> "MPSState":
        tensors = []
        for k in range(length):
            dl = min(chi, 2 ** k, 2 ** (length - k))
            dr = min(chi, 2 ** (k + 1), 2 ** (length - k - 1))
            shape = (dl, 2, dr)
            tensors.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
        s = cls(tensors)
        s = canonicalize(s, 0)
        return s.normalized()

    # -- basic queries ------------------------------------------------

    @property
    def length(self) -> int:
        return len(self.tensors)

    def max_bond(self) -> int:
        return max(t.shape[2] for t in self.tensors[:-1]) if self.length > 1 else 1

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MPSState":
        return MPSState([t.copy() for t in self.tensors], self.canonical_center,
                        self.norm_log, self.discarded_weight)

    def norm(self) -> float:
        val, log10mag = _overlap_with_log(self, self)
        return float(np.sqrt(abs(val)) * 10 ** (log10mag / 2))

    def normalized(self) -> "MPSState":
        out = self.copy()
        c = out.canonical_center if out.canonical_center is not None else 0
        out = canonicalize(out, c)
        n = np.linalg.norm(out.tensors[c])
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        out.tensors[c] = out.tensors[c] / n
        out.norm_log = 0.0
        return out

    def validate(self) -> None:
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionMismatchError("boundary bonds must be 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise DimensionMismatchError(f"site {k}: expected shape (chi, 2, chi), got {t.shape}")
            if k + 1 < self.length and t.shape[2] != self.tensors[k + 1].shape[0]:
                raise DimensionMismatchError(
                    f"bond mismatch between sites {k} and {k + 1}: "
                    f"{t.shape[2]} vs {self.tensors[k + 1].shape[0]}")

    def to_dense(self) -> np.ndarray:
        """Dense statevector, little-endian (site 0 is the lowest bit)."""
        if self.length > 20:
            raise DimensionMismatchError("to_dense capped at 20 sites")
        acc = np.ones((1, 1), dtype=complex)  # (amplitude block, right bond)
        for t in self.tensors:
            # acc: (n, chi_l); t: (chi_l, 2, chi_r) -> (n, 2, chi_r)
            acc = np.tensordot(acc, t, axes=[[1], [0]])
            # new site index must become the *most significant* of the block
            # so that flattening keeps site 0 least significant
            acc = acc.transpose(1, 0, 2).reshape(-1, t.shape[2])
        vec = acc.reshape(-1)
        return vec * np.exp(self.norm_log)


# -- contraction ------------------------------------------------------


def _overlap_with_log(a: MPSState, b: MPSState) -> tuple[complex, float]:
    """<a|b> as (mantissa, log10 magnitude factored out).

    The transfer contraction renormalizes after each site so that
    overlaps down to ~1e-300**many remain representable.
    """
    if a.length != b.length:
        raise DimensionMismatchError(f"length mismatch: {a.length} vs {b.length}")
    env = np.ones((1, 1), dtype=complex)  # (bond of a*, bond of b)
    log10mag = (a.norm_log + b.norm_log) / np.log(10)
    for ta, tb in zip(a.tensors, b.tensors):
        # env[al, bl] ; ta*[al, s, ar] ; tb[bl, s, br] -> env'[ar, br]
        tmp = np.tensordot(env, np.conj(ta), axes=[[0], [0]])  # (bl, s, ar)
        env = np.tensordot(tmp, tb, axes=[[0, 1], [0, 1]])  # (ar, br)
        scale = np.abs(env).max()
        if scale == 0.0:
            return 0.0 + 0.0j, -np.inf
        env /= scale
        log10mag += np.log10(scale)
    return complex(env[0, 0]), log10mag


def inner_product(a: MPSState, b: MPSState) -> complex:
    """<a|b> via left-to-right transfer contraction."""
    val, log10mag = _overlap_with_log(a, b)
    if log10mag == -np.inf:
        return 0.0 + 0.0j
    if log10mag < -300:
        return 0.0 + 0.0j
    return val * 10 ** log10mag


def log10_fidelity(a: MPSState, b: MPSState) -> float:
    """log10 |<a|b>|^2, safe for overlaps far below double underflow."""
    val, log10mag = _overlap_with_log(a, b)
    m = abs(val)
    if m == 0.0 or log10mag == -np.inf:
        return -np.inf
    return 2.0 * (np.log10(m) + log10mag)


def fidelity(a: MPSState, b: MPSState) -> float:
    """|<a|b>|^2 for normalized states."""
    return abs(inner_product(a, b)) ** 2


# -- canonical form ---------------------------------------------------


def canonicalize(s: MPSState, center: int) -> MPSState:
    """Gauge-equivalent state with the stated canonical center.

    If the input already has a tracked center, only the sites between the
    old and new centers are re-gauged.
    """
    if not 0 <= center < s.length:
        raise SiteRangeError(f"center {center} out of range for length {s.length}")
    out = s.copy()
    cur = out.canonical_center
    start_l = 0 if cur is None else cur
    start_r = s.length - 1 if cur is None else cur
    # left-to-right QR up to the center
    for k in range(start_l, center):
        t = out.tensors[k]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l * d, chi_r))
        out.tensors[k] = q.reshape(chi_l, d, q.shape[1])
        out.tensors[k + 1] = np.tensordot(r, out.tensors[k + 1], axes=[[1], [0]])
    # right-to-left
    for k in range(start_r, center, -1):
        t = out.tensors[k]
        chi_l, d, chi_r = t.shape
        m = t.reshape(chi_l, d * chi_r)
        q, r = np.linalg.qr(m.conj().T)
        out.tensors[k] = q.conj().T.reshape(q.shape[1], d, chi_r)
        out.tensors[k - 1] = np.tensordot(out.tensors[k - 1], r.conj().T, axes=[[2], [0]])
    out.canonical_center = center
    return out


def isometry_residuals(s: MPSState) -> list[float]:
    """Per-site deviation from the isometry condition implied by the center."""
    c = s.canonical_center
    res = []
    for k, t in enumerate(s.tensors):
        chi_l, d, chi_r = t.shape
        if c is not None and k < c:
            m = t.reshape(chi_l * d, chi_r)
            res.append(float(np.linalg.norm(m.conj().T @ m - np.eye(chi_r))))
        elif c is not None and k > c:
            m = t.reshape(chi_l, d * chi_r)
            res.append(float(np.linalg.norm(m @ m.conj().T - np.eye(chi_l))))
        else:
            res.append(0.0)
    return res


# -- gate application -------------------------------------------------


def _check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim, dim):
        raise DimensionMismatchError(f"expected {dim}x{dim} matrix, got {u.shape}")
    if np.linalg.norm(u @ u.conj().T - np.eye(dim)) > UNITARY_TOL * dim:
        raise NonUnitaryError("matrix is not unitary to 1e-10")
    return u


def apply_single_site_gate(s: MPSState, k: int, u: np.ndarray) -> MPSState:
    if not 0 <= k < s.length:
        raise SiteRangeError(f"site {k} out of range")
    u = _check_unitary(u, 2)
    out = s.copy()
    out.tensors[k] = np.einsum("ij,ajb->aib", u, out.tensors[k])
    return out


def apply_two_site_gate(s: MPSState, k: int, u: np.ndarray,
                        policy: TruncationPolicy = EXACT) -> MPSState:
    """Apply a 4x4 unitary to sites (k, k+1).

    The matrix basis is |b_k b_{k+1}> with site k as the most significant
    bit of the 2-bit index.
    """
    if not 0 <= k < s.length - 1:
        raise SiteRangeError(f"pair ({k},{k + 1}) out of range")
    u = _check_unitary(u, 4)
    out = canonicalize(s, k) if s.canonical_center not in (k, k + 1) else s.copy()
    theta = np.tensordot(out.tensors[k], out.tensors[k + 1], axes=[[2], [0]])
    # theta: (chi_l, s_k, s_k1, chi_r); gate index i = 2*s_k + s_k1
    g = u.reshape(2, 2, 2, 2)  # (out_k, out_k1, in_k, in_k1)
    theta = np.einsum("abcd,lcdr->labr", g, theta)
    left, svals, right, discarded = _split_with_norm(theta, policy)
    out.tensors[k] = left
    out.tensors[k + 1] = np.tensordot(np.diag(svals), right, axes=[[1], [0]])
    out.canonical_center = k + 1
    out.discarded_weight += discarded
    return out


def _split_with_norm(theta: np.ndarray, policy: TruncationPolicy) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """SVD split preserving the overall norm through truncation."""
    chi_l, _, _, chi_r = theta.shape
    mat = theta.reshape(chi_l * 2, 2 * chi_r)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep, discarded = truncate_spectrum(s, policy)
    total = np.sqrt((s ** 2).sum())
    u, s, vh = u[:, :keep], s[:keep], vh[:keep]
    kept = np.sqrt((s ** 2).sum())
    if kept > 0 and discarded > 0.0:
        s = s * (total / kept)
    return u.reshape(chi_l, 2, keep), s, vh.reshape(keep, 2, chi_r), discarded


def apply_multi_site_gate(s: MPSState, k: int, u: np.ndarray, nsites: int,
                          policy: TruncationPolicy = EXACT) -> MPSState:
    """Apply a 2^q x 2^q unitary to the contiguous sites k..k+q-1.

    The matrix basis orders site k as the most significant bit,
    consistent with :func:`apply_two_site_gate`.
    """
    dim = 2 ** nsites
    if not 0 <= k <= s.length - nsites:
        raise SiteRangeError(f"window ({k}..{k + nsites - 1}) out of range")
    u = _check_unitary(u, dim)
    if nsites == 1:
        return apply_single_site_gate(s, k, u)
    out = canonicalize(s, k)
    theta = out.tensors[k]
    for j in range(1, nsites):
        theta = np.tensordot(theta, out.tensors[k + j], axes=[[theta.ndim - 1], [0]])
    # theta: (chi_l, s_k, ..., s_{k+q-1}, chi_r)
    chi_l = theta.shape[0]
    chi_r = theta.shape[-1]
    block = theta.reshape(chi_l, dim, chi_r)
    block = np.einsum("ij,ajb->aib", u, block)
    # re-split by iterated SVD
    rest = block.reshape(chi_l, *([2] * nsites), chi_r)
    for j in range(nsites - 1):
        cl = rest.shape[0]
        m = rest.reshape(cl * 2, -1)
        uu, sv, vh = np.linalg.svd(m, full_matrices=False)
        keep, discarded = truncate_spectrum(sv, policy)
        total = np.sqrt((sv ** 2).sum())
        uu, sv, vh = uu[:, :keep], sv[:keep], vh[:keep]
        kept = np.sqrt((sv ** 2).sum())
        if kept > 0 and discarded > 0.0:
            sv = sv * (total / kept)
        out.tensors[k + j] = uu.reshape(cl, 2, keep)
        out.discarded_weight += discarded
        rest = (np.diag(sv) @ vh).reshape(keep, *([2] * (nsites - 1 - j)), chi_r)
    out.tensors[k + nsites - 1] = rest.reshape(rest.shape[0], 2, chi_r)
    out.canonical_center = k + nsites - 1
    return out


# -- compression ------------------------------------------------------


def compress(s: MPSState, target_chi: int, method: str = "svd",
             max_sweeps: int = 100, tol: float = 1e-9) -> tuple[MPSState, float]:
    """Best max-bond <= target_chi approximation and its fidelity.

    ``svd`` does a single canonical truncation sweep; ``variational``
    seeds from the SVD result and sweeps single-site updates against the
    fixed target until the fidelity gain per full sweep drops below
    ``tol`` (or ``max_sweeps`` is reached).
    """
    if target_chi < 1:
        raise ValueError("target_chi must be >= 1")
    if method not in ("svd", "variational"):
        raise ValueError(f"unknown compression method {method!r}")
    src = s.normalized()
    out = _compress_svd(src, target_chi)
    fid = fidelity(out, src)
    if method == "variational":
        out, fid = _compress_variational(src, out, max_sweeps, tol)
    return out, fid


def _compress_svd(src: MPSState, target_chi: int) -> MPSState:
    out = canonicalize(src, 0)
    policy = TruncationPolicy(0.0, target_chi)
    for k in range(out.length - 1):
        t = out.tensors[k]
        chi_l, d, chi_r = t.shape
        u, sv, vh = np.linalg.svd(t.reshape(chi_l * d, chi_r), full_matrices=False)
        keep, _ = truncate_spectrum(sv, policy)
        u, sv, vh = u[:, :keep], sv[:keep], vh[:keep]
        out.tensors[k] = u.reshape(chi_l, d, keep)
        rest = np.diag(sv) @ vh
        out.tensors[k + 1] = np.tensordot(rest, out.tensors[k + 1], axes=[[1], [0]])
    out.canonical_center = out.length - 1
    return out.normalized()


def _compress_variational(src: MPSState, seed: MPSState,
                          max_sweeps: int, tol: float) -> tuple[MPSState, float]:
    out = canonicalize(seed, 0)
    L = out.length
    # right environments of <out|src>: renv[k] contracts sites k..L-1
    renv = [None] * (L + 1)
    renv[L] = np.ones((1, 1), dtype=complex)  # (out bond, src bond)
    for k in range(L - 1, 0, -1):
        renv[k] = _env_step_right(out.tensors[k], src.tensors[k], renv[k + 1])
    lenv = np.ones((1, 1), dtype=complex)
    prev_fid = -1.0
    fid = 0.0
    for _ in range(max_sweeps):
        # left-to-right sweep
        lenvs = [lenv]
        for k in range(L):
            new = np.tensordot(lenvs[k], src.tensors[k], axes=[[1], [0]])  # (out_l, s, src_r)
            new = np.tensordot(new, renv[k + 1], axes=[[2], [1]])  # (out_l, s, out_r)
            nrm = np.linalg.norm(new)
            if nrm == 0:
                break
            new /= nrm
            out.tensors[k] = new
            if k < L - 1:
                chi_l, d, chi_r = new.shape
                q, r = np.linalg.qr(new.reshape(chi_l * d, chi_r))
                out.tensors[k] = q.reshape(chi_l, d, q.shape[1])
                out.tensors[k + 1] = np.tensordot(r, out.tensors[k + 1], axes=[[1], [0]])
            lenvs.append(_env_step_left(out.tensors[k], src.tensors[k], lenvs[k]))
        out.canonical_center = L - 1
        # right-to-left sweep, rebuilding right environments
        renv[L] = np.ones((1, 1), dtype=complex)
        for k in range(L - 1, -1, -1):
            new = np.tensordot(lenvs[k], src.tensors[k], axes=[[1], [0]])
            new = np.tensordot(new, renv[k + 1], axes=[[2], [1]])
            nrm = np.linalg.norm(new)
            if nrm == 0:
                break
            new /= nrm
            out.tensors[k] = new
            if k > 0:
                chi_l, d, chi_r = new.shape
                m = new.reshape(chi_l, d * chi_r)
                q, r = np.linalg.qr(m.conj().T)
                out.tensors[k] = q.conj().T.reshape(q.shape[1], d, chi_r)
                out.tensors[k - 1] = np.tensordot(out.tensors[k - 1], r.conj().T, axes=[[2], [0]])
            renv[k] = _env_step_right(out.tensors[k], src.tensors[k], renv[k + 1])
        out.canonical_center = 0
        overlap_val, overlap_log = _overlap_with_log(out, src)
        fid = abs(overlap_val) ** 2 * 10 ** (2 * overlap_log) if overlap_log > -150 else 0.0
        if fid - prev_fid < tol:
            break
        prev_fid = fid
    return out, fid


def _env_step_left(bra_t: np.ndarray, ket_t: np.ndarray, env: np.ndarray) -> np.ndarray:
    tmp = np.tensordot(env, np.conj(bra_t), axes=[[0], [0]])  # (ket_l, s, bra_r)
    return np.tensordot(tmp, ket_t, axes=[[0, 1], [0, 1]])  # (bra_r, ket_r)


def _env_step_right(bra_t: np.ndarray, ket_t: np.ndarray, env: np.ndarray) -> np.ndarray:
    tmp = np.tensordot(np.conj(bra_t), env, axes=[[2], [0]])  # (bra_l, s, ket_r)
    return np.tensordot(tmp, ket_t, axes=[[1, 2], [1, 2]])  # (bra_l, ket_l)


# -- observables ------------------------------------------------------

SZ = np.diag([0.5, -0.5]).astype(complex)


def expectation_sz(s: MPSState, k: int) -> float:
    """<S^z_k> with S^z = diag(1/2, -1/2)."""
    if not 0 <= k < s.length:
        raise SiteRangeError(f"site {k} out of range")
    return _local_expectation(s, {k: SZ})


def _local_expectation(s: MPSState, ops: dict[int, np.ndarray]) -> float:
    st = s.normalized()
    env = np.ones((1, 1), dtype=complex)
    for k, t in enumerate(st.tensors):
        ket = t if k not in ops else np.einsum("ij,ajb->aib", ops[k], t)
        tmp = np.tensordot(env, np.conj(t), axes=[[0], [0]])
        env = np.tensordot(tmp, ket, axes=[[0, 1], [0, 1]])
    val = complex(env[0, 0])
    return float(val.real)


def two_site_correlation(s: MPSState, i: int, j: int) -> float:
    """C_zz(i, j) = <S^z_i S^z_j> - <S^z_i><S^z_j>; diagonal undefined."""
    if i == j:
        raise SiteRangeError("two_site_correlation is undefined on the diagonal")
    for k in (i, j):
        if not 0 <= k < s.length:
            raise SiteRangeError(f"site {k} out of range")
    joint = _local_expectation(s, {i: SZ, j: SZ})
    return joint - expectation_sz(s, i) * expectation_sz(s, j)


# -- MPO --------------------------------------------------------------


@dataclass
class MPOOperator:
    """Tensor-train operator with site tensors (D_l, bra, ket, D_r)."""

    tensors: list[np.ndarray]

    @property
    def length(self) -> int:
        return len(self.tensors)

    def validate(self) -> None:
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[3] != 1:
            raise DimensionMismatchError("boundary operator bonds must be 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 4 or t.shape[1] != 2 or t.shape[2] != 2:
                raise DimensionMismatchError(f"site {k}: bad MPO tensor shape {t.shape}")
            if k + 1 < self.length and t.shape[3] != self.tensors[k + 1].shape[0]:
                raise DimensionMismatchError(f"operator bond mismatch at {k}")

    def max_bond(self) -> int:
        return max(t.shape[3] for t in self.tensors[:-1]) if self.length > 1 else 1

    def to_dense(self) -> np.ndarray:
        """Dense matrix, little-endian to match MPSState.to_dense."""
        if self.length > 12:
            raise DimensionMismatchError("MPO to_dense capped at 12 sites")
        acc = np.ones((1, 1, 1), dtype=complex)  # (bra block, ket block, bond)
        for t in self.tensors:
            acc = np.tensordot(acc, t, axes=[[2], [0]])  # (B, K, bra, ket, D)
            nb, nk = acc.shape[0], acc.shape[1]
            acc = acc.transpose(2, 0, 3, 1, 4).reshape(2 * nb, 2 * nk, t.shape[3])
        return acc[:, :, 0]


def mpo_expectation(s: MPSState, h: MPOOperator) -> float:
    """<s|H|s> / <s|s> for Hermitian H."""
    if s.length != h.length:
        raise DimensionMismatchError("state/operator length mismatch")
    st = s.normalized()
    env = np.ones((1, 1, 1), dtype=complex)  # (bra bond, mpo bond, ket bond)
    for t, w in zip(st.tensors, h.tensors):
        tmp = np.tensordot(env, np.conj(t), axes=[[0], [0]])  # (D, kl, sb, br)
        tmp = np.tensordot(tmp, w, axes=[[0, 2], [0, 1]])  # (kl, br, sk, D)
        env = np.tensordot(tmp, t, axes=[[0, 2], [0, 1]])  # (br, D, kr)
    val = complex(env[0, 0, 0])
    return float(val.real)


def mpo_apply(h: MPOOperator, s: MPSState, policy: TruncationPolicy = EXACT) -> MPSState:
    """H|s> as an MPS, compressed per the policy."""
    if s.length != h.length:
        raise DimensionMismatchError("state/operator length mismatch")
    tensors = []
    for t, w in zip(s.tensors, h.tensors):
        # (Dl, sb, sk, Dr) x (cl, sk, cr) -> (Dl, cl, sb, Dr, cr)
        m = np.tensordot(w, t, axes=[[2], [1]])
        m = m.transpose(0, 2, 1, 3, 4)
        Dl, cl, sb, Dr, cr = m.shape
        tensors.append(m.reshape(Dl * cl, sb, Dr * cr))
    out = MPSState(tensors)
    out = canonicalize(out, 0)
    if policy.threshold > 0 or policy.max_bond is not None:
        out, _ = compress(out, policy.max_bond or out.max_bond(), "svd")
    return out


# -- JSON I/O ---------------------------------------------------------


def mps_to_json_dict(s: MPSState) -> dict:
    return {
        "length": s.length,
        "tensors": [
            {
                "shape": list(t.shape),
                "re": t.real.ravel().tolist(),
                "im": t.imag.ravel().tolist(),
            }
            for t in s.tensors
        ],
    }


def mps_from_json_dict(d: dict) -> MPSState:
    tensors = []
    for entry in d["tensors"]:
        shape = tuple(entry["shape"])
        re = np.asarray(entry["re"], dtype=float)
        im = np.asarray(entry["im"], dtype=float)
        if re.size != np.prod(shape) or im.size != np.prod(shape):
            raise DimensionMismatchError("tensor data does not match declared shape")
        tensors.append((re + 1j * im).reshape(shape))
    if len(tensors) != d["length"]:
        raise DimensionMismatchError("length field disagrees with tensor list")
    s = MPSState(tensors)
    s.validate()
    return s


def save_mps(s: MPSState, path: str) -> None:
    with open(path, "w") as f:
        json.dump(mps_to_json_dict(s), f)


def load_mps(path: str) -> MPSState:
    with open(path) as f:
        return mps_from_json_dict(json.load(f))
