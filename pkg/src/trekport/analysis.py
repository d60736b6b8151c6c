"""Fidelities, the single-cycle teleportable subspace and separability checks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSpec
from .errors import DimensionMismatchError, UnknownFactorError
from .hilbert import SYSTEM, DensityMatrix, Ket, SpaceSpec, pulse_label, tensor_ket
from .protocol import Propagators

SCHMIDT_CUTOFF = 1e-10
RANK_CUTOFF = 1e-10
CONDITION_WARNING = 1e8


def _as_state_vector(x) -> np.ndarray:
    if isinstance(x, Ket):
        return x.amplitudes
    return np.asarray(x, dtype=np.complex128).reshape(-1)


def reconstruction_fidelity(original: Ket, reconstructed, mode: str = "direct") -> float:
    """|<o|r>|^2, or <o|rho|o> for a mixed reconstruction; ``conjugate`` uses conj(o)."""
    o = _as_state_vector(original)
    if mode == "conjugate":
        o = o.conj()
    elif mode != "direct":
        raise ValueError(f"unknown fidelity mode {mode!r}")
    if isinstance(reconstructed, DensityMatrix):
        rho = reconstructed.entries
        if rho.shape[0] != o.size:
            raise DimensionMismatchError("dimensions differ")
        return float(np.real(np.vdot(o, rho @ o)))
    r = _as_state_vector(reconstructed)
    if r.size != o.size:
        raise DimensionMismatchError(f"dimensions {o.size} and {r.size} differ")
    return float(abs(np.vdot(o, r)) ** 2)


# ---------------------------------------------------- teleportable subspace

def _cycle_inverse(props: Propagators) -> np.ndarray:
    """((F(2dt) x I) J)^-1 = J^-1 (F(-2dt) x I) on system x one pulse."""
    d = props.joint.shape[0] // props.free.shape[0]
    return props.joint_inv @ np.kron(props.free_inv @ props.free_inv, np.eye(d))


def pulse_to_system_map(H: HamiltonianSpec, dt: float, p: int,
                        props: Propagators | None = None) -> np.ndarray:
    """Matrix A with a = A beta: Bob starts from |e_p> (x) beta, runs one inverse cycle,
    and reads system coefficients a_m = sum_n <e_m, e_n|result>.
    """
    props = props or Propagators.build(H, dt)
    n, d = H.system_dim, H.pulse_dim
    if not 0 <= p < n:
        raise IndexError(f"basis index {p} out of range")
    inv = _cycle_inverse(props)
    cols = inv[:, p * d:(p + 1) * d]          # images of e_p (x) e_j
    return cols.reshape(n, d, d).sum(axis=1)


@dataclass
class SubspaceReport:
    dimension: int
    basis: list[Ket]
    residuals: list[float]
    singular_values: list[float]
    condition_number: float
    pulse0_image: Ket | None = None
    preimages: list[np.ndarray] = field(default_factory=list)

    @property
    def basis_matrix(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, 0), dtype=np.complex128)
        return np.column_stack([b.amplitudes for b in self.basis])


def teleportable_subspace(pulse0: Ket | None, H: HamiltonianSpec, dt: float, p: int,
                          spec: SpaceSpec | None = None) -> SubspaceReport:
    """System states reachable by Bob's single-cycle reconstruction from |e_p>.

    The image of the pulse coefficients under :func:`pulse_to_system_map`,
    orthonormalized by SVD; its dimension never exceeds the pulse dimension.
    """
    if spec is not None and spec.pulse_count != 1:
        raise ValueError("the teleportable subspace is defined for a single cycle (pulse_count = 1)")
    A = pulse_to_system_map(H, dt, p)
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > RANK_CUTOFF * max(1.0, smax)))
    cond = float(smax / s[rank - 1]) if rank else float("inf")
    if rank and cond > CONDITION_WARNING:
        warnings.warn(f"near-singular reconstruction map (condition number {cond:.2e})",
                      RuntimeWarning, stacklevel=2)
    basis, residuals, pre = [], [], []
    for k in range(rank):
        vec = u[:, k]
        beta, *_ = np.linalg.lstsq(A, vec, rcond=None)
        residuals.append(float(np.linalg.norm(A @ beta - vec)))
        pre.append(beta)
        basis.append(Ket(vec / np.linalg.norm(vec), (H.system_dim,), (SYSTEM,)))
    image = None
    if pulse0 is not None:
        a = A @ pulse0.amplitudes
        if np.linalg.norm(a) > RANK_CUTOFF:
            image = Ket(a / np.linalg.norm(a), (H.system_dim,), (SYSTEM,))
    return SubspaceReport(rank, basis, residuals, [float(x) for x in s], cond, image, pre)


def reconstruct_from_pulse(beta: np.ndarray, H: HamiltonianSpec, dt: float, p: int) -> Ket:
    """Bob's single-cycle reconstruction for memory coefficients ``beta`` (normalized output)."""
    props = Propagators.build(H, dt)
    n, d = H.system_dim, H.pulse_dim
    b = np.asarray(beta, dtype=np.complex128)
    start = np.kron(np.eye(n)[p], b / np.linalg.norm(b))
    a = (_cycle_inverse(props) @ start).reshape(n, d).sum(axis=1)
    return Ket(a / np.linalg.norm(a), (n,), (SYSTEM,))


def best_teleport_fidelity(report: SubspaceReport, state: Ket) -> float:
    """max over pulse coefficients of the reconstruction fidelity = |proj onto subspace|^2."""
    if report.dimension == 0:
        return 0.0
    q = report.basis_matrix
    return float(np.sum(np.abs(q.conj().T @ state.amplitudes) ** 2))


# ------------------------------------------------------------------ schmidt

@dataclass
class SchmidtReport:
    coefficients: list[float]
    rank: int
    separable: bool


def _split(ket: Ket, cut: Sequence[str]) -> np.ndarray:
    cut = list(cut)
    if not cut or len(cut) >= len(ket.labels):
        raise ValueError("cut must be a proper, nonempty subset of the factors")
    for l in cut:
        if l not in ket.labels:
            raise UnknownFactorError(f"unknown factor label {l!r}")
    pos = [ket.labels.index(l) for l in cut]
    rest = [i for i in range(len(ket.labels)) if i not in pos]
    t = np.transpose(ket.tensor(), pos + rest)
    left = int(np.prod([ket.dims[i] for i in pos]))
    return t.reshape(left, -1)


def schmidt_coefficients(joint: Ket, cut: Sequence[str]) -> SchmidtReport:
    s = np.linalg.svd(_split(joint, cut), compute_uv=False)
    rank = int(np.sum(s > SCHMIDT_CUTOFF))
    return SchmidtReport([float(x) for x in s], rank, rank == 1)


# ------------------------------------------------------------- separability

def single_cycle_coefficients(Y0: Ket, pulse0: Ket, H: HamiltonianSpec, dt: float) -> np.ndarray:
    """alpha_ij: coefficients of Alice's register after one cycle, shape (N, d)."""
    props = Propagators.build(H, dt)
    d = H.pulse_dim
    f2 = props.free @ props.free
    v = np.kron(f2, np.eye(d)) @ props.joint @ np.kron(Y0.amplitudes, pulse0.amplitudes)
    return v.reshape(H.system_dim, d)


@dataclass
class DuplicationCheck:
    residual: float
    applicable: bool
    schmidt_rank: int


def _unit(m: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(m)
    return m / n if n > 0 else m


def verify_duplication_structure(Y0A: Ket, pulse0: Ket, H: HamiltonianSpec,
                                 dt: float) -> DuplicationCheck:
    """Compare Alice-system x Bob-system coefficients with sum_l alpha_il alpha_jl.

    Alice keeps sum_j alpha_ij on her system and Bob prepares the same row
    sums; their product equals alpha alpha^T (up to normalization and phase)
    exactly when alpha factorizes as alpha_i beta_j.
    """
    alpha = single_cycle_coefficients(Y0A, pulse0, H, dt)
    rows = alpha.sum(axis=1)
    direct = _unit(np.outer(rows, rows))
    formula = _unit(alpha @ alpha.T)
    ov = np.vdot(formula, direct)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    residual = float(np.max(np.abs(direct - phase * formula)))
    s = np.linalg.svd(alpha, compute_uv=False)
    rank = int(np.sum(s > SCHMIDT_CUTOFF))
    applicable = rank == 1 and np.linalg.norm(rows) > SCHMIDT_CUTOFF
    return DuplicationCheck(residual, bool(applicable), rank)


@dataclass
class SeparableReconstruction:
    fidelity: float
    cut_ranks: list[int]
    applicable: bool


def separable_reconstruction(Y0A: Ket, pulse0: Ket, H: HamiltonianSpec,
                             dt: float) -> SeparableReconstruction:
    """Single cycle with Bob duplicating Alice's system and receiving the memory.

    The register is (Alice system, Bob system, memory).  Bob prepares the
    normalized row sums of alpha, the memory carries Alice's pulse, and Bob
    undoes one cycle on (Bob system, memory).  The Alice | rest Schmidt rank
    is recorded after every stage.
    """
    props = Propagators.build(H, dt)
    n, d = H.system_dim, H.pulse_dim
    alpha = single_cycle_coefficients(Y0A, pulse0, H, dt)
    rows = alpha.sum(axis=1)
    bob = Ket(rows / np.linalg.norm(rows), (n,), ("bob",))
    alice_reg = Ket(alpha.reshape(-1), (n, d), ("alice", "mem"))
    three = tensor_ket(alice_reg, bob)                     # alice, mem, bob
    t = np.transpose(three.tensor(), (0, 2, 1)).reshape(-1)
    reg = Ket(t, (n, n, d), ("alice", "bob", "mem"))
    ranks = [schmidt_coefficients(reg, ["alice"]).rank]
    undo = _cycle_inverse(props)
    out = (reg.amplitudes.reshape(n, n * d) @ undo.T).reshape(-1)
    reg = Ket(out, (n, n, d), ("alice", "bob", "mem"))
    ranks.append(schmidt_coefficients(reg, ["alice"]).rank)
    t = reg.tensor()
    rho_bob = np.einsum("abm,acm->bc", t, t.conj())
    fid = float(np.real(np.vdot(Y0A.amplitudes, rho_bob @ Y0A.amplitudes)))
    sv = np.linalg.svd(alpha, compute_uv=False)
    return SeparableReconstruction(fid, ranks, bool(np.sum(sv > SCHMIDT_CUTOFF) == 1))
