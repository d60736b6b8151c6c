"""Hamiltonians, propagators and time-reversal checks (hbar = 1)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, NonCommutingError, NonHermitianError, TimeReversalError
from .hilbert import (
    HERMITIAN_TOL,
    AntiUnitaryOp,
    Ket,
    OperatorMatrix,
    apply_antiunitary,
    kron_op,
)

REVERSAL_TOL = 1e-10
COMMUTE_TOL = 1e-10


def _require_hermitian(H: OperatorMatrix, name: str = "H") -> None:
    e = H.entries
    if not H.hermitian and np.max(np.abs(e - e.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise NonHermitianError(f"{name} is not Hermitian")


def expm_hermitian(H: OperatorMatrix, dt: float) -> OperatorMatrix:
    """exp(-i H dt) through the eigendecomposition of H.

    Real symmetric input goes through the real solver, which keeps the
    eigenvectors real so that conj(exp(-iHt)) == exp(+iHt) holds to rounding.
    """
    _require_hermitian(H)
    e = H.entries
    if H.is_real:
        w, v = np.linalg.eigh(np.real(e))
    else:
        w, v = np.linalg.eigh(e)
    u = (v * np.exp(-1j * w * dt)) @ v.conj().T
    return OperatorMatrix(u, unitary=True, dims=H.dims)


def random_tri_hamiltonian(dim: int, seed, scale: float = 1.0) -> OperatorMatrix:
    """Seeded real symmetric matrix: time-reversal invariant under plain conjugation.

    ``seed`` may be an int or a sequence of ints (sub-stream key).
    """
    rng = np.random.default_rng(seed)
    a = rng.uniform(-scale, scale, size=(dim, dim))
    return OperatorMatrix((a + a.T) / 2, hermitian=True)


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a), initial=0.0))


def build_decomposable_hamiltonian(parts: Sequence[tuple[OperatorMatrix, OperatorMatrix]],
                                   tol: float = COMMUTE_TOL) -> OperatorMatrix:
    """Sum of H_sys^i (x) H_pulse^i, after checking distinct terms commute."""
    if not parts:
        raise ValueError("need at least one (system, pulse) pair")
    terms = []
    for k, (hs, hp) in enumerate(parts):
        _require_hermitian(hs, f"parts[{k}][0]")
        _require_hermitian(hp, f"parts[{k}][1]")
        terms.append(kron_op(hs, hp).entries)
    if any(t.shape != terms[0].shape for t in terms):
        raise DimensionMismatchError("decomposition terms have different shapes")
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            c = commutator_norm(terms[i], terms[j])
            if c > tol:
                raise NonCommutingError(f"terms {i} and {j} do not commute (norm {c:.3e})")
    return OperatorMatrix(sum(terms), hermitian=True)


def reversal_residual(H: OperatorMatrix, t: AntiUnitaryOp) -> float:
    """max |t H t^-1 - H|."""
    if t.dim != H.dim:
        raise DimensionMismatchError(f"reversal dim {t.dim} vs Hamiltonian dim {H.dim}")
    e = np.asarray(H.entries, dtype=np.complex128)
    return float(np.max(np.abs(t.conjugate_operator(e) - e), initial=0.0))


def require_time_reversal_invariant(H: OperatorMatrix, t: AntiUnitaryOp, name: str = "H",
                                    tol: float = REVERSAL_TOL) -> None:
    r = reversal_residual(H, t)
    if r > tol:
        raise TimeReversalError(
            f"{name} is not time-reversal invariant (|t H t^-1 - H| = {r:.3e}); "
            "forward-time emulation of the inverse evolution requires t H t^-1 = H")


def verify_wigner_reversal(H: OperatorMatrix, t: AntiUnitaryOp, psi: Ket, dt: float) -> float:
    """Residual of U(dt) t U(dt)|psi> = t|psi>.

    Evolving forward, reversing, and evolving forward again returns to the
    reversed initial state when t H t^-1 = H.
    """
    require_time_reversal_invariant(H, t)
    u = expm_hermitian(H, dt).entries
    evolved = psi.with_amplitudes(u @ psi.amplitudes)
    back = u @ apply_antiunitary(t, evolved).amplitudes
    return float(np.linalg.norm(back - apply_antiunitary(t, psi).amplitudes))


@dataclass(frozen=True)
class EvolutionStep:
    dt: float
    operator: OperatorMatrix

    @classmethod
    def from_hamiltonian(cls, H: OperatorMatrix, dt: float) -> "EvolutionStep":
        return cls(dt, expm_hermitian(H, dt))


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H_joint = H_sys (x) I + I (x) H_pulse + coupling_strength * H_int."""

    system_part: OperatorMatrix
    pulse_part: OperatorMatrix
    interaction: OperatorMatrix
    coupling_strength: float = 1.0

    def __post_init__(self):
        _require_hermitian(self.system_part, "system_part")
        _require_hermitian(self.pulse_part, "pulse_part")
        _require_hermitian(self.interaction, "interaction")
        n = self.system_dim * self.pulse_dim
        if self.interaction.dim != n:
            raise DimensionMismatchError(
                f"interaction is {self.interaction.dim}-dim, joint space is {n}")

    @property
    def system_dim(self) -> int:
        return self.system_part.dim

    @property
    def pulse_dim(self) -> int:
        return self.pulse_part.dim

    def joint(self) -> OperatorMatrix:
        hs, hp = self.system_part, self.pulse_part
        m = (kron_op(hs, OperatorMatrix.identity(hp.dim)).entries
             + kron_op(OperatorMatrix.identity(hs.dim), hp).entries
             + self.coupling_strength * self.interaction.entries)
        return OperatorMatrix((m + m.conj().T) / 2, hermitian=True)

    def is_real(self) -> bool:
        return self.system_part.is_real and self.pulse_part.is_real and self.interaction.is_real


def generic_coupled_hamiltonian(system_dim: int, pulse_dim: int, seed: int,
                                coupling_strength: float = 1.0,
                                scale: float = 1.0) -> HamiltonianSpec:
    """Seeded real symmetric parts with a dense random interaction."""
    return HamiltonianSpec(
        random_tri_hamiltonian(system_dim, [seed, 0], scale),
        random_tri_hamiltonian(pulse_dim, [seed, 1], scale),
        random_tri_hamiltonian(system_dim * pulse_dim, [seed, 2], scale),
        coupling_strength)


def decoupled_hamiltonian(system_dim: int, pulse_dim: int, seed: int,
                          scale: float = 1.0) -> HamiltonianSpec:
    return HamiltonianSpec(
        random_tri_hamiltonian(system_dim, [seed, 0], scale),
        random_tri_hamiltonian(pulse_dim, [seed, 1], scale),
        OperatorMatrix.zeros(system_dim * pulse_dim), 0.0)


def _random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def decomposable_hamiltonian(system_dim: int, pulse_dim: int, seed: int,
                             coupling_strength: float = 1.0, n_terms: int = 2,
                             scale: float = 1.0) -> HamiltonianSpec:
    """Commuting instance: system parts diagonal, pulse parts share one eigenbasis.

    Every term commutes with every other term, also when embedded on
    different pulse slots, so the resulting protocol is order independent.
    """
    rng = np.random.default_rng([seed, 3])
    q = _random_orthogonal(pulse_dim, rng)

    def pulse_diag():
        m = q @ np.diag(rng.uniform(-scale, scale, pulse_dim)) @ q.T
        return OperatorMatrix((m + m.T) / 2, hermitian=True)

    def sys_diag():
        return OperatorMatrix(np.diag(rng.uniform(-scale, scale, system_dim)), hermitian=True)

    h_sys = sys_diag()
    h_pulse = pulse_diag()
    parts = [(sys_diag(), pulse_diag()) for _ in range(n_terms)]
    return HamiltonianSpec(h_sys, h_pulse, build_decomposable_hamiltonian(parts),
                           coupling_strength)


def block_controlled_hamiltonian(system_dim: int, pulse_dim: int, seed: int,
                                 coupling_strength: float = 1.0,
                                 scale: float = 1.0) -> tuple[HamiltonianSpec, int]:
    """Interaction D (x) h with D = 0 on the first ``k`` levels, 1 on the rest.

    H_sys is block diagonal with respect to the same split, so any system
    state supported on the first block stays in a product with the pulse.
    Returns the Hamiltonian and the block size ``k``.
    """
    k = max(1, system_dim // 2)
    h_sys = np.zeros((system_dim, system_dim))
    h_sys[:k, :k] = random_tri_hamiltonian(k, [seed, 4], scale).entries
    if system_dim > k:
        h_sys[k:, k:] = random_tri_hamiltonian(system_dim - k, [seed, 5], scale).entries
    dmat = np.diag([0.0] * k + [1.0] * (system_dim - k))
    h = random_tri_hamiltonian(pulse_dim, [seed, 6], scale).entries
    return HamiltonianSpec(OperatorMatrix(h_sys, hermitian=True),
                           random_tri_hamiltonian(pulse_dim, [seed, 7], scale),
                           OperatorMatrix(np.kron(dmat, h), hermitian=True),
                           coupling_strength), k
