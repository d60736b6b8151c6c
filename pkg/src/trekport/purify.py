"""Reversible purification with cold pulses and partial swaps.

Levels of H_sys are ranked (target first, then by energy).  Each cycle a
ground-state pulse of dimension d is coupled to the system through a cascade
of two-level blocks |r, 0> <-> |r - j, j> with j = min(r, d - 1): population
in rank r drops by up to d - 1 ranks while the pulse absorbs the difference.
exp(-i theta G) moves a fraction sin(theta)^2 of every block per cycle, so
theta = pi/2 is a full swap.  A diagonal compensation term makes every block
degenerate under the free part of the joint Hamiltonian, which keeps the
transfer exactly sin(theta)^2 for any H_sys.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSpec, expm_hermitian, _require_hermitian
from .errors import DimensionMismatchError, ParameterMismatchError
from .hilbert import (
    DEFAULT_DIMENSION_CAP,
    SYSTEM,
    Ket,
    OperatorMatrix,
    SpaceSpec,
    inner_product,
    reduced_matrix,
)
from .protocol import (
    FiloMemory,
    Propagators,
    PulseTrain,
    _apply,
    alice_interrogation_cycle,
    initial_register,
    rotate_register,
    rotate_register_inverse,
)

CONVERGENCE_TOL = 1e-6


def cascade_pairs(system_dim: int, pulse_dim: int) -> list[tuple[int, int, int]]:
    """(source rank, destination rank, pulse level) for every coupled block."""
    if pulse_dim < 2:
        return []
    return [(r, r - min(r, pulse_dim - 1), min(r, pulse_dim - 1))
            for r in range(1, system_dim)]


def partial_swap_generator(system_dim: int, pulse_dim: int) -> OperatorMatrix:
    """Real symmetric generator G in the (level rank) x (pulse) product basis."""
    n = system_dim * pulse_dim
    g = np.zeros((n, n))
    for src, dst, j in cascade_pairs(system_dim, pulse_dim):
        a, b = src * pulse_dim, dst * pulse_dim + j
        g[a, b] = g[b, a] = 1.0
    return OperatorMatrix(g, hermitian=True)


def _eigensystem(H_sys: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(H_sys.entries)
    if not np.any(e - np.diag(np.diag(e))):
        # diagonal: keep the computational basis and its index order
        return np.real(np.diag(e)).copy(), np.eye(e.shape[0])
    if H_sys.is_real:
        return np.linalg.eigh(np.real(e))
    return np.linalg.eigh(e)


@dataclass(frozen=True, eq=False)
class ColdSwapModel:
    hamiltonian: HamiltonianSpec
    target_index: int
    target_state: np.ndarray
    target_energy: float
    level_order: tuple[int, ...]


def default_level_order(energies: np.ndarray, target_index: int) -> tuple[int, ...]:
    rest = [int(i) for i in np.argsort(energies, kind="stable") if i != target_index]
    return (target_index, *rest)


def cold_swap_hamiltonian(H_sys: OperatorMatrix, pulse_dim: int, theta: float, dt: float,
                          target_index: int | None = None,
                          level_order: Sequence[int] | None = None) -> ColdSwapModel:
    """Joint Hamiltonian whose dt-propagator performs the cascade partial swap.

    ``target_index`` and ``level_order`` refer to eigenvectors of H_sys; for a
    diagonal H_sys these are computational basis indices.
    """
    _require_hermitian(H_sys, "H_sys")
    energies, vecs = _eigensystem(H_sys)
    n, d = H_sys.dim, pulse_dim
    if target_index is None:
        target_index = int(np.argmin(energies))
    order = tuple(level_order) if level_order is not None else \
        default_level_order(energies, target_index)
    if sorted(order) != list(range(n)) or order[0] != target_index:
        raise ParameterMismatchError("level_order must be a permutation starting at the target")
    w = vecs[:, list(order)]
    e = energies[list(order)]
    comp = np.zeros(n * d)
    for src, dst, j in cascade_pairs(n, d):
        comp[dst * d + j] = e[src] - e[dst]
    t = np.kron(w, np.eye(d))
    g = t @ partial_swap_generator(n, d).entries @ t.conj().T
    c = t @ np.diag(comp) @ t.conj().T
    h_int = (theta / dt) * g + c
    h_int = (h_int + h_int.conj().T) / 2
    ham = HamiltonianSpec(H_sys, OperatorMatrix.zeros(d),
                          OperatorMatrix(h_int, hermitian=True), 1.0)
    return ColdSwapModel(ham, target_index, vecs[:, target_index].copy(),
                         float(energies[target_index]), order)


# ------------------------------------------------------------------ trace

@dataclass(frozen=True)
class PurificationRecord:
    cycle: int
    energy: float
    target_overlap: float


@dataclass
class PurificationTrace:
    target_index: int
    target_energy: float
    tol: float = CONVERGENCE_TOL
    cycles: list[PurificationRecord] = field(default_factory=list)

    @property
    def converged_at(self) -> int | None:
        for r in self.cycles:
            if r.target_overlap >= 1 - self.tol:
                return r.cycle
        return None

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.cycles])

    @property
    def overlaps(self) -> np.ndarray:
        return np.array([r.target_overlap for r in self.cycles])

    def add(self, cycle: int, rho: np.ndarray, h_sys: np.ndarray, target: np.ndarray) -> None:
        energy = float(np.real(np.sum(h_sys * rho.T)))
        overlap = float(np.real(np.vdot(target, rho @ target)))
        self.cycles.append(PurificationRecord(cycle, energy, min(max(overlap, 0.0), 1.0)))


def reduced_energy(joint: Ket, spec: SpaceSpec | None, H_sys: OperatorMatrix) -> float:
    _require_hermitian(H_sys, "H_sys")
    rho = reduced_matrix(joint, [SYSTEM])
    if rho.shape != H_sys.entries.shape:
        raise DimensionMismatchError("H_sys does not match the system factor")
    val = np.trace(np.asarray(H_sys.entries) @ rho)
    assert abs(val.imag) <= 1e-12, val
    return float(val.real)


def check_convergence(trace: PurificationTrace, tol: float | None = None) -> bool:
    if not trace.cycles:
        raise ValueError("empty purification trace")
    tol = trace.tol if tol is None else tol
    return trace.cycles[-1].target_overlap >= 1 - tol


# -------------------------------------------------------------------- run

@dataclass(frozen=True, eq=False)
class PurificationParams:
    """Everything needed to replay (or undo) a purification run.

    ``stages`` is a sequence of (cycles, level_order) pairs; None means a
    single stage of ``nprime`` cycles in energy order.
    """

    Y0: Ket
    nprime: int
    theta: float
    H_sys: OperatorMatrix
    dt: float
    target_index: int | None = None
    pulse_dim: int = 2
    stages: tuple | None = None

    def stage_plan(self) -> list[tuple[int, tuple[int, ...] | None]]:
        if self.stages is None:
            return [(self.nprime, None)]
        plan = [(int(n), tuple(o) if o is not None else None) for n, o in self.stages]
        if sum(n for n, _ in plan) != self.nprime:
            raise ParameterMismatchError("stage cycle counts do not add up to nprime")
        return plan

    def models(self) -> list[tuple[int, ColdSwapModel]]:
        return [(n, cold_swap_hamiltonian(self.H_sys, self.pulse_dim, self.theta, self.dt,
                                          self.target_index, order))
                for n, order in self.stage_plan()]


def purification_run(Y0: Ket, Nprime: int, theta: float, H_sys: OperatorMatrix, dt: float,
                     target_index: int | None = None, *, pulse_dim: int = 2,
                     stages=None, tol: float = CONVERGENCE_TOL,
                     cap: int = DEFAULT_DIMENSION_CAP) -> tuple[Ket, FiloMemory, PurificationTrace]:
    """Full-register run with N' ground-state pulses; every step is unitary."""
    params = PurificationParams(Y0, Nprime, theta, H_sys, dt, target_index, pulse_dim, stages)
    models = params.models()
    first = models[0][1]
    joint = initial_register(Y0, PulseTrain.ground(Nprime, pulse_dim), cap)
    h = np.asarray(H_sys.entries)
    trace = PurificationTrace(first.target_index, first.target_energy, tol)
    trace.add(0, reduced_matrix(joint, [SYSTEM]), h, first.target_state)
    mem = FiloMemory()
    cycle = 0
    for n, model in models:
        props = Propagators.build(model.hamiltonian, dt)
        u_joint = OperatorMatrix(props.joint)
        u_free = OperatorMatrix(props.free @ props.free)
        for _ in range(n):
            joint, mem = alice_interrogation_cycle(joint, joint.labels[1], u_joint, u_free, mem)
            joint = rotate_register(joint)
            cycle += 1
            trace.add(cycle, reduced_matrix(joint, [SYSTEM]), h, model.target_state)
    return joint, mem, trace


def reversibility_check(joint_final: Ket, mem: FiloMemory, params: PurificationParams) -> float:
    """Undo the run with exact inverse propagators; returns |<initial|undone>|."""
    if len(mem.slots) != params.nprime or len(joint_final.dims) != params.nprime + 1:
        raise ParameterMismatchError("memory / register do not match nprime")
    if joint_final.dims[0] != params.H_sys.dim:
        raise ParameterMismatchError("register system factor does not match H_sys")
    initial = initial_register(params.Y0, PulseTrain.ground(params.nprime, params.pulse_dim))
    if joint_final.dim != initial.dim:
        raise ParameterMismatchError("register dimension does not match parameters")
    ket = joint_final
    slots = list(mem.slots)
    for n, model in reversed(params.models()):
        props = Propagators.build(model.hamiltonian, params.dt)
        free2_inv = props.free_inv @ props.free_inv
        for _ in range(n):
            ket = rotate_register_inverse(ket)
            if ket.labels[1] != slots.pop():
                raise ParameterMismatchError("memory order does not match register")
            ket = _apply(ket, free2_inv, (0,))
            ket = _apply(ket, props.joint_inv, (0, 1))
    return abs(inner_product(initial, ket))


def reduced_purification_trace(Y0: Ket, Nprime: int, theta: float, H_sys: OperatorMatrix,
                               dt: float, target_index: int | None = None, *,
                               pulse_dim: int = 2, stages=None,
                               tol: float = CONVERGENCE_TOL) -> PurificationTrace:
    """Same per-cycle energies and overlaps, from the system density matrix alone.

    Fresh pulses never meet the system twice, so the reduced state follows the
    channel rho -> sum_j K_j rho K_j^dag with K_j = <j|(F(2dt) x I) J|0>.
    Memory cost is independent of N', which makes long runs cheap to chart.
    """
    params = PurificationParams(Y0, Nprime, theta, H_sys, dt, target_index, pulse_dim, stages)
    models = params.models()
    first = models[0][1]
    h = np.asarray(H_sys.entries)
    n, d = H_sys.dim, pulse_dim
    rho = np.outer(Y0.amplitudes, Y0.amplitudes.conj())
    trace = PurificationTrace(first.target_index, first.target_energy, tol)
    trace.add(0, rho, h, first.target_state)
    cycle = 0
    for count, model in models:
        props = Propagators.build(model.hamiltonian, dt)
        step = np.kron(props.free @ props.free, np.eye(d)) @ props.joint
        kraus = [step.reshape(n, d, n, d)[:, j, :, 0] for j in range(d)]
        for _ in range(count):
            rho = sum(k @ rho @ k.conj().T for k in kraus)
            rho = (rho + rho.conj().T) / 2
            cycle += 1
            trace.add(cycle, rho, h, model.target_state)
    return trace
