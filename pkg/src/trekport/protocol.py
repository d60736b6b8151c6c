"""Alice's interrogation cycles, the FILO memory and Bob's reconstruction.

One Alice cycle is R (F(2dt) (x) I) J(dt): the joint propagator J acts on
the system and the pulse at logical slot 0, the pulse is stored, the system
evolves freely, and the register is rotated so the next fresh pulse sits at
slot 0.  Bob undoes this in reverse, either with exact inverse propagators
or by conjugating the register and running forward-time propagators.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .dynamics import HamiltonianSpec, expm_hermitian, require_time_reversal_invariant
from .errors import DimensionMismatchError, MemorySlotError, PreconditionError
from .hilbert import (
    DEFAULT_DIMENSION_CAP,
    SYSTEM,
    AntiUnitaryOp,
    DensityMatrix,
    Ket,
    OperatorMatrix,
    SpaceSpec,
    apply_local,
    check_dimension,
    permute_axes,
    project_onto_basis,
    pulse_label,
    random_ket,
    reduced_matrix,
    tensor_kets,
)

log = logging.getLogger(__name__)

ALICE_PHASES = ("interact", "store", "teleport")
BOB_PHASES = ("free-evolve", "recall", "reverse")
BOB_MODES = ("inverse", "forward_emulation")
ORDERINGS = ("per_cycle", "printed")


# ----------------------------------------------------------------- memory

@dataclass(frozen=True)
class FiloMemory:
    """Slot labels in store order; recall pops from the end."""

    slots: tuple[str, ...] = ()
    side: str = "alice"
    teleported: bool = False
    recalled: tuple[str, ...] = ()

    def store(self, slot: str) -> "FiloMemory":
        if self.side != "alice":
            raise MemorySlotError("only Alice stores pulses")
        if slot in self.slots or slot in self.recalled:
            raise MemorySlotError(f"slot {slot!r} already stored")
        return FiloMemory(self.slots + (slot,), self.side, self.teleported, self.recalled)

    def recall(self) -> tuple[str, "FiloMemory"]:
        if not self.teleported or self.side != "bob":
            raise MemorySlotError("memory has not been teleported to Bob")
        if not self.slots:
            raise MemorySlotError("memory is empty")
        slot = self.slots[-1]
        return slot, FiloMemory(self.slots[:-1], self.side, True, self.recalled + (slot,))

    def __len__(self) -> int:
        return len(self.slots)


def teleport_memory(mem: FiloMemory) -> FiloMemory:
    """Ideal memory channel: amplitudes untouched, ownership moves to Bob."""
    if mem.teleported or mem.side != "alice":
        raise MemorySlotError("memory already teleported")
    return FiloMemory(mem.slots, "bob", True, mem.recalled)


def _require_teleported(mem: FiloMemory) -> None:
    if not mem.teleported or mem.side != "bob":
        raise MemorySlotError("Bob needs a teleported memory")


# ----------------------------------------------------------------- pulses

@dataclass(frozen=True)
class PulseTrain:
    initial_states: tuple[Ket, ...]
    pulse_dim: int

    def __post_init__(self):
        for k in self.initial_states:
            if k.dim != self.pulse_dim:
                raise DimensionMismatchError(f"pulse of dim {k.dim}, expected {self.pulse_dim}")
            if not k.normalized:
                raise ValueError("pulse states must be normalized")

    def __len__(self) -> int:
        return len(self.initial_states)

    @classmethod
    def ground(cls, count: int, pulse_dim: int) -> "PulseTrain":
        return cls(tuple(Ket.basis(pulse_dim, 0, pulse_label(i)) for i in range(count)),
                   pulse_dim)

    @classmethod
    def random(cls, count: int, pulse_dim: int, seed: int, real: bool = False) -> "PulseTrain":
        rng = np.random.default_rng([seed, 17])
        return cls(tuple(random_ket(pulse_dim, rng, pulse_label(i), real) for i in range(count)),
                   pulse_dim)


# ------------------------------------------------------------------ trace

@dataclass(frozen=True)
class TraceRecord:
    step: int
    phase: str
    tick: int
    model_time: float
    system_energy: float
    system_purity: float
    norm: float
    slot: str | None = None


@dataclass
class ProtocolTrace:
    """Append-only record, one entry per dt interval."""

    dt: float
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, phase: str, ket: Ket, h_sys: np.ndarray, slot: str | None = None) -> None:
        rho = reduced_matrix(ket, [SYSTEM])
        tick = self.records[-1].tick + 1 if self.records else 1
        self.records.append(TraceRecord(
            step=len(self.records), phase=phase, tick=tick, model_time=tick * self.dt,
            system_energy=float(np.real(np.sum(h_sys * rho.T))),
            system_purity=float(np.sum(np.abs(rho) ** 2)),
            norm=float(np.linalg.norm(ket.amplitudes)), slot=slot))

    def __len__(self) -> int:
        return len(self.records)

    def phases(self) -> list[str]:
        return [r.phase for r in self.records]


# ------------------------------------------------------------ propagators

@dataclass(frozen=True, eq=False)
class Propagators:
    """Everything a run needs, exponentiated once."""

    h_sys: np.ndarray
    joint: np.ndarray
    joint_inv: np.ndarray
    free: np.ndarray        # system, one dt
    free_inv: np.ndarray

    @classmethod
    def build(cls, H: HamiltonianSpec, dt: float) -> "Propagators":
        j = expm_hermitian(H.joint(), dt).entries
        f = expm_hermitian(H.system_part, dt).entries
        return cls(np.asarray(H.system_part.entries), j, j.conj().T, f, f.conj().T)


# ---------------------------------------------------------- register ops

def _apply(ket: Ket, op: np.ndarray, positions: Sequence[int]) -> Ket:
    return ket.with_amplitudes(apply_local(ket.amplitudes, ket.dims, op, positions))


def _reorder(ket: Ket, order: Sequence[int]) -> Ket:
    return Ket(permute_axes(ket.amplitudes, ket.dims, order),
               tuple(ket.dims[i] for i in order), tuple(ket.labels[i] for i in order),
               ket.normalized)


def rotate_register(joint: Ket, spec: SpaceSpec | None = None) -> Ket:
    """Cyclic left rotation of the pulse factors: (0,1,...,n-1) -> (1,...,n-1,0)."""
    n = len(joint.dims)
    if n < 2:
        raise DimensionMismatchError("register has no pulse factors to rotate")
    return _reorder(joint, [0] + list(range(2, n)) + [1])


def rotate_register_inverse(joint: Ket, spec: SpaceSpec | None = None) -> Ket:
    n = len(joint.dims)
    if n < 2:
        raise DimensionMismatchError("register has no pulse factors to rotate")
    return _reorder(joint, [0, n - 1] + list(range(1, n - 1)))


def canonical_order(ket: Ket) -> Ket:
    """Reorder factors to system first, then pulses by index."""
    def key(i):
        l = ket.labels[i]
        return (-1, "") if l == SYSTEM else (int(l[1:]) if l[1:].isdigit() else 10**9, l)
    order = sorted(range(len(ket.labels)), key=key)
    return ket if order == list(range(len(order))) else _reorder(ket, order)


def initial_register(Y0: Ket, train: PulseTrain, cap: int = DEFAULT_DIMENSION_CAP) -> Ket:
    check_dimension(Y0.dim * train.pulse_dim ** len(train), cap)
    kets = [Y0.relabel((SYSTEM,))] + [k.relabel((pulse_label(i),))
                                      for i, k in enumerate(train.initial_states)]
    return tensor_kets(kets, cap)


# ------------------------------------------------------------------ alice

def _alice_steps(joint: Ket, U_joint: np.ndarray, free_ops) -> Iterator[tuple[str, Ket]]:
    joint = _apply(joint, U_joint, (0, 1))
    yield "interact", joint
    for phase, op in zip(("store", "teleport"), free_ops):
        if op is not None:
            joint = _apply(joint, op, (0,))
        yield phase, joint


def alice_interrogation_cycle(joint: Ket, active_slot: str, U_joint: OperatorMatrix,
                              U_free: OperatorMatrix, mem: FiloMemory) -> tuple[Ket, FiloMemory]:
    """Interact with the pulse at logical slot 0, store it, evolve freely for 2 dt."""
    if active_slot in mem.slots:
        raise MemorySlotError(f"slot {active_slot!r} already stored")
    if len(joint.labels) < 2 or joint.labels[1] != active_slot:
        raise MemorySlotError(f"slot {active_slot!r} is not at the interaction position")
    mem = mem.store(active_slot)
    for _, joint in _alice_steps(joint, U_joint.entries, (U_free.entries, None)):
        pass
    return joint, mem


def check_purification_precondition(system_dim: int, pulse_dim: int, count: int,
                                    allow_subspace: bool) -> None:
    if count * pulse_dim >= system_dim:
        return
    msg = (f"N'*N_phi = {count * pulse_dim} < N_system = {system_dim}: "
           "the pulses cannot carry the full system state")
    if not allow_subspace:
        raise PreconditionError(msg + " (pass allow_subspace=True for subspace experiments)")
    log.warning(msg)


def alice_run(Y0: Ket, train: PulseTrain, H: HamiltonianSpec, dt: float, *,
              cap: int = DEFAULT_DIMENSION_CAP, allow_subspace: bool = False,
              props: Propagators | None = None) -> tuple[Ket, FiloMemory, ProtocolTrace]:
    """Apply N' interrogation cycles; returns (register, memory, trace)."""
    if Y0.dim != H.system_dim or train.pulse_dim != H.pulse_dim:
        raise DimensionMismatchError("state and Hamiltonian dimensions disagree")
    n = len(train)
    check_purification_precondition(Y0.dim, train.pulse_dim, n, allow_subspace)
    joint = initial_register(Y0, train, cap)
    props = props or Propagators.build(H, dt)
    mem = FiloMemory()
    trace = ProtocolTrace(dt)
    for _ in range(n):
        slot = joint.labels[1]
        mem = mem.store(slot)
        for phase, joint in _alice_steps(joint, props.joint, (props.free, props.free)):
            trace.append(phase, joint, props.h_sys, slot)
        joint = rotate_register(joint)
    return joint, mem, trace


def classical_project_report(joint: Ket, spec: SpaceSpec | None = None,
                             mode: str = "deterministic", seed: int | None = None,
                             tie_tol: float = 1e-12) -> tuple[int, Ket, float]:
    """Measure the system in the computational basis and collapse the register.

    Deterministic mode picks the most likely outcome, lowest index on ties.
    """
    probs = np.real(np.diag(reduced_matrix(joint, [SYSTEM])))
    if mode == "deterministic":
        p = int(np.flatnonzero(probs >= probs.max() - tie_tol)[0])
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        w = np.clip(probs, 0, None)
        p = int(rng.choice(len(w), p=w / w.sum()))
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    collapsed, prob = project_onto_basis(joint, SYSTEM, p)
    return p, collapsed, prob


# -------------------------------------------------------------------- bob

def _check_bob_register(register: Ket, memB: FiloMemory) -> None:
    if register.labels[0] != SYSTEM:
        raise DimensionMismatchError("Bob's register must start with the system factor")
    if set(register.labels[1:]) != set(memB.slots):
        raise MemorySlotError(
            f"register pulses {register.labels[1:]} do not match memory {memB.slots}")


def bob_run_inverse(register: Ket, memB: FiloMemory, H: HamiltonianSpec, dt: float, *,
                    trace: ProtocolTrace | None = None,
                    props: Propagators | None = None) -> Ket:
    """Exact inverse of Alice's run: (J^-1 F^-1 R^-1)^N', pulses recalled last-in first-out."""
    _require_teleported(memB)
    _check_bob_register(register, memB)
    props = props or Propagators.build(H, dt)
    ket, mem = register, memB
    for _ in range(len(memB)):
        ket = _apply(ket, props.free_inv, (0,))
        _record(trace, "free-evolve", ket, props)
        slot, mem = mem.recall()
        ket = rotate_register_inverse(ket)
        _expect_slot(ket, slot)
        ket = _apply(ket, props.free_inv, (0,))
        _record(trace, "recall", ket, props, slot)
        ket = _apply(ket, props.joint_inv, (0, 1))
        _record(trace, "reverse", ket, props, slot)
    return ket


def _record(trace, phase, ket, props, slot=None):
    if trace is not None:
        trace.append(phase, ket, props.h_sys, slot)


def _expect_slot(ket: Ket, slot: str) -> None:
    if ket.labels[1] != slot:
        raise MemorySlotError(f"recalled {slot!r} but {ket.labels[1]!r} is at the interaction slot")


def check_reversal_symmetry(H: HamiltonianSpec, t_phi: AntiUnitaryOp,
                            t_sys: AntiUnitaryOp) -> None:
    require_time_reversal_invariant(H.system_part, t_sys, "system Hamiltonian")
    require_time_reversal_invariant(H.joint(), t_sys.kron(t_phi), "joint Hamiltonian")


def bob_run_forward(register: Ket, memB: FiloMemory, H: HamiltonianSpec, dt: float,
                    t_phi: AntiUnitaryOp | None = None, t_sys: AntiUnitaryOp | None = None, *,
                    ordering: str = "per_cycle", trace: ProtocolTrace | None = None,
                    props: Propagators | None = None) -> Ket:
    """Reconstruction with forward-time propagators only.

    The register is reversed once (t on every factor), after which each
    cycle recalls the last stored pulse and applies F(2dt) then J(dt).
    For a time-reversal invariant H the result is t applied to the
    output of :func:`bob_run_inverse`.

    ``ordering="printed"`` instead applies the reversal of the freshly
    recalled pulse after every cycle but the last, with left rotations on a
    register whose pulses are listed in recall order.  The two coincide for
    a single pulse only; the printed form is kept for comparison.
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    _require_teleported(memB)
    _check_bob_register(register, memB)
    t_sys = t_sys or AntiUnitaryOp.conjugation(H.system_dim)
    t_phi = t_phi or AntiUnitaryOp.conjugation(H.pulse_dim)
    check_reversal_symmetry(H, t_phi, t_sys)
    props = props or Propagators.build(H, dt)
    u_sys, u_phi = t_sys.unitary_part.entries, t_phi.unitary_part.entries
    phi_trivial = np.array_equal(u_phi, np.eye(u_phi.shape[0]))

    ket = register
    if t_sys.conjugates:
        ket = ket.with_amplitudes(ket.amplitudes.conj())
    ket = _apply(ket, u_sys, (0,))
    mem = memB
    n = len(memB)

    if ordering == "per_cycle":
        for _ in range(n):
            ket = _apply(ket, props.free, (0,))
            _record(trace, "free-evolve", ket, props)
            slot, mem = mem.recall()
            ket = rotate_register_inverse(ket)
            _expect_slot(ket, slot)
            if not phi_trivial:
                ket = _apply(ket, u_phi, (1,))
            ket = _apply(ket, props.free, (0,))
            _record(trace, "recall", ket, props, slot)
            ket = _apply(ket, props.joint, (0, 1))
            _record(trace, "reverse", ket, props, slot)
        return canonical_order(ket)

    # printed ordering: pulses listed in recall order, then R (J F)(t_phi R J F)^(n-1)
    order = [0] + [ket.labels.index(s) for s in reversed(memB.slots)]
    ket = _reorder(ket, order)
    if not phi_trivial:
        for pos in range(1, n + 1):
            ket = _apply(ket, u_phi, (pos,))
    for c in range(n):
        slot, mem = mem.recall()
        _expect_slot(ket, slot)
        ket = _apply(ket, props.free, (0,))
        _record(trace, "free-evolve", ket, props)
        ket = _apply(ket, props.free, (0,))
        _record(trace, "recall", ket, props, slot)
        ket = _apply(ket, props.joint, (0, 1))
        _record(trace, "reverse", ket, props, slot)
        ket = rotate_register(ket)
        if c < n - 1:
            # reversal of one product-basis factor conjugates every amplitude
            if t_phi.conjugates:
                ket = ket.with_amplitudes(ket.amplitudes.conj())
            ket = _apply(ket, u_phi, (1,))
    return canonical_order(ket)


# ------------------------------------------------------------ reporting

@dataclass
class PipelineReport:
    alice_final_index: int | None
    projection_probability: float
    bob_final_state: Ket
    bob_system: DensityMatrix
    fidelity_to_conjugate: float
    fidelity_to_original: float
    trace: ProtocolTrace
    mode: str
    ordering: str = "per_cycle"
    printed_form_overlap: float | None = None
    target_overlap: float | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("fidelity_to_conjugate", "fidelity_to_original"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{name} = {v} outside [0, 1]")

    @property
    def printed_form_deviates(self) -> bool | None:
        if self.printed_form_overlap is None:
            return None
        return self.printed_form_overlap < 1 - 1e-9
