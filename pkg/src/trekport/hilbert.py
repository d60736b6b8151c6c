"""Dense Hilbert-space primitives over labeled tensor factors.

Convention: row-major Kronecker order, system factor first, then pulse
slots.  A register with dims (N, d, d, d) stores amplitude a[m, i, j, k]
at flat index ((m*d + i)*d + j)*d + k.

Kets carry factor labels.  Relabeling operations (rotation, slot swaps)
move labels together with the amplitudes, so a label always names the same
physical pulse no matter where it currently sits in the factor order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionCapError,
    DimensionMismatchError,
    NonHermitianError,
    UnknownFactorError,
    ZeroProbabilityError,
)

DEFAULT_DIMENSION_CAP = 2**20
SYSTEM = "sys"

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
PSD_TOL = 1e-10


def pulse_label(i: int) -> str:
    return f"p{i}"


def check_dimension(total: int, cap: int = DEFAULT_DIMENSION_CAP) -> None:
    if total > cap:
        raise DimensionCapError(f"joint dimension {total} exceeds cap {cap}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpaceSpec:
    """Shape of a system + N' pulse register."""

    system_dim: int
    pulse_dim: int
    pulse_count: int
    cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        if self.system_dim < 1 or self.pulse_dim < 1:
            raise DimensionMismatchError("system_dim and pulse_dim must be >= 1")
        if self.pulse_count < 0:
            raise DimensionMismatchError("pulse_count must be >= 0")
        # exact integer arithmetic, no overflow for silly pulse counts
        check_dimension(self.system_dim * self.pulse_dim**self.pulse_count, self.cap)

    @property
    def factor_order(self) -> tuple[str, ...]:
        return (SYSTEM,) + tuple(pulse_label(i) for i in range(self.pulse_count))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.system_dim,) + (self.pulse_dim,) * self.pulse_count

    @property
    def total_dim(self) -> int:
        return self.system_dim * self.pulse_dim**self.pulse_count


def _check_labels(dims, labels):
    if len(dims) != len(labels):
        raise DimensionMismatchError(f"{len(dims)} dims but {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise DimensionMismatchError(f"factor labels not unique: {labels}")


@dataclass(frozen=True, eq=False)
class Ket:
    """State vector over labeled tensor factors (amplitudes are read-only)."""

    amplitudes: np.ndarray
    dims: tuple[int, ...] = ()
    labels: tuple[str, ...] = ()
    normalized: bool = True

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        dims = tuple(int(d) for d in self.dims) or (amps.size,)
        labels = tuple(self.labels) or ((SYSTEM,) if len(dims) == 1 else
                                        tuple(f"f{i}" for i in range(len(dims))))
        _check_labels(dims, labels)
        if int(np.prod(dims)) != amps.size:
            raise DimensionMismatchError(
                f"{amps.size} amplitudes do not fit dims {dims}")
        if self.normalized:
            n2 = float(np.vdot(amps, amps).real)
            if abs(n2 - 1.0) > NORM_TOL:
                raise ValueError(f"ket marked normalized has squared norm {n2!r}")
        object.__setattr__(self, "amplitudes", _readonly(amps))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownFactorError(f"unknown factor label {label!r}") from None

    def relabel(self, labels: Sequence[str]) -> "Ket":
        return Ket(self.amplitudes, self.dims, tuple(labels), self.normalized)

    def with_amplitudes(self, amps: np.ndarray, labels=None, dims=None) -> "Ket":
        return Ket(amps, dims or self.dims, labels or self.labels, self.normalized)

    @classmethod
    def basis(cls, dim: int, index: int, label: str = SYSTEM) -> "Ket":
        a = np.zeros(dim, dtype=np.complex128)
        a[index] = 1.0
        return cls(a, (dim,), (label,))

    @classmethod
    def from_vector(cls, vec, label: str = SYSTEM, normalize: bool = False) -> "Ket":
        v = np.asarray(vec, dtype=np.complex128).reshape(-1)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(v, (v.size,), (label,))


def random_ket(dim: int, rng: np.random.Generator, label: str = SYSTEM,
               real: bool = False) -> Ket:
    v = rng.normal(size=dim)
    if not real:
        v = v + 1j * rng.normal(size=dim)
    return Ket.from_vector(v, label, normalize=True)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    dims: tuple[int, ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        m = np.array(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError("density matrix must be square")
        dims = tuple(int(d) for d in self.dims) or (m.shape[0],)
        labels = tuple(self.labels) or ((SYSTEM,) if len(dims) == 1 else
                                        tuple(f"f{i}" for i in range(len(dims))))
        _check_labels(dims, labels)
        if int(np.prod(dims)) != m.shape[0]:
            raise DimensionMismatchError(f"shape {m.shape} does not fit dims {dims}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise NonHermitianError("density matrix not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        if m.shape[0] <= 4096 and np.linalg.eigvalsh(m)[0] < -PSD_TOL:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "entries", _readonly(m))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityMatrix":
        a = ket.amplitudes
        return cls(np.outer(a, a.conj()), ket.dims, ket.labels)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense square operator; flags are verified at construction."""

    entries: np.ndarray
    hermitian: bool = False
    unitary: bool = False
    dims: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.array(self.entries)
        if not np.iscomplexobj(m):
            m = m.astype(np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got {m.shape}")
        if self.dims is not None and int(np.prod(self.dims)) != m.shape[0]:
            raise DimensionMismatchError(f"shape {m.shape} does not fit dims {self.dims}")
        if self.hermitian and m.size and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise NonHermitianError("operator flagged hermitian is not")
        if self.unitary and m.size:
            err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if err > UNITARY_TOL:
                raise ValueError(f"operator flagged unitary deviates by {err:.3e}")
        object.__setattr__(self, "entries", _readonly(m))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.entries) or not np.any(self.entries.imag)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.hermitian, self.unitary, self.dims)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries @ other.entries,
                              unitary=self.unitary and other.unitary, dims=self.dims)

    @classmethod
    def identity(cls, dim: int) -> "OperatorMatrix":
        return cls(np.eye(dim), hermitian=True, unitary=True)

    @classmethod
    def zeros(cls, dim: int) -> "OperatorMatrix":
        return cls(np.zeros((dim, dim)), hermitian=True)


@dataclass(frozen=True, eq=False)
class AntiUnitaryOp:
    """t = U K when ``conjugates`` is true, plain U otherwise."""

    unitary_part: OperatorMatrix
    conjugates: bool = True

    def __post_init__(self):
        u = self.unitary_part
        if not u.unitary:
            raise ValueError("unitary_part must be flagged unitary")
        if self.conjugates:
            # t^2 = U conj(U) has to be a pure phase for an involutive reversal
            sq = u.entries @ u.entries.conj()
            phase = sq[0, 0]
            if abs(abs(phase) - 1) > UNITARY_TOL or \
                    np.max(np.abs(sq - phase * np.eye(u.dim))) > UNITARY_TOL:
                raise ValueError("antiunitary squared is not a global phase")

    @property
    def dim(self) -> int:
        return self.unitary_part.dim

    @property
    def is_plain_conjugation(self) -> bool:
        e = self.unitary_part.entries
        return self.conjugates and np.array_equal(e, np.eye(e.shape[0]))

    @classmethod
    def conjugation(cls, dim: int) -> "AntiUnitaryOp":
        return cls(OperatorMatrix.identity(dim), True)

    def kron(self, other: "AntiUnitaryOp") -> "AntiUnitaryOp":
        if self.conjugates != other.conjugates:
            raise ValueError("cannot combine unitary and antiunitary factors")
        return AntiUnitaryOp(kron_op(self.unitary_part, other.unitary_part),
                             self.conjugates)

    def conjugate_operator(self, h: np.ndarray) -> np.ndarray:
        """Return t h t^-1 as a plain matrix."""
        u = self.unitary_part.entries
        hh = h.conj() if self.conjugates else h
        return u @ hh @ u.conj().T


# ---------------------------------------------------------------- kernels

def apply_local(amplitudes: np.ndarray, dims: Sequence[int], op: np.ndarray,
                positions: Sequence[int]) -> np.ndarray:
    """Apply ``op`` to the factors at ``positions`` of a flat amplitude vector.

    ``op`` acts on the Kronecker product of those factors in the listed order.
    """
    positions = list(positions)
    front = int(np.prod([dims[p] for p in positions]))
    if op.shape != (front, front):
        raise DimensionMismatchError(f"operator {op.shape} vs local dim {front}")
    if positions == list(range(len(positions))):
        # already leading factors: a plain matmul on a 2-d view
        return (op @ amplitudes.reshape(front, -1)).reshape(-1)
    t = amplitudes.reshape(dims)
    lead = list(range(len(positions)))
    t = np.moveaxis(t, positions, lead)
    shape = t.shape
    t = (op @ t.reshape(front, -1)).reshape(shape)
    return np.moveaxis(t, lead, positions).reshape(-1)


def permute_axes(amplitudes: np.ndarray, dims: Sequence[int],
                 order: Sequence[int]) -> np.ndarray:
    """New factor k is old factor order[k]."""
    t = amplitudes.reshape(dims)
    return np.ascontiguousarray(np.transpose(t, order)).reshape(-1)


# ------------------------------------------------------------- operations

def tensor_ket(a: Ket, b: Ket, cap: int = DEFAULT_DIMENSION_CAP) -> Ket:
    if not (a.normalized and b.normalized):
        raise ValueError("tensor_ket expects normalized inputs")
    check_dimension(a.dim * b.dim, cap)
    return Ket(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims,
               a.labels + b.labels)


def tensor_kets(kets: Iterable[Ket], cap: int = DEFAULT_DIMENSION_CAP) -> Ket:
    kets = list(kets)
    total = int(np.prod([k.dim for k in kets]))
    check_dimension(total, cap)
    out = kets[0]
    for k in kets[1:]:
        out = tensor_ket(out, k, cap)
    return out


def kron_op(A: OperatorMatrix, B: OperatorMatrix,
            cap: int = DEFAULT_DIMENSION_CAP) -> OperatorMatrix:
    check_dimension(A.dim * B.dim, cap)
    dims = None
    if A.dims is not None and B.dims is not None:
        dims = tuple(A.dims) + tuple(B.dims)
    return OperatorMatrix(np.kron(A.entries, B.entries),
                          hermitian=A.hermitian and B.hermitian,
                          unitary=A.unitary and B.unitary, dims=dims)


def inner_product(a: Ket, b: Ket) -> complex:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimensions {a.dim} and {b.dim} differ")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def apply_antiunitary(t: AntiUnitaryOp, state: Ket) -> Ket:
    if t.dim != state.dim:
        raise DimensionMismatchError(f"operator dim {t.dim} vs state dim {state.dim}")
    a = state.amplitudes.conj() if t.conjugates else state.amplitudes
    return state.with_amplitudes(t.unitary_part.entries @ a)


def apply_operator(op: OperatorMatrix, state: Ket, labels: Sequence[str] | None = None) -> Ket:
    """Apply ``op`` to the named factors (all factors when ``labels`` is None)."""
    if labels is None:
        if op.dim != state.dim:
            raise DimensionMismatchError(f"operator dim {op.dim} vs state dim {state.dim}")
        return state.with_amplitudes(op.entries @ state.amplitudes)
    pos = [state.position(l) for l in labels]
    return state.with_amplitudes(apply_local(state.amplitudes, state.dims, op.entries, pos))


def reduced_matrix(state: Ket, keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix of a pure register, as a plain array."""
    pos = [state.position(l) for l in keep]
    kdim = int(np.prod([state.dims[p] for p in pos]))
    t = np.moveaxis(state.tensor(), pos, list(range(len(pos)))).reshape(kdim, -1)
    rho = t @ t.conj().T
    return (rho + rho.conj().T) / 2


def reduced_state(state: Ket, keep: Sequence[str]) -> DensityMatrix:
    pos = [state.position(l) for l in keep]
    return DensityMatrix(reduced_matrix(state, keep),
                         tuple(state.dims[p] for p in pos), tuple(keep))


def partial_trace(rho: DensityMatrix, keep: Sequence[str],
                  spec: SpaceSpec | None = None) -> DensityMatrix:
    """Trace out every factor of ``rho`` not listed in ``keep``."""
    if spec is not None and rho.dim != spec.total_dim:
        raise DimensionMismatchError("rho is not defined on the spec's joint space")
    for l in keep:
        if l not in rho.labels:
            raise UnknownFactorError(f"unknown factor label {l!r}")
    n = len(rho.dims)
    kp = [rho.labels.index(l) for l in keep]
    tp = [i for i in range(n) if i not in kp]
    kdim = int(np.prod([rho.dims[i] for i in kp]))
    tdim = int(np.prod([rho.dims[i] for i in tp]))
    t = rho.entries.reshape(rho.dims + rho.dims)
    t = np.transpose(t, kp + tp + [n + i for i in kp] + [n + i for i in tp])
    red = np.einsum("ajbj->ab", t.reshape(kdim, tdim, kdim, tdim))
    return DensityMatrix((red + red.conj().T) / 2,
                         tuple(rho.dims[i] for i in kp), tuple(keep))


def project_onto_basis(state: Ket, factor: str, p: int,
                       min_probability: float = 1e-15) -> tuple[Ket, float]:
    """Collapse ``factor`` onto basis index ``p``; returns (renormalized, probability)."""
    pos = state.position(factor)
    if not 0 <= p < state.dims[pos]:
        raise IndexError(f"basis index {p} out of range for factor {factor!r}")
    t = np.moveaxis(state.tensor(), pos, 0)
    out = np.zeros_like(t)
    out[p] = t[p]
    prob = float(np.vdot(out[p], out[p]).real)
    if prob <= min_probability:
        raise ZeroProbabilityError(f"outcome {p} on {factor!r} has probability {prob:.3e}")
    out = np.moveaxis(out, 0, pos).reshape(-1) / np.sqrt(prob)
    return Ket(out, state.dims, state.labels), prob
