"""Pulse-order sensitivity: type-1 (order immaterial) versus type-2 protocols.

Positions, not labels, matter here: the operators below act on register
positions, and a slot swap is a plain axis permutation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSpec, commutator_norm
from .errors import DimensionMismatchError
from .hilbert import DEFAULT_DIMENSION_CAP, Ket, OperatorMatrix, SpaceSpec, apply_local, permute_axes
from .protocol import Propagators, _apply, _reorder

DEFAULT_THRESHOLD = 1e-8
DEFAULT_PROBES = 16


@dataclass(frozen=True)
class RegisterPermutation:
    """Exchange of pulse slots i and j (factor positions i + 1 and j + 1)."""

    i: int
    j: int
    n_factors: int

    @property
    def axes(self) -> list[int]:
        order = list(range(self.n_factors))
        a, b = self.i + 1, self.j + 1
        order[a], order[b] = order[b], order[a]
        return order

    def apply(self, ket: Ket) -> Ket:
        return _reorder(ket, self.axes)

    def apply_array(self, amps: np.ndarray, dims: Sequence[int]) -> np.ndarray:
        return permute_axes(amps, dims, self.axes)


def permutation_op(i: int, j: int, spec: SpaceSpec) -> RegisterPermutation:
    n = spec.pulse_count
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"invalid slot pair ({i}, {j}) for {n} pulses")
    return RegisterPermutation(min(i, j), max(i, j), n + 1)


@dataclass(frozen=True)
class ClassificationResult:
    kind: str
    witness: tuple[int, int] | None
    residual: float
    trials: int

    def __post_init__(self):
        if self.kind not in ("type1", "type2"):
            raise ValueError(self.kind)


def inverse_run_positional(amps: np.ndarray, dims: Sequence[int], props: Propagators,
                           order: Sequence[int]) -> np.ndarray:
    """Apply J^-1 F^-1(2dt) to (system, position) for each position in ``order``."""
    f2 = props.free_inv @ props.free_inv
    for pos in order:
        amps = apply_local(amps, dims, f2, [0])
        amps = apply_local(amps, dims, props.joint_inv, [0, pos])
    return amps


def classify_type(H: HamiltonianSpec, dt: float, Nprime: int, spec: SpaceSpec | None = None,
                  threshold: float = DEFAULT_THRESHOLD, probes: int = DEFAULT_PROBES,
                  seed: int = 0) -> ClassificationResult:
    """Decide whether swapping two pulses changes Bob's inverse run.

    For every slot pair the residual is max over random probes of
    |O_B P_ij psi - P_ij O_B psi|, with O_B the last-in first-out inverse
    run.  A zero residual for all pairs means pulse order is immaterial.
    """
    if spec is None:
        spec = SpaceSpec(H.system_dim, H.pulse_dim, Nprime)
    if (spec.system_dim, spec.pulse_dim, spec.pulse_count) != (H.system_dim, H.pulse_dim, Nprime):
        raise DimensionMismatchError("spec does not match Hamiltonian / pulse count")
    if Nprime < 2:
        return ClassificationResult("type1", None, 0.0, 0)
    dims = spec.dims
    props = Propagators.build(H, dt)
    rng = np.random.default_rng([seed, 23])
    order = list(range(Nprime, 0, -1))
    worst, witness, trials = 0.0, None, 0
    panel = []
    for _ in range(probes):
        v = rng.normal(size=spec.total_dim) + 1j * rng.normal(size=spec.total_dim)
        v /= np.linalg.norm(v)
        panel.append((v, inverse_run_positional(v, dims, props, order)))
    for i in range(Nprime):
        for j in range(i + 1, Nprime):
            perm = permutation_op(i, j, spec)
            for v, ov in panel:
                lhs = inverse_run_positional(perm.apply_array(v, dims), dims, props, order)
                r = float(np.linalg.norm(lhs - perm.apply_array(ov, dims)))
                trials += 1
                if r > worst:
                    worst, witness = r, (i, j)
    kind = "type2" if worst > threshold else "type1"
    return ClassificationResult(kind, witness if kind == "type2" else None, worst, trials)


def check_commuting_decomposition(parts: Sequence[OperatorMatrix],
                                  tol: float = 1e-10) -> tuple[bool, float]:
    """Do distinct parts commute pairwise?  Returns (verdict, max commutator norm)."""
    if not parts:
        return True, 0.0
    n = parts[0].dim
    if any(p.dim != n for p in parts):
        raise DimensionMismatchError("parts have different dimensions")
    worst = 0.0
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            worst = max(worst, commutator_norm(np.asarray(parts[a].entries),
                                               np.asarray(parts[b].entries)))
    return worst <= tol, worst


def bob_run_recycled(register: Ket, H: HamiltonianSpec, dt: float,
                     props: Propagators | None = None) -> Ket:
    """Inverse run with a one-slot memory: pulses are consumed in store order.

    With a single recycled slot Bob handles each pulse as soon as it arrives,
    so the pulses are undone first-in first-out.  For a type-1 protocol this
    agrees with the full last-in first-out run.
    """
    props = props or Propagators.build(H, dt)
    f2 = props.free_inv @ props.free_inv
    ket = register
    for label in sorted(register.labels[1:], key=lambda l: int(l[1:])):
        ket = _apply(ket, f2, (0,))
        ket = _apply(ket, props.joint_inv, (0, ket.position(label)))
    return ket
