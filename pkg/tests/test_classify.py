import numpy as np
import pytest

from oracles import embed, permutation_matrix, propagator, random_unit
from trekport.classify import (
    bob_run_recycled,
    check_commuting_decomposition,
    classify_type,
    permutation_op,
)
from trekport.dynamics import decomposable_hamiltonian, decoupled_hamiltonian, generic_coupled_hamiltonian
from trekport.errors import DimensionMismatchError
from trekport.hilbert import SYSTEM, Ket, OperatorMatrix, SpaceSpec, reduced_matrix
from trekport.protocol import PulseTrain, alice_run, bob_run_inverse, canonical_order, teleport_memory

DT = 0.1


def inverse_matrix(H, nprime):
    """Full-space O_B: for positions N'..1, apply F^-1(2dt) on the system then J^-1."""
    dims = [H.system_dim] + [H.pulse_dim] * nprime
    f2 = propagator(H.system_part.entries, -2 * DT)
    j = propagator(H.joint().entries, -DT)
    o = np.eye(int(np.prod(dims)), dtype=complex)
    for pos in range(nprime, 0, -1):
        o = embed(j, dims, [0, pos]) @ embed(f2, dims, [0]) @ o
    return o, dims


def swap_matrix(dims, i, j):
    order = list(range(len(dims)))
    order[i + 1], order[j + 1] = order[j + 1], order[i + 1]
    return permutation_matrix(dims, order)


@pytest.mark.parametrize("seed", range(6))
def test_decomposable_is_type1(seed):
    H = decomposable_hamiltonian(3, 2, seed)
    r = classify_type(H, DT, 3, seed=seed)
    assert r.kind == "type1"
    assert r.residual <= 1e-8
    assert r.witness is None
    assert r.trials == 3 * 16


@pytest.mark.parametrize("seed", range(6))
def test_generic_is_type2(seed):
    H = generic_coupled_hamiltonian(3, 2, seed)
    r = classify_type(H, DT, 3, seed=seed)
    assert r.kind == "type2"
    assert r.residual >= 1e-3
    assert r.witness in [(0, 1), (0, 2), (1, 2)]


@pytest.mark.parametrize("maker,seed", [(generic_coupled_hamiltonian, 0), (generic_coupled_hamiltonian, 1),
                                        (decomposable_hamiltonian, 2), (decoupled_hamiltonian, 3)])
def test_residual_bounded_by_full_matrix_commutator(maker, seed):
    H = maker(2, 2, seed)
    o, dims = inverse_matrix(H, 3)
    worst = 0.0
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        p = swap_matrix(dims, i, j)
        worst = max(worst, np.linalg.norm(o @ p - p @ o, 2))
    r = classify_type(H, DT, 3, seed=seed)
    assert r.residual <= worst + 1e-12
    assert (r.kind == "type2") == (worst > 1e-8)


def test_single_pulse_is_trivially_type1():
    r = classify_type(generic_coupled_hamiltonian(3, 2, 0), DT, 1)
    assert r.kind == "type1" and r.trials == 0


def test_classify_spec_mismatch():
    with pytest.raises(DimensionMismatchError):
        classify_type(generic_coupled_hamiltonian(3, 2, 0), DT, 3, SpaceSpec(3, 2, 2))


def test_classify_is_seed_reproducible():
    H = generic_coupled_hamiltonian(3, 2, 9)
    a = classify_type(H, DT, 3, seed=4)
    b = classify_type(H, DT, 3, seed=4)
    assert a == b


def test_permutation_op_swaps_labels_and_validates():
    spec = SpaceSpec(2, 2, 3)
    perm = permutation_op(2, 0, spec)
    ket = Ket(random_unit(np.random.default_rng(0), 16), spec.dims, spec.factor_order)
    out = perm.apply(ket)
    assert out.labels == ("sys", "p2", "p1", "p0")
    assert np.allclose(out.amplitudes, swap_matrix(list(spec.dims), 0, 2) @ ket.amplitudes)
    for bad in [(1, 1), (0, 3), (-1, 0)]:
        with pytest.raises(ValueError):
            permutation_op(*bad, spec)


def test_check_commuting_decomposition():
    z = OperatorMatrix(np.diag([1.0, -1.0]), hermitian=True)
    i2 = OperatorMatrix.identity(2)
    x = OperatorMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), hermitian=True)
    ok, worst = check_commuting_decomposition([z, i2])
    assert ok and worst == 0.0
    ok, worst = check_commuting_decomposition([z, x])
    assert not ok and worst == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(4))
def test_recycled_memory_matches_filo_for_type1(seed):
    H = decomposable_hamiltonian(3, 2, seed)
    y0 = Ket(random_unit(np.random.default_rng(seed), 3))
    reg, mem, _ = alice_run(y0, PulseTrain.random(3, 2, seed), H, DT, allow_subspace=True)
    filo = canonical_order(bob_run_inverse(reg, teleport_memory(mem), H, DT))
    fifo = canonical_order(bob_run_recycled(reg, H, DT))
    assert np.max(np.abs(reduced_matrix(filo, [SYSTEM]) - reduced_matrix(fifo, [SYSTEM]))) <= 1e-9
    assert np.max(np.abs(filo.amplitudes - fifo.amplitudes)) <= 1e-9


def test_recycled_memory_differs_for_type2():
    H = generic_coupled_hamiltonian(3, 2, 1)
    y0 = Ket(random_unit(np.random.default_rng(1), 3))
    reg, mem, _ = alice_run(y0, PulseTrain.random(3, 2, 1), H, DT, allow_subspace=True)
    filo = canonical_order(bob_run_inverse(reg, teleport_memory(mem), H, DT))
    fifo = canonical_order(bob_run_recycled(reg, H, DT))
    assert np.max(np.abs(filo.amplitudes - fifo.amplitudes)) > 1e-6
