import numpy as np
import pytest

from oracles import propagator, random_unit
from trekport.analysis import (
    best_teleport_fidelity,
    pulse_to_system_map,
    reconstruct_from_pulse,
    reconstruction_fidelity,
    schmidt_coefficients,
    separable_reconstruction,
    single_cycle_coefficients,
    teleportable_subspace,
    verify_duplication_structure,
)
from trekport.dynamics import block_controlled_hamiltonian, decoupled_hamiltonian, generic_coupled_hamiltonian
from trekport.errors import DimensionMismatchError, UnknownFactorError
from trekport.hilbert import DensityMatrix, Ket, SpaceSpec

DT = 0.1


def cycle_matrix(H):
    """(F(2dt) x I) J as a full matrix from the Taylor oracle."""
    d = H.pulse_dim
    f2 = propagator(H.system_part.entries, 2 * DT)
    return np.kron(f2, np.eye(d)) @ propagator(H.joint().entries, DT)


def test_fidelity_modes():
    v = np.array([1, 1j]) / np.sqrt(2)
    k = Ket(v)
    assert reconstruction_fidelity(k, k) == pytest.approx(1.0)
    assert reconstruction_fidelity(k, Ket(v.conj())) == pytest.approx(0.0, abs=1e-15)
    assert reconstruction_fidelity(k, Ket(v.conj()), "conjugate") == pytest.approx(1.0)
    rho = DensityMatrix(np.eye(2) / 2)
    assert reconstruction_fidelity(k, rho) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        reconstruction_fidelity(k, k, "mirror")
    with pytest.raises(DimensionMismatchError):
        reconstruction_fidelity(k, Ket.basis(3, 0))


@pytest.mark.parametrize("n,d,p,seed", [(3, 2, 0, 0), (4, 2, 2, 1), (4, 3, 1, 2), (5, 3, 4, 3)])
def test_pulse_to_system_map_matches_matrix_oracle(n, d, p, seed):
    H = generic_coupled_hamiltonian(n, d, seed)
    inv = np.linalg.inv(cycle_matrix(H))
    expect = np.zeros((n, d), dtype=complex)
    for m in range(n):
        for j in range(d):
            expect[m, j] = sum(inv[m * d + k, p * d + j] for k in range(d))
    assert np.max(np.abs(pulse_to_system_map(H, DT, p) - expect)) <= 1e-10


@pytest.mark.parametrize("n,d,seed", [(n, d, s) for s, (n, d) in enumerate(
    [(4, 2), (5, 2), (6, 3), (8, 2), (7, 3), (4, 3)])])
def test_teleportable_subspace_bound_and_members(n, d, seed):
    H = generic_coupled_hamiltonian(n, d, seed)
    rng = np.random.default_rng(seed)
    rep = teleportable_subspace(None, H, DT, 1)
    assert rep.dimension <= d
    q = rep.basis_matrix
    assert np.allclose(q.conj().T @ q, np.eye(rep.dimension), atol=1e-12)
    for b, beta in zip(rep.basis, rep.preimages):
        assert reconstruction_fidelity(b, reconstruct_from_pulse(beta, H, DT, 1)) >= 1 - 1e-9
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v -= q @ (q.conj().T @ v)
    assert best_teleport_fidelity(rep, Ket(v / np.linalg.norm(v))) < 1 - 1e-3


def test_best_fidelity_is_achieved_by_some_pulse():
    # the bound from projecting onto the subspace is attained by the lstsq pulse
    H = generic_coupled_hamiltonian(5, 2, 7)
    rng = np.random.default_rng(7)
    rep = teleportable_subspace(None, H, DT, 0)
    target = Ket(random_unit(rng, 5))
    bound = best_teleport_fidelity(rep, target)
    a = pulse_to_system_map(H, DT, 0)
    q = rep.basis_matrix
    proj = q @ (q.conj().T @ target.amplitudes)
    beta, *_ = np.linalg.lstsq(a, proj, rcond=None)
    got = reconstruction_fidelity(target, reconstruct_from_pulse(beta, H, DT, 0))
    assert got == pytest.approx(bound, abs=1e-10)


def test_decoupled_subspace_is_one_dimensional():
    H = decoupled_hamiltonian(4, 3, 0)
    rep = teleportable_subspace(Ket(random_unit(np.random.default_rng(0), 3), (3,), ("p0",)), H, DT, 2)
    assert rep.dimension == 1
    # the single reachable state is F(-2dt) exp(i H_sys dt) e_p
    u = propagator(H.system_part.entries, -3 * DT)
    expect = Ket(u[:, 2])
    assert reconstruction_fidelity(expect, rep.basis[0]) == pytest.approx(1.0, abs=1e-12)
    assert reconstruction_fidelity(expect, rep.pulse0_image) == pytest.approx(1.0, abs=1e-12)


def test_subspace_rejects_multi_cycle_spec():
    with pytest.raises(ValueError):
        teleportable_subspace(None, generic_coupled_hamiltonian(3, 2, 0), DT, 0, SpaceSpec(3, 2, 2))


def test_near_singular_map_warns():
    H = generic_coupled_hamiltonian(4, 2, 0, coupling_strength=1e-7)
    # second singular value ~5e-9: above the rank cutoff, below 1e-8 relative
    with pytest.warns(RuntimeWarning, match="condition number"):
        rep = teleportable_subspace(None, H, DT, 0)
    assert rep.condition_number > 1e8


def test_schmidt_product_and_entangled():
    rng = np.random.default_rng(1)
    a, b = random_unit(rng, 3), random_unit(rng, 2)
    prod = Ket(np.kron(a, b), (3, 2), ("sys", "p0"))
    rep = schmidt_coefficients(prod, ["sys"])
    assert rep.rank == 1 and rep.separable
    bell = Ket(np.array([1, 0, 0, 1]) / np.sqrt(2), (2, 2), ("sys", "p0"))
    rep = schmidt_coefficients(bell, ["p0"])
    assert rep.rank == 2 and not rep.separable
    assert rep.coefficients == pytest.approx([2 ** -0.5, 2 ** -0.5])
    with pytest.raises(UnknownFactorError):
        schmidt_coefficients(bell, ["p4"])
    with pytest.raises(ValueError):
        schmidt_coefficients(bell, ["sys", "p0"])


def test_schmidt_coefficients_square_sum_to_one():
    rng = np.random.default_rng(5)
    k = Ket(random_unit(rng, 24), (3, 2, 4), ("sys", "p0", "p1"))
    rep = schmidt_coefficients(k, ["p1", "sys"])
    assert sum(c * c for c in rep.coefficients) == pytest.approx(1.0)
    assert rep.rank <= 2


def test_single_cycle_coefficients_match_oracle():
    H = generic_coupled_hamiltonian(3, 2, 4)
    rng = np.random.default_rng(4)
    y, p = random_unit(rng, 3), random_unit(rng, 2)
    alpha = single_cycle_coefficients(Ket(y), Ket(p, (2,), ("p0",)), H, DT)
    expect = (cycle_matrix(H) @ np.kron(y, p)).reshape(3, 2)
    assert np.max(np.abs(alpha - expect)) <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_duplication_structure_on_decoupled(seed):
    H = decoupled_hamiltonian(4, 2, seed)
    rng = np.random.default_rng(seed)
    y, p = Ket(random_unit(rng, 4)), Ket(random_unit(rng, 2), (2,), ("p0",))
    chk = verify_duplication_structure(y, p, H, DT)
    assert chk.applicable and chk.schmidt_rank == 1
    assert chk.residual <= 1e-10
    rec = separable_reconstruction(y, p, H, DT)
    assert rec.applicable
    assert rec.fidelity == pytest.approx(1.0, abs=1e-9)
    assert rec.cut_ranks == [1, 1]


@pytest.mark.parametrize("seed", range(3))
def test_block_controlled_first_block_is_separable(seed):
    H, k = block_controlled_hamiltonian(6, 3, seed)
    rng = np.random.default_rng(seed)
    v = np.zeros(6, dtype=complex)
    v[:k] = random_unit(rng, k)
    y, p = Ket(v), Ket(random_unit(rng, 3), (3,), ("p0",))
    assert verify_duplication_structure(y, p, H, DT).residual <= 1e-10
    rec = separable_reconstruction(y, p, H, DT)
    assert rec.fidelity == pytest.approx(1.0, abs=1e-9)
    assert max(rec.cut_ranks) == 1


def test_generic_coupling_breaks_duplication_structure():
    H = generic_coupled_hamiltonian(3, 2, 0)
    rng = np.random.default_rng(0)
    y, p = Ket(random_unit(rng, 3)), Ket(random_unit(rng, 2), (2,), ("p0",))
    chk = verify_duplication_structure(y, p, H, DT)
    assert not chk.applicable and chk.schmidt_rank == 2
