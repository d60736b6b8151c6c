"""Scenario assembly and the end-to-end runs behind the CLI subcommands."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    DuplicationCheck,
    SchmidtReport,
    SubspaceReport,
    reconstruction_fidelity,
    schmidt_coefficients,
    teleportable_subspace,
    verify_duplication_structure,
)
from .classify import ClassificationResult, classify_type
from .config import ScenarioConfig, load_matrix_file
from .dynamics import (
    HamiltonianSpec,
    decomposable_hamiltonian,
    decoupled_hamiltonian,
    generic_coupled_hamiltonian,
)
from .errors import ConfigError
from .hilbert import (
    SYSTEM,
    Ket,
    OperatorMatrix,
    SpaceSpec,
    inner_product,
    pulse_label,
    random_ket,
    reduced_matrix,
    reduced_state,
)
from .protocol import (
    PipelineReport,
    Propagators,
    PulseTrain,
    alice_run,
    bob_run_forward,
    bob_run_inverse,
    classical_project_report,
    teleport_memory,
)
from .purify import (
    ColdSwapModel,
    PurificationParams,
    PurificationTrace,
    cold_swap_hamiltonian,
    purification_run,
    reversibility_check,
)


def build_hamiltonian(cfg: ScenarioConfig) -> HamiltonianSpec:
    n, d, s, g = cfg.system_dim, cfg.pulse_dim, cfg.seed, cfg.coupling_strength
    if cfg.hamiltonian == "generic-coupled":
        return generic_coupled_hamiltonian(n, d, s, g)
    if cfg.hamiltonian == "decoupled":
        return decoupled_hamiltonian(n, d, s)
    if cfg.hamiltonian == "decomposable":
        return decomposable_hamiltonian(n, d, s, g)
    files = cfg.hamiltonian_file or {}

    def load(part):
        return load_matrix_file(Path(files[part]), cfg.allow_complex, f"hamiltonian_file.{part}")

    pulse = load("pulse") if "pulse" in files else np.zeros((d, d))
    return HamiltonianSpec(OperatorMatrix(load("system"), hermitian=True),
                           OperatorMatrix(pulse, hermitian=True),
                           OperatorMatrix(load("interaction"), hermitian=True), g)


@dataclass
class Scenario:
    config: ScenarioConfig
    hamiltonian: HamiltonianSpec
    Y0: Ket
    train: PulseTrain
    cold: ColdSwapModel | None = None

    @property
    def spec(self) -> SpaceSpec:
        c = self.config
        return SpaceSpec(c.system_dim, c.pulse_dim, c.pulse_count, c.cap)


def _vector(raw) -> np.ndarray:
    return np.array([complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in raw])


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    n, d, k = cfg.system_dim, cfg.pulse_dim, cfg.pulse_count
    if cfg.initial_state is not None:
        Y0 = Ket.from_vector(_vector(cfg.initial_state), normalize=True)
    else:
        Y0 = random_ket(n, np.random.default_rng([cfg.seed, 11]))
    base = build_hamiltonian(cfg)
    if cfg.pulse_protocol == "cold-partial-swap":
        # work in the energy eigenbasis: the computational basis is identified with it
        energies = np.linalg.eigvalsh(np.asarray(base.system_part.entries))
        h_sys = OperatorMatrix(np.diag(energies), hermitian=True)
        model = cold_swap_hamiltonian(h_sys, d, cfg.theta, cfg.dt, cfg.target_index)
        return Scenario(cfg, model.hamiltonian, Y0, PulseTrain.ground(k, d), model)
    if cfg.pulse_states is not None:
        train = PulseTrain(tuple(Ket.from_vector(_vector(v), pulse_label(i), normalize=True)
                                 for i, v in enumerate(cfg.pulse_states)), d)
    else:
        train = PulseTrain.random(k, d, cfg.seed)
    return Scenario(cfg, base, Y0, train)


def run_full_pipeline(cfg: ScenarioConfig) -> PipelineReport:
    """Alice's run, projection, memory teleport, Bob's reconstruction, fidelities."""
    sc = build_scenario(cfg)
    H, dt = sc.hamiltonian, cfg.dt
    props = Propagators.build(H, dt)
    psi_a, mem, trace = alice_run(sc.Y0, sc.train, H, dt, cap=cfg.cap,
                                  allow_subspace=cfg.allow_subspace, props=props)
    target_overlap = None
    if sc.cold is not None:
        rho = reduced_matrix(psi_a, [SYSTEM])
        v = sc.cold.target_state
        target_overlap = float(np.real(np.vdot(v, rho @ v)))
    p, collapsed, prob = classical_project_report(psi_a, mode=cfg.projection_mode, seed=cfg.seed)
    mem_b = teleport_memory(mem)
    printed_overlap = None
    if cfg.bob_mode == "inverse":
        bob = bob_run_inverse(collapsed, mem_b, H, dt, trace=trace, props=props)
    else:
        bob = bob_run_forward(collapsed, mem_b, H, dt, ordering=cfg.ordering,
                              trace=trace, props=props)
        if len(mem_b) > 1:
            other = "printed" if cfg.ordering == "per_cycle" else "per_cycle"
            alt = bob_run_forward(collapsed, mem_b, H, dt, ordering=other, props=props)
            printed_overlap = abs(inner_product(bob, alt))
    rho_b = reduced_state(bob, [SYSTEM])
    return PipelineReport(
        alice_final_index=p, projection_probability=prob, bob_final_state=bob,
        bob_system=rho_b,
        fidelity_to_conjugate=reconstruction_fidelity(sc.Y0, rho_b, "conjugate"),
        fidelity_to_original=reconstruction_fidelity(sc.Y0, rho_b, "direct"),
        trace=trace, mode=cfg.bob_mode, ordering=cfg.ordering,
        printed_form_overlap=printed_overlap, target_overlap=target_overlap)


def run_classification(cfg: ScenarioConfig) -> ClassificationResult:
    sc = build_scenario(cfg)
    return classify_type(sc.hamiltonian, cfg.dt, cfg.pulse_count, sc.spec,
                         threshold=cfg.tolerances["classify_threshold"],
                         probes=cfg.classify_probes, seed=cfg.seed)


@dataclass
class PurificationOutcome:
    trace: PurificationTrace
    reversibility: float
    converged: bool


def run_purification(cfg: ScenarioConfig) -> PurificationOutcome:
    if cfg.pulse_protocol != "cold-partial-swap":
        raise ConfigError("pulse_protocol: purify needs 'cold-partial-swap'")
    sc = build_scenario(cfg)
    h_sys = sc.hamiltonian.system_part
    tol = cfg.tolerances["convergence"]
    joint, mem, trace = purification_run(sc.Y0, cfg.pulse_count, cfg.theta, h_sys, cfg.dt,
                                         sc.cold.target_index, pulse_dim=cfg.pulse_dim,
                                         tol=tol, cap=cfg.cap)
    params = PurificationParams(sc.Y0, cfg.pulse_count, cfg.theta, h_sys, cfg.dt,
                                sc.cold.target_index, cfg.pulse_dim)
    rev = reversibility_check(joint, mem, params)
    return PurificationOutcome(trace, rev, trace.cycles[-1].target_overlap >= 1 - tol)


@dataclass
class AnalysisOutcome:
    subspace: SubspaceReport
    schmidt: SchmidtReport
    duplication: DuplicationCheck
    target_index: int


def run_analysis(cfg: ScenarioConfig) -> AnalysisOutcome:
    if cfg.pulse_count != 1:
        raise ConfigError("pulse_count: the teleportable-subspace analysis covers a single "
                          f"interrogation cycle only (pulse_count must be 1, got {cfg.pulse_count})")
    sc = build_scenario(cfg)
    H = sc.hamiltonian
    pulse0 = sc.train.initial_states[0]
    psi_a, _, _ = alice_run(sc.Y0, sc.train, H, cfg.dt, cap=cfg.cap, allow_subspace=True)
    p = cfg.target_index
    if p is None:
        p, _, _ = classical_project_report(psi_a, mode="deterministic")
    return AnalysisOutcome(
        teleportable_subspace(pulse0, H, cfg.dt, p, sc.spec),
        schmidt_coefficients(psi_a, [SYSTEM]),
        verify_duplication_structure(sc.Y0, pulse0, H, cfg.dt),
        p)
