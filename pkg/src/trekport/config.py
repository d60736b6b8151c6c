"""Scenario configuration: JSON in, validated dataclass out."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hilbert import DEFAULT_DIMENSION_CAP

HAMILTONIAN_KINDS = ("decoupled", "decomposable", "generic-coupled", "custom-file")
PULSE_PROTOCOLS = ("explicit-states", "cold-partial-swap")
BOB_MODES = ("inverse", "forward_emulation")
ORDERINGS = ("per_cycle", "printed")
PROJECTION_MODES = ("deterministic", "sampled")

DEFAULT_TOLERANCES = {
    "convergence": 1e-6,
    "classify_threshold": 1e-8,
}


@dataclass
class ScenarioConfig:
    system_dim: int
    pulse_dim: int
    pulse_count: int
    dt: float = 0.1
    seed: int = 0
    hamiltonian: str = "generic-coupled"
    coupling_strength: float = 1.0
    pulse_protocol: str = "explicit-states"
    theta: float = math.pi / 6
    bob_mode: str = "forward_emulation"
    ordering: str = "per_cycle"
    projection_mode: str = "deterministic"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: str = "trekport_out"
    initial_state: list | None = None
    pulse_states: list | None = None
    hamiltonian_file: dict | None = None
    allow_complex: bool = False
    allow_subspace: bool = False
    target_index: int | None = None
    classify_probes: int = 16
    cap: int = DEFAULT_DIMENSION_CAP
    seeds: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int, output_dir: str | None = None) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(seed=seed, seeds=None)
        if output_dir is not None:
            d["output_dir"] = output_dir
        return ScenarioConfig(**d)


_FIELDS = {f.name for f in fields(ScenarioConfig)}


def _int(d, name, minimum):
    v = d[name]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {v}")
    return v


def _float(d, name):
    v = d[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    return float(v)


def _enum(d, name, allowed):
    v = d[name]
    if v not in allowed:
        raise ConfigError(f"{name}: unknown value {v!r} (expected one of {', '.join(allowed)})")
    return v


def _complex_vector(v, name, length):
    if not isinstance(v, list) or len(v) != length:
        raise ConfigError(f"{name}: expected a list of {length} amplitudes")
    out = []
    for x in v:
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(complex(x))
        elif isinstance(x, list) and len(x) == 2:
            out.append(complex(float(x[0]), float(x[1])))
        else:
            raise ConfigError(f"{name}: amplitude {x!r} is neither a number nor [re, im]")
    a = np.array(out)
    if np.linalg.norm(a) == 0:
        raise ConfigError(f"{name}: zero vector")
    return a


def load_matrix_file(path: Path, allow_complex: bool = False, name: str = "hamiltonian_file") -> np.ndarray:
    """Whitespace-separated rows.  Real symmetric unless ``allow_complex``."""
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{name}: cannot read {path}: {e}") from None
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([complex(t) if allow_complex else float(t) for t in line.split()])
        except ValueError as e:
            raise ConfigError(f"{name}: {path}: {e}") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ConfigError(f"{name}: {path} is not a square matrix")
    m = np.array(rows)
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ConfigError(f"{name}: {path} is not "
                          f"{'Hermitian' if allow_complex else 'real symmetric'}")
    return m


def config_from_dict(raw: dict, base_dir: Path | str = ".") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown field")
    for req in ("system_dim", "pulse_dim", "pulse_count"):
        if req not in raw:
            raise ConfigError(f"{req}: required field missing")
    d = dict(raw)
    proto = d.get("pulse_protocol", "explicit-states")
    if isinstance(proto, dict):
        if "theta" in proto:
            d["theta"] = proto["theta"]
        proto = proto.get("kind")
    d["pulse_protocol"] = proto
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(d.get("tolerances") or {})
    d["tolerances"] = tol
    cfg = ScenarioConfig(**d)
    validate(cfg, Path(base_dir))
    return cfg


def validate(cfg: ScenarioConfig, base_dir: Path = Path(".")) -> None:
    d = cfg.__dict__
    n = _int(d, "system_dim", 1)
    p = _int(d, "pulse_dim", 1)
    k = _int(d, "pulse_count", 0)
    _int(d, "seed", 0)
    _int(d, "cap", 1)
    _int(d, "classify_probes", 1)
    if n * p**k > cfg.cap:
        raise ConfigError(f"pulse_count: joint dimension {n}*{p}^{k} = {n * p**k} "
                          f"exceeds cap {cfg.cap}")
    if _float(d, "dt") <= 0:
        raise ConfigError("dt: must be > 0")
    _float(d, "coupling_strength")
    _enum(d, "hamiltonian", HAMILTONIAN_KINDS)
    _enum(d, "pulse_protocol", PULSE_PROTOCOLS)
    _enum(d, "bob_mode", BOB_MODES)
    _enum(d, "ordering", ORDERINGS)
    _enum(d, "projection_mode", PROJECTION_MODES)
    if cfg.pulse_protocol == "cold-partial-swap":
        th = _float(d, "theta")
        if not 0 < th <= math.pi:
            raise ConfigError(f"theta: must lie in (0, pi], got {th}")
    for key, v in cfg.tolerances.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"tolerances.{key}: must be a positive number")
    if cfg.target_index is not None and not 0 <= _int(d, "target_index", 0) < n:
        raise ConfigError("target_index: out of range")
    if cfg.initial_state is not None:
        _complex_vector(cfg.initial_state, "initial_state", n)
    if cfg.pulse_states is not None:
        if not isinstance(cfg.pulse_states, list) or len(cfg.pulse_states) != k:
            raise ConfigError(f"pulse_states: expected {k} pulse vectors")
        for i, v in enumerate(cfg.pulse_states):
            _complex_vector(v, f"pulse_states[{i}]", p)
    if cfg.seeds is not None:
        if not isinstance(cfg.seeds, list) or not all(
                isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in cfg.seeds):
            raise ConfigError("seeds: expected a list of nonnegative integers")
    if cfg.hamiltonian == "custom-file":
        hf = cfg.hamiltonian_file
        if not isinstance(hf, dict) or "system" not in hf or "interaction" not in hf:
            raise ConfigError("hamiltonian_file: needs 'system' and 'interaction' paths")
        resolved = {}
        expect = {"system": n, "pulse": p, "interaction": n * p}
        for part, rel in hf.items():
            if part not in expect:
                raise ConfigError(f"hamiltonian_file.{part}: unknown part")
            path = (base_dir / rel).resolve()
            m = load_matrix_file(path, cfg.allow_complex, f"hamiltonian_file.{part}")
            if m.shape[0] != expect[part]:
                raise ConfigError(f"hamiltonian_file.{part}: expected {expect[part]}x"
                                  f"{expect[part]}, got {m.shape[0]}x{m.shape[0]}")
            resolved[part] = str(path)
        cfg.hamiltonian_file = resolved
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        raise ConfigError("output_dir: expected a path")


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: {path} is not valid JSON: {e}") from None
    return config_from_dict(raw, path.parent)
