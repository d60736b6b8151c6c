"""Report and trace serialization (JSON reports, CSV traces, run manifests)."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .protocol import PipelineReport, ProtocolTrace
from .purify import PurificationTrace

SCHEMA_VERSION = "1.0"
FIXED_TIMESTAMP = "1970-01-01T00:00:00+00:00"
TRACE_COLUMNS = ("step", "phase", "model_time", "system_energy", "system_purity")
PURIFY_COLUMNS = ("cycle", "energy", "target_overlap")


def timestamp(fixed_clock: bool) -> str:
    if fixed_clock:
        return FIXED_TIMESTAMP
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def complex_matrix(m: np.ndarray) -> list:
    """Nested [re, im] pairs; JSON has no complex type."""
    m = np.asarray(m)
    if m.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in m]
    return [complex_matrix(row) for row in m]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def with_schema(kind: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **body}


def pipeline_payload(report: PipelineReport) -> dict:
    rho = report.bob_system.entries
    return with_schema("pipeline_report", {
        "mode": report.mode,
        "ordering": report.ordering,
        "alice_final_index": report.alice_final_index,
        "projection_probability": report.projection_probability,
        "fidelity_to_conjugate": report.fidelity_to_conjugate,
        "fidelity_to_original": report.fidelity_to_original,
        "printed_form_overlap": report.printed_form_overlap,
        "printed_form_deviates": report.printed_form_deviates,
        "target_overlap": report.target_overlap,
        "bob_register_dims": list(report.bob_final_state.dims),
        "bob_system_density": complex_matrix(rho),
        "bob_system_purity": float(np.sum(np.abs(rho) ** 2)),
        "trace_steps": len(report.trace),
        "max_norm_deviation": max((abs(r.norm - 1) for r in report.trace.records), default=0.0),
    })


def write_trace_csv(path: Path, trace: ProtocolTrace) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.records:
            w.writerow([r.step, r.phase, repr(r.model_time), repr(r.system_energy),
                        repr(r.system_purity)])
    return path


def write_purification_csv(path: Path, trace: PurificationTrace) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PURIFY_COLUMNS)
        for r in trace.cycles:
            w.writerow([r.cycle, repr(r.energy), repr(r.target_overlap)])
    return path


def read_csv_rows(path: Path) -> list[dict]:
    with Path(path).open() as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


def manifest_payload(command: str, config: dict, fixed_clock: bool) -> dict:
    return with_schema("manifest", {
        "command": command,
        "package_version": __version__,
        "created": timestamp(fixed_clock),
        "config": config,
    })
