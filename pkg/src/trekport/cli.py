"""Command-line front end: ``trekport run|classify|purify|analyze|selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .acceptance import acceptance_payload, run_acceptance
from .config import ScenarioConfig, parse_config
from .errors import ConfigError, TrekportError
from .io import (
    complex_matrix,
    manifest_payload,
    pipeline_payload,
    with_schema,
    write_json,
    write_purification_csv,
    write_trace_csv,
)
from .pipeline import run_analysis, run_classification, run_full_pipeline, run_purification

COMMANDS = ("run", "classify", "purify", "analyze", "selftest")
EXIT_OK, EXIT_PROTOCOL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("trekport")


def _cmd_run(cfg: ScenarioConfig, out: Path) -> int:
    report = run_full_pipeline(cfg)
    write_json(out / "report.json", pipeline_payload(report))
    write_trace_csv(out / "trace.csv", report.trace)
    if report.printed_form_deviates:
        print(f"note: printed ordering differs from the per-cycle ordering "
              f"(overlap {report.printed_form_overlap:.6f})")
    print(f"fidelity_to_conjugate={report.fidelity_to_conjugate:.12f} "
          f"fidelity_to_original={report.fidelity_to_original:.12f}")
    return EXIT_OK


def _cmd_classify(cfg: ScenarioConfig, out: Path) -> int:
    r = run_classification(cfg)
    write_json(out / "classify.json", with_schema("classification", {
        "kind": r.kind, "witness_pair": list(r.witness) if r.witness else None,
        "residual": r.residual, "trials": r.trials}))
    print(f"{r.kind} residual={r.residual:.3e}")
    return EXIT_OK


def _cmd_purify(cfg: ScenarioConfig, out: Path) -> int:
    res = run_purification(cfg)
    write_purification_csv(out / "purify.csv", res.trace)
    last = res.trace.cycles[-1]
    write_json(out / "purify.json", with_schema("purification", {
        "target_index": res.trace.target_index, "target_energy": res.trace.target_energy,
        "final_energy": last.energy, "final_target_overlap": last.target_overlap,
        "converged": res.converged, "converged_at": res.trace.converged_at,
        "reversibility": res.reversibility}))
    print(f"target_overlap={last.target_overlap:.12f} reversibility={res.reversibility:.12f}")
    return EXIT_OK


def _cmd_analyze(cfg: ScenarioConfig, out: Path) -> int:
    res = run_analysis(cfg)
    sub = res.subspace
    write_json(out / "analysis.json", with_schema("analysis", {
        "target_index": res.target_index,
        "subspace": {
            "dimension": sub.dimension,
            "basis": [complex_matrix(b.amplitudes) for b in sub.basis],
            "residuals": sub.residuals,
            "singular_values": sub.singular_values,
            "condition_number": sub.condition_number,
        },
        "schmidt": {"coefficients": res.schmidt.coefficients, "rank": res.schmidt.rank,
                    "separable": res.schmidt.separable},
        "duplication": {"residual": res.duplication.residual,
                        "applicable": res.duplication.applicable,
                        "schmidt_rank": res.duplication.schmidt_rank},
    }))
    print(f"teleportable dimension={sub.dimension} schmidt_rank={res.schmidt.rank}")
    return EXIT_OK


HANDLERS = {"run": _cmd_run, "classify": _cmd_classify, "purify": _cmd_purify,
            "analyze": _cmd_analyze}


def run_subcommand(command: str, cfg: ScenarioConfig, fixed_clock: bool = False) -> int:
    """One scenario; maps errors to exit codes and always writes the manifest first."""
    out = Path(cfg.output_dir)
    write_json(out / "manifest.json", manifest_payload(command, cfg.to_dict(), fixed_clock))
    try:
        return HANDLERS[command](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TrekportError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL


def _run_job(args: tuple[str, ScenarioConfig, bool]) -> int:
    return run_subcommand(*args)


def _selftest(cfg: ScenarioConfig | None, fixed_clock: bool) -> int:
    seed = cfg.seed if cfg else 0
    out = Path(cfg.output_dir if cfg else "trekport_out")
    resolved = cfg.to_dict() if cfg else {"seed": seed, "output_dir": str(out)}
    write_json(out / "manifest.json", manifest_payload("selftest", resolved, fixed_clock))
    results = run_acceptance(seed)
    for r in results:
        print(r.line())
    write_json(out / "selftest.json",
               with_schema("selftest", acceptance_payload(results, seed, fixed_clock)))
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROTOCOL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trekport", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON scenario file (optional for selftest)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for seed sweeps")
    p.add_argument("--fixed-clock", action="store_true",
                   help="fixed manifest timestamp and no runtimes, for byte-stable reports")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("config error: --jobs: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(args.config) if args.config else None
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "selftest":
        return _selftest(cfg, args.fixed_clock)
    if cfg is None:
        print("config error: --config: required for this command", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.seeds:
        return run_subcommand(args.command, cfg, args.fixed_clock)
    base = Path(cfg.output_dir)
    jobs = [(args.command, cfg.with_seed(s, str(base / f"seed_{s}")), args.fixed_clock)
            for s in cfg.seeds]
    if args.jobs == 1:
        codes = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
