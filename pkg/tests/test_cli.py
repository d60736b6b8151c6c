import json
import math
import subprocess
import sys

import pytest

from trekport.cli import main
from trekport.config import ScenarioConfig, config_from_dict, parse_config
from trekport.errors import ConfigError
from trekport.io import SCHEMA_VERSION, read_csv_rows


def write_config(tmp_path, **fields):
    fields.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(fields))
    return path


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write_config(tmp_path, system_dim=4, pulse_dim=2, pulse_count=3))
    assert cfg.dt == 0.1
    assert cfg.seed == 0
    assert cfg.bob_mode == "forward_emulation"
    assert cfg.projection_mode == "deterministic"
    assert cfg.tolerances["convergence"] == 1e-6


@pytest.mark.parametrize("raw,field", [
    ({"system_dim": 16, "pulse_dim": 2, "pulse_count": 18}, "pulse_count"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "hamiltonian": "magic"}, "hamiltonian"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "bob_mode": "psychic"}, "bob_mode"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "dt": 0}, "dt"),
    ({"system_dim": 0, "pulse_dim": 2, "pulse_count": 3}, "system_dim"),
    ({"system_dim": 4, "pulse_dim": 2}, "pulse_count"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "colour": 1}, "colour"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3,
      "pulse_protocol": {"kind": "cold-partial-swap", "theta": 4.0}}, "theta"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "initial_state": [1, 0]}, "initial_state"),
    ({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3, "tolerances": {"convergence": -1}},
     "tolerances.convergence"),
])
def test_config_errors_name_the_field(raw, field):
    with pytest.raises(ConfigError, match=rf"^{field}"):
        config_from_dict(raw)


def test_config_theta_in_protocol_object():
    cfg = config_from_dict({"system_dim": 4, "pulse_dim": 2, "pulse_count": 3,
                            "pulse_protocol": {"kind": "cold-partial-swap", "theta": 0.5}})
    assert cfg.pulse_protocol == "cold-partial-swap"
    assert cfg.theta == 0.5


def test_parse_config_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")


def test_custom_file_must_be_real_symmetric(tmp_path):
    (tmp_path / "hs.txt").write_text("1 0\n0 -1\n")
    (tmp_path / "hi.txt").write_text("0 0 0 1j\n0 0 0 0\n0 0 0 0\n-1j 0 0 0\n")
    raw = {"system_dim": 2, "pulse_dim": 2, "pulse_count": 1, "hamiltonian": "custom-file",
           "hamiltonian_file": {"system": "hs.txt", "interaction": "hi.txt"}}
    with pytest.raises(ConfigError, match="hamiltonian_file.interaction"):
        config_from_dict(raw, tmp_path)
    cfg = config_from_dict({**raw, "allow_complex": True}, tmp_path)
    assert cfg.hamiltonian_file["system"].endswith("hs.txt")
    (tmp_path / "hs.txt").write_text("1 2\n0 -1\n")
    with pytest.raises(ConfigError, match="not real symmetric"):
        config_from_dict(raw, tmp_path)


def test_run_writes_report_trace_and_manifest(tmp_path):
    cfg = write_config(tmp_path, system_dim=4, pulse_dim=2, pulse_count=2, seed=3)
    assert main(["run", "--config", str(cfg), "--fixed-clock"]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == SCHEMA_VERSION
    assert 0 <= report["fidelity_to_conjugate"] <= 1
    assert report["printed_form_deviates"] in (True, False)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
    assert manifest["created"] == "1970-01-01T00:00:00+00:00"
    # the manifest alone reproduces the run
    assert ScenarioConfig(**manifest["config"]) == parse_config(cfg)
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == f"# schema_version: {SCHEMA_VERSION}"
    assert lines[1] == "step,phase,model_time,system_energy,system_purity"
    rows = read_csv_rows(out / "trace.csv")
    assert [r["phase"] for r in rows[:3]] == ["interact", "store", "teleport"]
    assert len(rows) == 6 + 6


def test_run_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2, seed=1)
    main(["run", "--config", str(cfg), "--fixed-clock"])
    first = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
    main(["run", "--config", str(cfg), "--fixed-clock"])
    second = {p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()}
    assert first == second


def test_classify_json_fields(tmp_path):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=3, hamiltonian="generic-coupled")
    assert main(["classify", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "out" / "classify.json").read_text())
    assert {"kind", "witness_pair", "residual", "trials", "schema_version"} <= set(rep)
    assert rep["kind"] == "type2"


def test_purify_csv(tmp_path):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=8,
                       pulse_protocol={"kind": "cold-partial-swap", "theta": math.pi / 3})
    assert main(["purify", "--config", str(cfg)]) == 0
    rows = read_csv_rows(tmp_path / "out" / "purify.csv")
    assert list(rows[0]) == ["cycle", "energy", "target_overlap"]
    assert [int(r["cycle"]) for r in rows] == list(range(9))
    summary = json.loads((tmp_path / "out" / "purify.json").read_text())
    assert summary["reversibility"] >= 1 - 1e-10


def test_purify_needs_cold_protocol(tmp_path):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2)
    assert main(["purify", "--config", str(cfg)]) == 2


def test_analyze_single_cycle(tmp_path):
    cfg = write_config(tmp_path, system_dim=4, pulse_dim=2, pulse_count=1, allow_subspace=True)
    assert main(["analyze", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "out" / "analysis.json").read_text())
    assert rep["subspace"]["dimension"] <= 2
    assert "coefficients" in rep["schmidt"]


def test_analyze_multi_cycle_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, system_dim=4, pulse_dim=2, pulse_count=3)
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "single interrogation cycle" in capsys.readouterr().err


def test_time_reversal_violation_exits_1(tmp_path, capsys):
    (tmp_path / "hs.txt").write_text("1 0.2\n0.2 -1\n")
    (tmp_path / "hi.txt").write_text("0 0 0 0.5j\n0 0 0.3 0\n0 0.3 0 0\n-0.5j 0 0 0\n")
    cfg = write_config(tmp_path, system_dim=2, pulse_dim=2, pulse_count=1, hamiltonian="custom-file",
                       hamiltonian_file={"system": "hs.txt", "interaction": "hi.txt"},
                       allow_complex=True)
    assert main(["run", "--config", str(cfg)]) == 1
    assert "time-reversal invariant" in capsys.readouterr().err


def test_cap_violation_exits_2(tmp_path):
    cfg = write_config(tmp_path, system_dim=16, pulse_dim=2, pulse_count=18)
    assert main(["run", "--config", str(cfg)]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["run"]) == 2
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


@pytest.mark.parametrize("jobs", [1, 2])
def test_seed_sweep_writes_subdirectories(tmp_path, jobs):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2, seeds=[4, 5, 6])
    assert main(["run", "--config", str(cfg), "--jobs", str(jobs), "--fixed-clock"]) == 0
    for s in (4, 5, 6):
        manifest = json.loads((tmp_path / "out" / f"seed_{s}" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == s


def test_sweep_jobs_do_not_change_results(tmp_path):
    a = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2, seeds=[1, 2],
                     output_dir=str(tmp_path / "a"))
    main(["run", "--config", str(a), "--jobs", "1", "--fixed-clock"])
    b = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2, seeds=[1, 2],
                     output_dir=str(tmp_path / "b"))
    main(["run", "--config", str(b), "--jobs", "2", "--fixed-clock"])
    for s in (1, 2):
        ra = (tmp_path / "a" / f"seed_{s}" / "report.json").read_bytes()
        rb = (tmp_path / "b" / f"seed_{s}" / "report.json").read_bytes()
        assert ra == rb


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, system_dim=3, pulse_dim=2, pulse_count=2)
    proc = subprocess.run([sys.executable, "-m", "trekport", "classify", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("type2")
