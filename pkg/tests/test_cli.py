import json
import subprocess
import sys

import pytest

from riskcontract.cli import EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_NO_CONTRACT, EXIT_OK, main
from riskcontract.config import ConfigError, parse_config

SMALL = {
    "model": {"family": "binomial", "n": 10, "damping": 0.8},
    "insurer": {"kind": "avar", "level": 0.95},
    "user": {"kind": "avar", "level": 0.5},
    "costs": {"m": 1.0},
    "grids": {"solver_points": 101, "check_points": 11, "axiom_trials": 100,
              "avar_levels": {"start": 0.0, "stop": 0.95, "num": 5},
              "sweep_x": [0.0, 0.5, 1.0]},
    "output": {"prefix": "t"},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def run(tmp_path, *args, cfg=SMALL):
    out = tmp_path / "out"
    out.mkdir(exist_ok=True)
    path = write(tmp_path, cfg)
    return main([*args, str(path), "--out", str(out)]), out


def with_(**sections):
    return {**SMALL, **sections}


# --- solve -----------------------------------------------------------------------------


def test_solve_writes_report(tmp_path):
    code, out = run(tmp_path, "solve")
    assert code == EXIT_OK
    report = json.loads((out / "t_solve.json").read_text())
    assert 0 <= report["c_star"] <= 1 and report["q_star"] > 0
    assert report["ir_gap"] <= 1e-6
    assert report["seed"] == 0 and report["tolerances"]["ir"] == 1e-6
    assert report["config"]["costs"] == {"m": 1.0}


@pytest.mark.parametrize("m", [0, -1.0])
def test_nonpositive_cost_is_config_error(tmp_path, m, capsys):
    code, _ = run(tmp_path, "solve", cfg=with_(costs={"m": m}))
    assert code == EXIT_CONFIG
    assert "costs.m" in capsys.readouterr().err


def test_all_infeasible_instance(tmp_path, capsys):
    zero_loss = {"family": "tabulated", "grid": [0.0, 1.0], "support": [0.0], "pmf": [[1.0], [1.0]]}
    code, out = run(tmp_path, "solve", cfg=with_(model=zero_loss))
    assert code == EXIT_NO_CONTRACT
    report = json.loads((out / "t_solve.json").read_text())
    assert report["error"] == "no-contract" and len(report["reasons"]) == 101
    assert "x=0:" in capsys.readouterr().err


def test_missing_output_directory(tmp_path):
    path = write(tmp_path, SMALL)
    assert main(["solve", str(path), "--out", str(tmp_path / "absent")]) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    assert main(["solve", str(tmp_path / "none.json")]) == EXIT_CONFIG


# --- config validation ----------------------------------------------------------------------


def test_unknown_key_reports_line():
    text = json.dumps(with_(costs={"m": 1.0, "mm": 2.0}), indent=2)
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "cfg.json")
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"mm"' in s)
    assert exc.value.line == line and f"cfg.json:{line}" in str(exc.value)


@pytest.mark.parametrize("section, value", [
    ("user", {"kind": "semideviation", "theta": 1.5}),
    ("insurer", {"kind": "avar", "level": 1.0}),
    ("model", {"family": "poisson"}),
    ("tolerances", {"ir": -1}),
    ("grids", {"solver_points": 2}),
    ("bogus", {}),
])
def test_invalid_sections(section, value):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(with_(**{section: value})))


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config('{\n  "model": {},\n  oops\n}')
    assert exc.value.line == 3


def test_mixture_config():
    sc = parse_config(json.dumps(with_(insurer={
        "kind": "mixture", "weight": 0.5, "left": {"kind": "avar", "level": 0.9},
        "right": {"kind": "expectation"}})))
    assert sc.problem.insurer.depth == 1


# --- check -----------------------------------------------------------------------------------


def test_check_case_study(tmp_path):
    code, out = run(tmp_path, "check")
    assert code == EXIT_OK
    report = json.loads((out / "t_check.json").read_text())
    assert report["fosd"]["passed"] and report["axioms"]["user"]["all_passed"]
    assert not report["density_convexity"]["passed"] and report["warnings"]


def test_check_semideviation_out_of_range(tmp_path):
    code, _ = run(tmp_path, "check", cfg=with_(user={"kind": "semideviation", "theta": 1.5}))
    assert code == EXIT_CONFIG


def test_check_reversed_family(tmp_path):
    reversed_ = {"family": "tabulated", "grid": [0.0, 1.0], "support": [0.0, 5.0, 10.0],
                 "pmf": [[0.7, 0.2, 0.1], [0.2, 0.3, 0.5]]}
    code, out = run(tmp_path, "check", cfg=with_(model=reversed_))
    assert code == EXIT_DIAGNOSTIC
    assert not json.loads((out / "t_check.json").read_text())["fosd"]["passed"]


# --- sweep -----------------------------------------------------------------------------------


def test_coverage_sweep_one_row_per_level(tmp_path):
    code, out = run(tmp_path, "sweep", "--kind", "coverage")
    assert code == EXIT_OK
    lines = (out / "t_coverage.csv").read_text().splitlines()
    assert lines[0] == "a,x,c,feasible" and len(lines) == 1 + 5


def test_premium_sweep_single_point(tmp_path):
    cfg = with_(grids={**SMALL["grids"], "sweep_x": [0.5]})
    code, out = run(tmp_path, "sweep", "--kind", "premium", cfg=cfg)
    assert code == EXIT_OK
    assert len((out / "t_premium.csv").read_text().splitlines()) == 2


def test_sweep_requires_binomial_family(tmp_path):
    affine = {"family": "tabulated", "grid": [0.0, 1.0], "support": [0.0, 10.0],
              "pmf": [[0.5, 0.5], [0.9, 0.1]]}
    code, _ = run(tmp_path, "sweep", "--kind", "coverage", cfg=with_(model=affine))
    assert code == EXIT_CONFIG


# --- determinism and entry points ---------------------------------------------------------------


@pytest.mark.parametrize("args, files", [
    (("solve",), ["t_solve.json"]),
    (("check", "--seed", "42"), ["t_check.json"]),
    (("sweep", "--kind", "coverage"), ["t_coverage.csv", "t_coverage.json"]),
    (("sweep", "--kind", "premium"), ["t_premium.csv", "t_premium.json"]),
])
def test_outputs_are_byte_identical(tmp_path, args, files):
    path = write(tmp_path, SMALL)
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        out.mkdir()
        assert main([*args, str(path), "--out", str(out)]) == EXIT_OK
        blobs.append([(out / f).read_bytes() for f in files])
    assert blobs[0] == blobs[1]


def test_module_entry_point(tmp_path):
    path = write(tmp_path, SMALL)
    proc = subprocess.run([sys.executable, "-m", "riskcontract", "solve", str(path),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert "x*=" in proc.stdout


def test_negative_seed_rejected(tmp_path):
    path = write(tmp_path, SMALL)
    assert main(["check", str(path), "--out", str(tmp_path), "--seed", "-1"]) == EXIT_CONFIG
