import json
import math

import numpy as np
import pytest

from riskcontract import (
    AVaR, CaseStudyConfig, Expectation, ProblemSpec, binomial_model, monotone_segments,
    run_coverage_vs_avar_level, run_premium_vs_investment, solve_baseline,
)
from riskcontract.casestudy import (
    breakpoint_alignment, quantile_crossings, sweep_sidecar, write_sweep,
)
from riskcontract.contract import coverage_from_derivative, premium_from_ir


@pytest.fixture(scope="module")
def coverage_sweep():
    cfg = CaseStudyConfig()
    return cfg, run_coverage_vs_avar_level(cfg)


@pytest.fixture(scope="module")
def premium_sweep():
    cfg = CaseStudyConfig(user_avar_levels=(0.5,))
    return cfg, run_premium_vs_investment(cfg)


# --- monotone segments ------------------------------------------------------------------


def test_segments_strictly_increasing():
    r = monotone_segments([1, 2, 3, 4])
    assert r.segments == [(0, 4)] and r.breakpoints == [] and r.longest_fraction == 1.0


def test_segments_sawtooth():
    r = monotone_segments([1, 2, 1, 2])
    assert r.segments == [(0, 2), (2, 4)] and r.breakpoints == [2]
    assert r.within_segment_violations == 0 and r.longest_fraction == 0.5


def test_segments_tolerate_roundoff():
    assert monotone_segments([1.0, 1.0 - 1e-12, 2.0]).breakpoints == []


def test_segments_need_two_rows():
    with pytest.raises(ValueError):
        monotone_segments([1.0])


# --- coverage sweep -------------------------------------------------------------------------


def test_coverage_sweep_shape(coverage_sweep):
    cfg, table = coverage_sweep
    assert table.columns == ("a", "x", "c", "feasible")
    assert [r[0] for r in table.rows] == list(cfg.user_avar_levels)
    assert len(table.rows) == 41


def test_coverage_level_zero_is_expectation_coverage(coverage_sweep):
    cfg, table = coverage_sweep
    a, x, c, ok = table.rows[0]
    assert a == 0.0 and ok
    spec = ProblemSpec(cfg.insurer_spec, Expectation(), cfg.model, cfg.m)
    assert c == pytest.approx(coverage_from_derivative(spec.d_user(x), cfg.m), abs=1e-9)


def test_coverage_sweep_is_piecewise_nondecreasing(coverage_sweep):
    _, table = coverage_sweep
    report = monotone_segments(table.column("c"))
    assert report.within_segment_violations == 0
    assert len(report.segments) >= 1
    # within each segment c(a) is nondecreasing by construction; breakpoints are descents
    c = table.column("c")
    for b in report.breakpoints:
        assert c[b] < c[b - 1]


def test_coverage_breakpoints_align_with_quantile_atoms(coverage_sweep):
    cfg, table = coverage_sweep
    report = monotone_segments(table.column("c"))
    alignment = breakpoint_alignment(cfg, table, report)
    assert alignment and all(item["aligned"] for item in alignment)


def test_quantile_crossings_are_cdf_levels():
    cfg = CaseStudyConfig()
    levels = quantile_crossings(cfg, 1.0)
    # Binomial(10, 0.2): F(0) = 0.8**10
    assert levels[0] == pytest.approx(0.8**10)
    assert all(0 < a < 1 for a in levels) and levels == sorted(levels)


def test_empty_level_list():
    table = run_coverage_vs_avar_level(CaseStudyConfig(user_avar_levels=()))
    assert table.rows == []


def test_fixed_x_mode():
    cfg = CaseStudyConfig(user_avar_levels=(0.0, 0.5), mode="fixed-x", fixed_x=0.5)
    table = run_coverage_vs_avar_level(cfg)
    assert [r[1] for r in table.rows] == [0.5, 0.5]


def test_config_validation():
    with pytest.raises(ValueError):
        CaseStudyConfig(mode="sideways")
    with pytest.raises(ValueError):
        CaseStudyConfig(kappa=0.0)


# --- premium sweep ----------------------------------------------------------------------------


def test_premium_row_at_baseline_binds_ir(premium_sweep):
    cfg, table = premium_sweep
    spec = cfg.problem(0.5)
    base = solve_baseline(spec)
    x0 = table.meta["x0"]
    assert x0 == base.x0
    row = next(r for r in table.rows if r[0] == pytest.approx(x0))
    x, c, q, ok = row
    assert q == pytest.approx(premium_from_ir(base.U_bar, cfg.m, x, c, spec.rho_user(x)), abs=1e-12)
    # binding IR: the insured user is exactly at the reservation value
    assert (1 - c) * spec.rho_user(x) + cfg.m * x + q == pytest.approx(base.U_bar, abs=1e-9)


def test_premium_sweep_feasible_rows_have_positive_premium(premium_sweep):
    _, table = premium_sweep
    for (x, c, q, ok), reason in zip(table.rows, table.reasons):
        if ok:
            assert q > 0 and 0 <= c <= 1 and reason == ""
        else:
            assert reason in {"under-sensitive", "flat-risk", "non-positive-premium"}


def test_premium_single_point_grid():
    table = run_premium_vs_investment(CaseStudyConfig(user_avar_levels=(0.5,), x_grid=(1.0,)))
    assert len(table.rows) == 1


def test_premium_needs_one_level():
    with pytest.raises(ValueError, match="exactly one"):
        run_premium_vs_investment(CaseStudyConfig(user_avar_levels=(0.1, 0.2)))


# --- outputs -----------------------------------------------------------------------------------


def test_csv_format(premium_sweep):
    _, table = premium_sweep
    lines = table.to_csv().splitlines()
    assert lines[0] == "x,c,q,feasible"
    assert len(lines) == 42
    assert any(line.endswith(",nan,nan,false") for line in lines[1:])


def test_write_sweep_is_deterministic(tmp_path, coverage_sweep):
    cfg, table = coverage_sweep
    outputs = []
    for k in range(2):
        side = sweep_sidecar(cfg, run_coverage_vs_avar_level(cfg), "c", seed=0)
        write_sweep(table, side, tmp_path / f"{k}.csv", tmp_path / f"{k}.json")
        outputs.append(((tmp_path / f"{k}.csv").read_bytes(), (tmp_path / f"{k}.json").read_bytes()))
    assert outputs[0] == outputs[1]
    side = json.loads(outputs[0][1])
    assert side["tolerances"]["check"] == 1e-9 and side["seed"] == 0
