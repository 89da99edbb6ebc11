"""Ransomware case study: coverage and premium sweeps with monotone-segment analysis.

The loss is the number of locked computers out of ``n``; each is locked with
probability ``1 - kappa * x**2`` where ``x`` in [0, 1] is the firewall effort.
The user's perception is AV@R at a swept level.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .contract import (
    InfeasibleContract, ProblemSpec, Tolerances, coverage_from_derivative, premium_from_ir,
    solve_baseline,
)
from .distributions import binomial_model, cdf_values, distribution_at
from .risk import AVaR, RiskMeasureSpec

MODES = ("at-baseline", "fixed-x")


@dataclass(frozen=True)
class CaseStudyConfig:
    n: int = 10
    kappa: float = 0.8
    m: float = 1.0
    user_avar_levels: tuple = tuple(np.linspace(0.0, 0.95, 41).round(12))
    insurer_spec: RiskMeasureSpec = AVaR(0.95)
    x_grid: tuple = tuple(np.linspace(0.0, 1.0, 41).round(12))
    mode: str = "at-baseline"
    fixed_x: float = 0.5
    baseline_points: int = 1001
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not len(self.x_grid):
            raise ValueError("x_grid must be nonempty")
        object.__setattr__(self, "user_avar_levels", tuple(float(a) for a in self.user_avar_levels))
        object.__setattr__(self, "x_grid", tuple(float(x) for x in self.x_grid))

    @property
    def model(self):
        return binomial_model(self.n, self.kappa)

    def problem(self, level: float) -> ProblemSpec:
        return ProblemSpec(self.insurer_spec, AVaR(level), self.model, self.m,
                           grid_points=self.baseline_points, tolerances=self.tolerances)

    def echo(self) -> dict:
        return {"n": self.n, "kappa": self.kappa, "m": self.m,
                "user_avar_levels": list(self.user_avar_levels),
                "insurer": self.insurer_spec.to_dict(), "x_grid": list(self.x_grid),
                "mode": self.mode, "fixed_x": self.fixed_x,
                "baseline_points": self.baseline_points}


@dataclass
class SweepTable:
    columns: tuple
    rows: list                          # tuples aligned with ``columns``
    reasons: list                       # infeasibility reason per row, "" when feasible
    meta: dict = field(default_factory=dict)

    def column(self, name: str, feasible_only: bool = True) -> list:
        j = self.columns.index(name)
        f = self.columns.index("feasible")
        return [r[j] for r in self.rows if r[f] or not feasible_only]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return format(float(v), ".9g")


def _user_derivative(problem: ProblemSpec, x: float) -> float:
    return problem.d_user(x)


def run_coverage_vs_avar_level(config: CaseStudyConfig) -> SweepTable:
    """Feasible coverage as the user's AV@R level grows."""
    rows, reasons = [], []
    for a in config.user_avar_levels:
        problem = config.problem(a)
        x = solve_baseline(problem).x0 if config.mode == "at-baseline" else config.fixed_x
        try:
            c = coverage_from_derivative(_user_derivative(problem, x), config.m)
            rows.append((a, x, c, True))
            reasons.append("")
        except InfeasibleContract as exc:
            rows.append((a, x, math.nan, False))
            reasons.append(exc.reason)
    return SweepTable(("a", "x", "c", "feasible"), rows, reasons,
                      {"sweep": "coverage", "mode": config.mode})


def run_premium_vs_investment(config: CaseStudyConfig) -> SweepTable:
    """Feasible coverage and premium along the investment grid at one AV@R level."""
    if len(config.user_avar_levels) != 1:
        raise ValueError("premium sweep needs exactly one user AV@R level, got "
                         f"{len(config.user_avar_levels)}")
    level = config.user_avar_levels[0]
    problem = config.problem(level)
    baseline = solve_baseline(problem)
    rows, reasons = [], []
    for x in config.x_grid:
        try:
            c = coverage_from_derivative(_user_derivative(problem, x), config.m)
        except InfeasibleContract as exc:
            rows.append((x, math.nan, math.nan, False))
            reasons.append(exc.reason)
            continue
        q = premium_from_ir(baseline.U_bar, config.m, x, c, problem.rho_user(x))
        ok = q > 1e-12
        rows.append((x, c, q, ok))
        reasons.append("" if ok else "non-positive-premium")
    return SweepTable(("x", "c", "q", "feasible"), rows, reasons,
                      {"sweep": "premium", "level": level, "x0": baseline.x0,
                       "U_bar": baseline.U_bar})


@dataclass
class SegmentReport:
    segments: list                 # (start, stop) index pairs, stop exclusive
    breakpoints: list              # indices starting a new segment
    descents: int
    within_segment_violations: int
    longest_fraction: float
    tol: float

    def to_dict(self) -> dict:
        return {"segments": [list(s) for s in self.segments], "breakpoints": self.breakpoints,
                "descents": self.descents,
                "within_segment_violations": self.within_segment_violations,
                "longest_fraction": self.longest_fraction, "tol": self.tol}


def monotone_segments(values: Sequence[float], tol: float = 1e-9) -> SegmentReport:
    """Split a sequence into maximal nondecreasing runs (drops of at most ``tol`` allowed)."""
    v = [float(x) for x in values]
    if len(v) < 2:
        raise ValueError("need at least 2 feasible rows")
    breaks = [i for i in range(1, len(v)) if v[i] < v[i - 1] - tol]
    bounds = [0, *breaks, len(v)]
    segments = list(zip(bounds[:-1], bounds[1:]))
    within = sum(1 for s, e in segments for i in range(s + 1, e) if v[i] < v[i - 1] - tol)
    longest = max(e - s for s, e in segments) / len(v)
    return SegmentReport(segments, breaks, len(breaks), within, longest, tol)


def quantile_crossings(config: CaseStudyConfig, x: float) -> list:
    """AV@R levels at which the boundary atom changes: the loss CDF values at ``x``."""
    dist = distribution_at(config.model, x)
    return [float(F) for F in cdf_values(dist) if 0.0 < F < 1.0 - 1e-15]


def breakpoint_alignment(config: CaseStudyConfig, table: SweepTable, report: SegmentReport) -> list:
    """For each coverage breakpoint, whether a quantile-atom crossing lies between the levels."""
    rows = [r for r in table.rows if r[-1]]
    out = []
    for b in report.breakpoints:
        (a0, x0), (a1, x1) = rows[b - 1][:2], rows[b][:2]
        levels = quantile_crossings(config, x1)
        if x0 != x1:
            levels += quantile_crossings(config, x0)
        out.append({"a_before": a0, "a_after": a1, "x_changed": x0 != x1,
                    "aligned": any(a0 < F <= a1 + 1e-12 for F in levels)})
    return out


def sweep_sidecar(config: CaseStudyConfig, table: SweepTable, value_column: str,
                  seed: int | None = None) -> dict:
    feasible = table.column(value_column)
    side = {"config": config.echo(), "meta": table.meta, "columns": list(table.columns),
            "rows": len(table.rows), "feasible_rows": len(feasible),
            "infeasible": [{"row": i, "reason": r} for i, r in enumerate(table.reasons) if r],
            "tolerances": asdict(config.tolerances), "seed": seed}
    if len(feasible) >= 2:
        seg = monotone_segments(feasible)
        side["segments"] = seg.to_dict()
        if table.meta.get("sweep") == "coverage":
            side["breakpoint_alignment"] = breakpoint_alignment(config, table, seg)
    else:
        side["segments"] = None
    return side


def write_sweep(table: SweepTable, sidecar: dict, csv_path, json_path) -> None:
    Path(csv_path).write_text(table.to_csv())
    Path(json_path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
