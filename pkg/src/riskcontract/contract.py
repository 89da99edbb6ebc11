"""Hidden-action contract design between a risk-averse insurer and user.

The user invests ``x`` at unit cost ``m``; the insurer offers coverage ``c``
of the loss for premium ``q``. With coherent measures the objectives reduce
to ``c*rho_i - q`` (insurer) and ``(1-c)*rho_u + m*x + q`` (user), where both
risks are taken of the loss distribution at ``x``.

:func:`solve_contract` replaces the user's best-response constraint by its
first-order condition and scans the resulting one-dimensional problem over
the action. Actions on the bounds of the action set are handled with the
inequality (KKT) form of that condition, and every candidate is checked
against a global best response on the solver grid. :func:`brute_force_bilevel`
is the independent grid oracle.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .distributions import (
    CHECK_TOL, ParameterizedLossModel, check_density_convexity, check_fosd, distribution_at,
)
from .optimize import argmin_first, golden_section, grid_then_golden
from .risk import Mixture, RiskMeasureSpec, describe, evaluate, evaluate_outcomes
from .sensitivity import risk_derivative_fd, risk_derivative_report

log = logging.getLogger(__name__)

PREMIUM_TOL = 1e-12


class InfeasibleContract(ValueError):
    """No valid contract at the requested action; ``reason`` names the failure."""

    def __init__(self, reason: str, x: float | None = None, detail: str = ""):
        self.reason = reason
        self.x = x
        msg = reason if x is None else f"{reason} at x={x:.6g}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NoContractError(RuntimeError):
    """Every action on the solver grid is infeasible."""

    def __init__(self, reasons: dict):
        self.reasons = reasons
        counts: dict = {}
        for r in reasons.values():
            counts[r] = counts.get(r, 0) + 1
        super().__init__(f"no feasible contract ({', '.join(f'{k}: {v}' for k, v in sorted(counts.items()))})")


@dataclass(frozen=True)
class Contract:
    coverage: float
    premium: float

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.coverage!r}")
        if not self.premium > 0.0:
            raise ValueError(f"premium must be positive, got {self.premium!r}")


@dataclass(frozen=True)
class Tolerances:
    check: float = CHECK_TOL          # equalities and C1
    derivative: float = 1e-6          # C2 and derivative sign checks
    ir: float = 1e-6
    stationarity: float = 1e-4
    premium_floor: float = 1e-9       # premium used when the optimum is the q -> 0+ limit
    golden: float = 1e-10
    ic: float = 1e-7                  # slack in the global best-response check
    step: float | None = None         # finite-difference step; None -> 1e-4 * width


@dataclass(frozen=True)
class ProblemSpec:
    insurer: RiskMeasureSpec
    user: RiskMeasureSpec
    model: ParameterizedLossModel
    m: float
    grid_points: int = 401
    tolerances: Tolerances = field(default_factory=Tolerances)
    boundary_candidates: bool = True

    def __post_init__(self):
        if not (isinstance(self.m, (int, float)) and self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"investment cost m must be positive, got {self.m!r}")
        if self.grid_points < 3:
            raise ValueError("solver grid needs at least 3 points")

    def grid(self) -> np.ndarray:
        return self.model.grid(self.grid_points)

    @property
    def cell(self) -> float:
        return self.model.width / (self.grid_points - 1)

    def rho_user(self, x: float) -> float:
        return evaluate(self.user, distribution_at(self.model, x))

    def rho_insurer(self, x: float) -> float:
        return evaluate(self.insurer, distribution_at(self.model, x))

    def d_user(self, x: float) -> float:
        return risk_derivative_fd(self.user, self.model, x, self.tolerances.step)

    def d_insurer(self, x: float) -> float:
        return risk_derivative_fd(self.insurer, self.model, x, self.tolerances.step)


@dataclass(frozen=True)
class BaselineResult:
    x0: float
    U_bar: float


# --- objectives ----------------------------------------------------------------


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def user_objective(spec: ProblemSpec, contract: Contract, x: float, debug: bool = False) -> float:
    """User's perceived loss ``(1-c)*rho_u + m*x + q`` under the contract."""
    c, q = contract.coverage, contract.premium
    value = (1.0 - c) * spec.rho_user(x) + spec.m * x + q
    if debug:
        dist = distribution_at(spec.model, x)
        direct = evaluate_outcomes(spec.user, (1.0 - c) * dist.support + spec.m * x + q, dist.probs)
        assert _close(value, direct, spec.tolerances.check), (value, direct)
    return value


def insurer_objective(spec: ProblemSpec, contract: Contract, x: float, debug: bool = False) -> float:
    """Insurer's perceived loss ``c*rho_i - q``."""
    c, q = contract.coverage, contract.premium
    value = c * spec.rho_insurer(x) - q
    if debug:
        dist = distribution_at(spec.model, x)
        direct = evaluate_outcomes(spec.insurer, c * dist.support - q, dist.probs)
        assert _close(value, direct, spec.tolerances.check), (value, direct)
    return value


def compromise_objective(spec: ProblemSpec, c: float, x: float) -> float:
    """``rho~[loss | x] + m*x`` for the compromise measure ``c*rho_i + (1-c)*rho_u``."""
    mix = Mixture(c, spec.insurer, spec.user)
    return evaluate(mix, distribution_at(spec.model, x)) + spec.m * x


# --- baseline and feasible contracts ---------------------------------------------


def solve_baseline(spec: ProblemSpec) -> BaselineResult:
    """User's best action without insurance and the reservation risk ``U_bar``."""
    f = lambda x: spec.rho_user(x) + spec.m * x
    x0, u = grid_then_golden(f, spec.model.action_low, spec.model.action_high,
                             spec.grid_points, spec.tolerances.golden)
    return BaselineResult(float(x0), float(u))


def coverage_from_derivative(d: float, m: float) -> float:
    """Coverage making ``x`` stationary for the insured user: ``1 + m/d``."""
    if not d < 0:
        raise InfeasibleContract("flat-risk", detail=f"risk derivative {d:.6g} is not negative")
    c = 1.0 + m / d
    if c < 0.0:
        raise InfeasibleContract("under-sensitive", detail=f"|d rho/dx| = {-d:.6g} < m = {m:.6g}")
    return min(c, 1.0)


def feasible_coverage(spec: ProblemSpec, x: float) -> float:
    d = spec.d_user(x)
    try:
        return coverage_from_derivative(d, spec.m)
    except InfeasibleContract as exc:
        raise InfeasibleContract(exc.reason, x, str(exc)) from None


def premium_from_ir(U_bar: float, m: float, x: float, c: float, rho_u: float) -> float:
    """Premium that makes the participation constraint bind."""
    return U_bar - m * x - (1.0 - c) * rho_u


def premium_printed_form(U_bar: float, m: float, x: float, c: float, rho_u: float) -> float:
    """The variant with ``c`` in place of ``1 - c``; reported for comparison only."""
    return U_bar - m * x - c * rho_u


def feasible_premium(spec: ProblemSpec, x: float, c: float, baseline: BaselineResult) -> float:
    q = premium_from_ir(baseline.U_bar, spec.m, x, c, spec.rho_user(x))
    if not q > PREMIUM_TOL:
        raise InfeasibleContract("non-positive-premium", x, f"q = {q:.6g}")
    return q


def reduced_objective(spec: ProblemSpec, x: float) -> float:
    """``U'(x)``: the insurer's problem after eliminating coverage through stationarity."""
    d = spec.d_user(x)
    c = coverage_from_derivative(d, spec.m)  # raises when infeasible
    ri, ru = spec.rho_insurer(x), spec.rho_user(x)
    m = spec.m
    eliminated = (1.0 + m / d) * ri - (m / d) * ru + m * x
    gap_form = (ri - ru) * (1.0 + m / d) + ru + m * x
    assert _close(eliminated, gap_form, spec.tolerances.check), (eliminated, gap_form)
    return gap_form


# --- theorem conditions ------------------------------------------------------------


@dataclass
class TheoremConditions:
    c1_holds: bool
    c2_holds: bool
    D_profile: list            # (x, rho_i - rho_u)
    min_gap: float             # min_x (rho_i - rho_u)
    min_sensitivity_gap: float  # min_x (|d rho_i| - |d rho_u|)


def check_theorem_conditions(spec: ProblemSpec, x_grid: Sequence[float] | None = None
                             ) -> TheoremConditions:
    """C1: insurer at least as risk-averse; C2: insurer at least as sensitive to ``x``."""
    xs = spec.grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    tol = spec.tolerances
    profile, sens = [], []
    for x in xs:
        x = float(x)
        profile.append((x, spec.rho_insurer(x) - spec.rho_user(x)))
        sens.append(abs(spec.d_insurer(x)) - abs(spec.d_user(x)))
    gaps = [g for _, g in profile]
    return TheoremConditions(bool(min(gaps) >= -tol.check), bool(min(sens) >= -tol.derivative),
                             profile, float(min(gaps)), float(min(sens)))


# --- solver ------------------------------------------------------------------------


@dataclass
class SolveReport:
    baseline: BaselineResult
    x_star: float
    contract: Contract
    insurer_objective: float
    user_objective: float
    ir_gap: float
    stationarity_residual: float
    D_profile: list
    c1_holds: bool
    c2_holds: bool
    security_enhanced: bool
    candidate: str
    premium_printed_form: float
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        """Insurer objective ``c*rho_i - q``, equal to ``U'(x*) - U_bar``."""
        return self.insurer_objective

    def to_dict(self) -> dict:
        return {
            "x0": self.baseline.x0,
            "U_bar": self.baseline.U_bar,
            "x_star": self.x_star,
            "c_star": self.contract.coverage,
            "q_star": self.contract.premium,
            "insurer_objective": self.insurer_objective,
            "user_objective": self.user_objective,
            "ir_gap": self.ir_gap,
            "stationarity_residual": self.stationarity_residual,
            "c1_holds": self.c1_holds,
            "c2_holds": self.c2_holds,
            "security_enhanced": self.security_enhanced,
            "candidate": self.candidate,
            "q_star_printed_form": self.premium_printed_form,
            "D_profile": [[x, d] for x, d in self.D_profile],
            "warnings": list(self.warnings),
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class _Candidate:
    x: float
    c: float
    q: float
    objective: float
    kind: str


class _Grid:
    """Risks of both parties evaluated once on the solver grid."""

    def __init__(self, spec: ProblemSpec):
        self.xs = spec.grid()
        self.ru = np.array([spec.rho_user(x) for x in self.xs])
        self.ri = np.array([spec.rho_insurer(x) for x in self.xs])

    def best_response_gap(self, spec: ProblemSpec, x: float, c: float, ru_x: float) -> float:
        """How much the user would gain by deviating from ``x`` to the best grid action."""
        inner = (1.0 - c) * self.ru + spec.m * self.xs
        return (1.0 - c) * ru_x + spec.m * x - float(inner.min())


def stationarity_residual(spec: ProblemSpec, x: float, c: float) -> float:
    """Projected gradient of the user's insured objective at ``x``.

    Equals ``|(1-c)*d rho_u/dx + m|`` in the interior; on a bound only the
    component pointing into the action set counts.
    """
    g = (1.0 - c) * spec.d_user(x) + spec.m
    eps = 1e-12 * max(1.0, spec.model.width)
    if x <= spec.model.action_low + eps:
        return max(0.0, -g)
    if x >= spec.model.action_high - eps:
        return max(0.0, g)
    return abs(g)


def _interior_candidate(spec, grid, baseline, x) -> _Candidate:
    c = feasible_coverage(spec, x)
    ru, ri = spec.rho_user(x), spec.rho_insurer(x)
    q = premium_from_ir(baseline.U_bar, spec.m, x, c, ru)
    if not q > PREMIUM_TOL:
        raise InfeasibleContract("non-positive-premium", x)
    if grid.best_response_gap(spec, x, c, ru) > spec.tolerances.ic:
        raise InfeasibleContract("not-best-response", x)
    return _Candidate(x, c, q, c * ri - q, "stationary")


def _boundary_candidate(spec, grid, baseline, upper: bool) -> _Candidate:
    """Best coverage when the user's best response sits on an action bound.

    The admissible coverages form an interval (from the global best-response
    inequalities on the grid and the one-sided derivative); the insurer's
    objective is linear in ``c`` with slope ``rho_i - rho_u``.
    """
    m, tol = spec.m, spec.tolerances.ic
    k = len(grid.xs) - 1 if upper else 0
    xb = float(grid.xs[k])
    ru, ri = grid.ru[k], grid.ri[k]
    c_lo, c_hi = 0.0, 1.0
    d = spec.d_user(xb)
    others = np.arange(len(grid.xs)) != k
    drop = grid.ru[others] - ru           # rho_u(x) - rho_u(xb)
    dist = np.abs(grid.xs[others] - xb)   # |x - xb|
    if upper:
        # (1-c) * drop >= m * dist - tol for every other grid action
        need = m * dist - tol
        if np.any((drop <= 0) & (need > 0)):
            raise InfeasibleContract("not-best-response", xb)
        pos = drop > 0
        if np.any(pos):
            c_hi = min(c_hi, 1.0 - float(np.max(need[pos] / drop[pos])))
        if not d < 0:
            raise InfeasibleContract("flat-risk", xb)
        c_hi = min(c_hi, 1.0 + m / d)
    else:
        # (1-c) * (rho_u(xb) - rho_u(x)) <= m * dist + tol
        rise = -drop
        pos = rise > 0
        if np.any(pos):
            c_lo = max(c_lo, 1.0 - float(np.min((m * dist[pos] + tol) / rise[pos])))
        if d < 0:
            c_lo = max(c_lo, 1.0 + m / d)
    # premium >= floor
    slack = baseline.U_bar - m * xb
    floor = spec.tolerances.premium_floor
    if ru > 0:
        c_lo = max(c_lo, 1.0 - (slack - floor) / ru)
    elif not slack > floor:
        raise InfeasibleContract("non-positive-premium", xb)
    if c_lo > c_hi:
        raise InfeasibleContract("empty-coverage-interval", xb)
    gap = ri - ru
    c = c_hi if gap < 0 else c_lo
    c = min(max(c, 0.0), 1.0)
    q = premium_from_ir(baseline.U_bar, m, xb, c, ru)
    if not q > PREMIUM_TOL:
        raise InfeasibleContract("non-positive-premium", xb)
    return _Candidate(xb, c, q, c * ri - q, "upper-bound" if upper else "lower-bound")


def solve_contract(spec: ProblemSpec, baseline: BaselineResult | None = None,
                   diagnostics: bool = True) -> SolveReport:
    """Optimal contract and the induced action.

    Raises :class:`NoContractError` when no action admits a feasible contract.
    """
    baseline = baseline or solve_baseline(spec)
    grid = _Grid(spec)
    tol = spec.tolerances
    reasons: dict = {}
    stationary: list[_Candidate] = []
    for x in grid.xs:
        x = float(x)
        try:
            stationary.append(_interior_candidate(spec, grid, baseline, x))
        except InfeasibleContract as exc:
            reasons[x] = exc.reason
    warnings = []
    n_not_br = sum(1 for r in reasons.values() if r == "not-best-response")
    if n_not_br:
        warnings.append(f"{n_not_br} stationary action(s) rejected: not a global best response of the user")

    candidates = list(stationary)
    if stationary:
        best = min(stationary, key=lambda cd: (cd.objective, cd.x))
        refined = _refine(spec, grid, baseline, best)
        if refined is not None:
            candidates.append(refined)
    if spec.boundary_candidates:
        for upper in (False, True):
            try:
                candidates.append(_boundary_candidate(spec, grid, baseline, upper))
            except InfeasibleContract as exc:
                reasons.setdefault(float(exc.x), exc.reason)
    if not candidates:
        raise NoContractError(reasons)

    best = min(candidates, key=lambda cd: (cd.objective, cd.x))
    if not stationary:
        warnings.append("no interior stationary contract; optimum uses a bound of the action set")
    if best.q <= 10 * tol.premium_floor:
        warnings.append("degenerate optimum: premium and coverage tend to zero (no-insurance limit)")

    contract = Contract(best.c, best.q)
    u_obj = user_objective(spec, contract, best.x, debug=True)
    j_obj = insurer_objective(spec, contract, best.x, debug=True)
    ir_gap = abs(u_obj - baseline.U_bar)
    if ir_gap > tol.ir:
        warnings.append(f"participation constraint gap {ir_gap:.3g} exceeds {tol.ir:g}")
    resid = stationarity_residual(spec, best.x, best.c)
    if resid > tol.stationarity:
        warnings.append(f"stationarity residual {resid:.3g} exceeds {tol.stationarity:g}")
    if risk_derivative_report(spec.user, spec.model, best.x, tol.step).kink:
        warnings.append("user risk has a kink at x*: dual optimizer not unique")

    cond = check_theorem_conditions(spec, grid.xs)
    diag = {"solver_grid_points": spec.grid_points, "candidate_count": len(candidates),
            "infeasible_actions": len(reasons), "min_D": cond.min_gap,
            "min_sensitivity_gap": cond.min_sensitivity_gap}
    if diagnostics:
        diag.update(_assumption_diagnostics(spec, warnings))
    return SolveReport(
        baseline=baseline, x_star=best.x, contract=contract, insurer_objective=j_obj,
        user_objective=u_obj, ir_gap=ir_gap, stationarity_residual=resid,
        D_profile=cond.D_profile, c1_holds=cond.c1_holds, c2_holds=cond.c2_holds,
        security_enhanced=bool(best.x >= baseline.x0 - spec.cell), candidate=best.kind,
        premium_printed_form=premium_printed_form(baseline.U_bar, spec.m, best.x, best.c,
                                                  spec.rho_user(best.x)),
        warnings=warnings, diagnostics=diag)


def _refine(spec, grid, baseline, best: _Candidate) -> _Candidate | None:
    """Golden-section refinement of the reduced objective around the best grid action."""
    k = int(np.searchsorted(grid.xs, best.x))
    a = float(grid.xs[max(k - 1, 0)])
    b = float(grid.xs[min(k + 1, len(grid.xs) - 1)])

    def f(x):
        try:
            return _interior_candidate(spec, grid, baseline, x).objective
        except InfeasibleContract:
            return math.inf

    x, val = golden_section(f, a, b, spec.tolerances.golden)
    if not math.isfinite(val) or val >= best.objective:
        return None
    cand = _interior_candidate(spec, grid, baseline, x)
    cand.kind = "stationary-refined"
    return cand


def _assumption_diagnostics(spec: ProblemSpec, warnings: list, points: int = 21) -> dict:
    xs = spec.model.grid(points)
    fosd = [check_fosd(spec.model, float(a), float(b)) for a, b in zip(xs, xs[1:])]
    fosd_ok = all(r.passed for r in fosd)
    if not fosd_ok:
        warnings.append("loss family fails first-order stochastic dominance on the action grid")
    out = {"fosd_passed": fosd_ok, "fosd_max_gap": max(r.max_gap for r in fosd)}
    h = min(1e-3, spec.model.width / 10) if spec.model.width > 0 else 0
    if h > 0:
        conv = check_density_convexity(spec.model, xs, h)
        if not conv.passed:
            warnings.append("loss pmf is not convex in the action; the security-enhancement "
                            "guarantee does not apply to this family")
        out["density_convexity_passed"] = conv.passed
        out["min_pmf_second_difference"] = conv.min_value
    return out


# --- oracle ------------------------------------------------------------------------


@dataclass
class OracleReport:
    c: float
    x: float
    q: float
    objective: float
    U_bar: float
    c_grid: np.ndarray
    x_of_c: np.ndarray
    objective_of_c: np.ndarray   # nan where the premium was non-positive

    def to_dict(self) -> dict:
        return {"c": self.c, "x": self.x, "q": self.q, "objective": self.objective,
                "U_bar": self.U_bar}


def brute_force_bilevel(spec: ProblemSpec, c_grid: Sequence[float], x_grid: Sequence[float],
                        U_bar: float | None = None) -> OracleReport:
    """Exhaustive search: best response on ``x_grid`` for every ``c``, then the insurer's best ``c``.

    ``U_bar`` defaults to the no-insurance minimum over ``x_grid``.
    """
    cs = np.asarray(c_grid, dtype=float)
    xs = np.asarray(x_grid, dtype=float)
    if cs.size == 0 or xs.size == 0:
        raise ValueError("grids must be nonempty")
    ru = np.array([spec.rho_user(float(x)) for x in xs])
    ri = np.array([spec.rho_insurer(float(x)) for x in xs])
    m = spec.m
    if U_bar is None:
        U_bar = float(np.min(ru + m * xs))
    x_of_c = np.empty(cs.size)
    obj = np.full(cs.size, np.nan)
    qs = np.full(cs.size, np.nan)
    for i, c in enumerate(cs):
        j = argmin_first((1.0 - c) * ru + m * xs)
        x_of_c[i] = xs[j]
        q = U_bar - m * xs[j] - (1.0 - c) * ru[j]
        if q > PREMIUM_TOL:
            qs[i] = q
            obj[i] = c * ri[j] - q
    if np.all(np.isnan(obj)):
        return OracleReport(math.nan, math.nan, math.nan, math.nan, U_bar, cs, x_of_c, obj)
    i = argmin_first(obj)
    return OracleReport(float(cs[i]), float(x_of_c[i]), float(qs[i]), float(obj[i]), U_bar,
                        cs, x_of_c, obj)
