"""Law-invariant coherent risk measures on discrete losses.

Measures are small immutable descriptions (:class:`Expectation`,
:class:`AVaR`, :class:`AbsoluteSemideviation`, :class:`Mixture`) evaluated
by :func:`evaluate`. Evaluation works on arbitrary real outcome vectors so
the axiom harness can shift and scale losses below zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distributions import (
    CHECK_TOL, DiscreteDistribution, ParameterizedLossModel, check_fosd, distribution_at,
)

MAX_MIXTURE_DEPTH = 8


class RiskMeasureSpec:
    """Base class; subclasses implement ``_value(z, p)`` on outcome arrays."""

    def _value(self, z: np.ndarray, p: np.ndarray) -> float:
        raise NotImplementedError

    @property
    def depth(self) -> int:
        return 0

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "RiskMeasureSpec":
        return measure_from_dict(d)


@dataclass(frozen=True)
class Expectation(RiskMeasureSpec):
    def _value(self, z, p):
        return float(z @ p)

    def to_dict(self):
        return {"kind": "expectation"}


@dataclass(frozen=True)
class AVaR(RiskMeasureSpec):
    """Average value-at-risk: mean of the worst ``1 - level`` fraction of losses."""

    level: float

    def __post_init__(self):
        if not 0.0 <= self.level < 1.0:
            raise ValueError(f"AV@R level must lie in [0, 1), got {self.level!r}")

    def _value(self, z, p):
        zs, take = _tail_allocation(z, p, self.level)
        return float(take @ zs) / (1.0 - self.level)

    def to_dict(self):
        return {"kind": "avar", "level": self.level}


@dataclass(frozen=True)
class AbsoluteSemideviation(RiskMeasureSpec):
    """``E[Z] + theta * E[(Z - E[Z])_+]``; coherent for ``theta`` in [0, 1]."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"semideviation theta must lie in [0, 1], got {self.theta!r}")

    def _value(self, z, p):
        mean = float(z @ p)
        return mean + self.theta * float(np.maximum(z - mean, 0.0) @ p)

    def to_dict(self):
        return {"kind": "semideviation", "theta": self.theta}


@dataclass(frozen=True)
class Mixture(RiskMeasureSpec):
    """Convex combination ``weight * left + (1 - weight) * right``."""

    weight: float
    left: RiskMeasureSpec
    right: RiskMeasureSpec

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {self.weight!r}")
        for part in (self.left, self.right):
            if not isinstance(part, RiskMeasureSpec):
                raise TypeError(f"mixture component {part!r} is not a risk measure")
        if self.depth > MAX_MIXTURE_DEPTH:
            raise ValueError(f"mixture nesting depth {self.depth} exceeds {MAX_MIXTURE_DEPTH}")

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)

    def _value(self, z, p):
        return self.weight * self.left._value(z, p) + (1.0 - self.weight) * self.right._value(z, p)

    def to_dict(self):
        return {"kind": "mixture", "weight": self.weight,
                "left": self.left.to_dict(), "right": self.right.to_dict()}


_KINDS = {
    "expectation": (Expectation, ()),
    "avar": (AVaR, ("level",)),
    "semideviation": (AbsoluteSemideviation, ("theta",)),
}


def measure_from_dict(d: dict) -> RiskMeasureSpec:
    """Inverse of ``to_dict``; unknown keys are rejected."""
    if not isinstance(d, dict) or "kind" not in d:
        raise ValueError(f"risk measure must be an object with a 'kind', got {d!r}")
    kind = d["kind"]
    if kind == "mixture":
        allowed = {"kind", "weight", "left", "right"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown key(s) for mixture: {sorted(extra)}")
        missing = allowed - set(d)
        if missing:
            raise ValueError(f"mixture missing key(s): {sorted(missing)}")
        return Mixture(float(d["weight"]), measure_from_dict(d["left"]),
                       measure_from_dict(d["right"]))
    if kind not in _KINDS:
        raise ValueError(f"unknown risk measure kind {kind!r}")
    cls, params = _KINDS[kind]
    extra = set(d) - {"kind", *params}
    if extra:
        raise ValueError(f"unknown key(s) for {kind}: {sorted(extra)}")
    missing = set(params) - set(d)
    if missing:
        raise ValueError(f"{kind} missing key(s): {sorted(missing)}")
    return cls(*(float(d[k]) for k in params))


def describe(spec: RiskMeasureSpec) -> str:
    if isinstance(spec, Expectation):
        return "E"
    if isinstance(spec, AVaR):
        return f"AVaR({spec.level:g})"
    if isinstance(spec, AbsoluteSemideviation):
        return f"SD({spec.theta:g})"
    if isinstance(spec, Mixture):
        return f"{spec.weight:g}*{describe(spec.left)}+{1 - spec.weight:g}*{describe(spec.right)}"
    return repr(spec)


# --- evaluation ---------------------------------------------------------------


def _tail_allocation(z: np.ndarray, p: np.ndarray, level: float):
    """Greedy allocation of tail mass ``1 - level`` from the largest loss down.

    Returns outcomes sorted descending and the mass taken from each; the
    boundary atom is split fractionally.
    """
    order = np.argsort(-z, kind="stable")
    zs, ps = z[order], p[order]
    before = np.concatenate(([0.0], np.cumsum(ps)[:-1]))
    take = np.clip((1.0 - level) - before, 0.0, ps)
    return zs, take


def _as_arrays(dist) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dist, DiscreteDistribution):
        return dist.support, dist.probs
    z, p = dist
    return np.asarray(z, dtype=float), np.asarray(p, dtype=float)


def evaluate(spec: RiskMeasureSpec, dist: DiscreteDistribution) -> float:
    """Risk of a loss distribution."""
    z, p = _as_arrays(dist)
    if z.size == 0:
        raise ValueError("empty support")
    return spec._value(z, p)


def evaluate_outcomes(spec: RiskMeasureSpec, values: Sequence[float],
                      probs: Sequence[float]) -> float:
    """Risk of a random variable given as (possibly unsorted, repeated, signed) outcomes."""
    z = np.asarray(values, dtype=float).ravel()
    p = np.asarray(probs, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("empty support")
    if z.shape != p.shape:
        raise ValueError("values and probs differ in length")
    return spec._value(z, p)


@dataclass(frozen=True, eq=False)
class DualDensity:
    """Worst-case density with respect to the reference distribution.

    ``threshold`` is the multiplier of the normalization constraint (the
    value-at-risk), needed for envelope derivatives.
    """

    weights: np.ndarray
    threshold: float


def value_at_risk(dist: DiscreteDistribution, level: float) -> float:
    """Lower quantile ``inf{t : F(t) >= level}``; ``-inf`` at level 0."""
    if level <= 0.0:
        return -np.inf
    cum = np.cumsum(dist.probs)
    k = int(np.searchsorted(cum, level - 1e-14, side="left"))
    return float(dist.support[min(k, len(dist) - 1)])


def dual_evaluate_avar(dist: DiscreteDistribution, level: float) -> tuple[float, DualDensity]:
    """Solve ``max sum z*zeta*p`` s.t. ``0 <= zeta <= 1/(1-level)``, ``sum zeta*p = 1``.

    Filled greedily from the largest loss down. Zero-probability atoms get the
    cap above the value-at-risk and zero below it, which is the choice that
    makes the envelope derivative exact when mass flows into them.
    """
    if not 0.0 <= level < 1.0:
        raise ValueError(f"AV@R level must lie in [0, 1), got {level!r}")
    cap = 1.0 / (1.0 - level)
    z, p = dist.support, dist.probs
    order = np.argsort(-z, kind="stable")
    zs, take = _tail_allocation(z, p, level)
    var = value_at_risk(dist, level)
    zeta = np.empty_like(z)
    ps = p[order]
    pos = ps > 0
    zeta_sorted = np.where(pos, take / np.where(pos, ps, 1.0) * cap,
                           np.where(zs > var, cap, 0.0))
    zeta[order] = np.minimum(zeta_sorted, cap)
    value = float(np.sum(z * zeta * p))
    threshold = var if np.isfinite(var) else float(z[p > 0].min())
    return value, DualDensity(zeta, threshold)


# --- axiom harness ------------------------------------------------------------

Sampler = Callable[[np.random.Generator], tuple[np.ndarray, np.ndarray]]

AXIOMS = ("monotonicity", "convexity", "translation", "homogeneity", "risk_aversion")


def default_sampler(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """A random finite sample space: scenario probabilities and one loss vector."""
    k = int(rng.integers(2, 17))
    probs = rng.dirichlet(np.full(k, 0.7))
    # a few scenarios share a loss value so merged atoms are exercised
    z = rng.normal(0.0, 5.0, size=k)
    if k > 3 and rng.random() < 0.3:
        z[1] = z[0]
    return probs, z


@dataclass
class AxiomReport:
    measure: str
    trials: int
    seed: int
    tol: float
    max_violation: dict = field(default_factory=dict)

    @property
    def passed(self) -> dict:
        return {k: v <= self.tol for k, v in self.max_violation.items()}

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {"measure": self.measure, "trials": self.trials, "seed": self.seed,
                "tol": self.tol, "all_passed": self.all_passed,
                "axioms": {k: {"max_violation": self.max_violation[k], "passed": self.passed[k]}
                           for k in AXIOMS}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_axioms(spec: RiskMeasureSpec, sampler: Sampler | None = None, trials: int = 1000,
                 tol: float = 1e-9, seed: int = 0) -> AxiomReport:
    """Randomized check of monotonicity, convexity, translation, homogeneity and ``rho >= E``.

    Each trial draws a sample space and two losses ``Z``, ``Z'`` on it; the
    report keeps the largest violation seen per property.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = sampler or default_sampler
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(AXIOMS, 0.0)
    mean = Expectation()

    def rho(z, p):
        return spec._value(z, p)

    for _ in range(trials):
        p, z = sampler(rng)
        z2 = rng.normal(0.0, 5.0, size=z.size)
        r = rho(z, p)
        # (A1) Z >= W pointwise implies rho(Z) >= rho(W)
        w = z - rng.exponential(2.0, size=z.size) * (rng.random(z.size) < 0.7)
        worst["monotonicity"] = max(worst["monotonicity"], rho(w, p) - r)
        t = rng.random()
        mix = rho(t * z + (1 - t) * z2, p) - (t * r + (1 - t) * rho(z2, p))
        worst["convexity"] = max(worst["convexity"], mix)
        a = rng.normal(0.0, 10.0)
        worst["translation"] = max(worst["translation"], abs(rho(z + a, p) - (r + a)))
        s = rng.exponential(3.0)
        worst["homogeneity"] = max(worst["homogeneity"], abs(rho(s * z, p) - s * r))
        worst["risk_aversion"] = max(worst["risk_aversion"], mean._value(z, p) - r)
    return AxiomReport(describe(spec), trials, seed, tol,
                       {k: float(v) for k, v in worst.items()})


@dataclass
class DominanceConsistencyReport:
    measure: str
    x_grid: list
    risks: list
    passed: bool
    violations: list = field(default_factory=list)  # (x_k, x_k+1, increase)
    fosd_failures: list = field(default_factory=list)  # (x_k, x_k+1, gap)

    @property
    def skipped(self) -> bool:
        return bool(self.fosd_failures)

    def to_dict(self) -> dict:
        return {"measure": self.measure, "passed": self.passed, "skipped_pairs": len(self.fosd_failures),
                "fosd_failures": self.fosd_failures, "violations": self.violations,
                "x_grid": self.x_grid, "risks": self.risks}


def check_dominance_consistency(spec: RiskMeasureSpec, model: ParameterizedLossModel,
                                x_grid: Sequence[float], tol: float = CHECK_TOL
                                ) -> DominanceConsistencyReport:
    """Check risk is nonincreasing in the action on grid pairs where dominance holds.

    Pairs failing first-order dominance are skipped and listed instead.
    """
    xs = [float(x) for x in x_grid]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("x_grid must be ascending")
    risks = [evaluate(spec, distribution_at(model, x)) for x in xs]
    violations, skipped = [], []
    for k in range(len(xs) - 1):
        fosd = check_fosd(model, xs[k], xs[k + 1], tol)
        if not fosd.passed:
            skipped.append((xs[k], xs[k + 1], fosd.max_gap))
            continue
        rise = risks[k + 1] - risks[k]
        if rise > tol:
            violations.append((xs[k], xs[k + 1], rise))
    return DominanceConsistencyReport(describe(spec), xs, risks, not violations and not skipped,
                                      violations, skipped)
