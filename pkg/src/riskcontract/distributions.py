"""Finite-support loss distributions and action-parameterized loss families.

A :class:`ParameterizedLossModel` maps a protection investment ``x`` in the
compact action set ``[action_low, action_high]`` to a
:class:`DiscreteDistribution` over nonnegative losses. Two families are
supported: the binomial ransomware model (each of ``n`` computers is locked
independently with probability ``1 - damping * x**2``) and tabulated pmfs
interpolated linearly in ``x``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import comb

PROB_TOL = 1e-12
CHECK_TOL = 1e-9


class DomainError(ValueError):
    """An action lies outside the action set."""


class ParameterError(ValueError):
    """A model parameter yields an invalid distribution."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Loss values ``support`` (strictly increasing, >= 0) with aligned ``probs``."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        z = np.array(self.support, dtype=float).ravel()
        p = np.array(self.probs, dtype=float).ravel()
        if z.size == 0:
            raise ValueError("empty support")
        if z.shape != p.shape:
            raise ValueError(f"support has {z.size} values but probs has {p.size}")
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(p)):
            raise ValueError("support and probs must be finite")
        if np.any(z < 0):
            raise ValueError("loss values must be nonnegative")
        if np.any(np.diff(z) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "support", _frozen(z))
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_outcomes(cls, values: Sequence[float], probs: Sequence[float]) -> "DiscreteDistribution":
        """Build from unsorted outcomes, merging duplicate loss values."""
        z = np.asarray(values, dtype=float).ravel()
        p = np.asarray(probs, dtype=float).ravel()
        uniq, inv = np.unique(z, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, p)
        return cls(uniq, merged)

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    def __len__(self) -> int:
        return self.support.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return (np.array_equal(self.support, other.support)
                and np.array_equal(self.probs, other.probs))

    def __repr__(self) -> str:
        pairs = ", ".join(f"{z:g}: {p:.6g}" for z, p in zip(self.support, self.probs))
        return f"DiscreteDistribution({{{pairs}}})"


def cdf(dist: DiscreteDistribution, t: float) -> float:
    """Right-continuous distribution function ``P(Z <= t)``."""
    k = np.searchsorted(dist.support, t, side="right")
    return float(min(dist.probs[:k].sum(), 1.0))


def cdf_values(dist: DiscreteDistribution) -> np.ndarray:
    """Distribution function evaluated at each support point."""
    return np.minimum(np.cumsum(dist.probs), 1.0)


def expectation(dist: DiscreteDistribution) -> float:
    return float(dist.support @ dist.probs)


# --- parameterized families -------------------------------------------------


@dataclass(frozen=True)
class BinomialRansomware:
    """Number of locked computers among ``n``; lock probability ``1 - damping * x**2``."""

    n: int
    damping: float = 0.8

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"computer count must be a positive integer, got {self.n!r}")
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError(f"damping must lie in (0, 1], got {self.damping!r}")

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n + 1, dtype=float)

    def lock_probability(self, x: float) -> float:
        return 1.0 - self.damping * x * x

    def pmf(self, x: float) -> np.ndarray:
        p = self.lock_probability(x)
        if not -PROB_TOL <= p <= 1.0 + PROB_TOL:
            raise ParameterError(f"lock probability {p!r} at x={x!r} is outside [0, 1]")
        p = min(max(p, 0.0), 1.0)
        k = np.arange(self.n + 1)
        pmf = comb(self.n, k) * np.power(p, k) * np.power(1.0 - p, self.n - k)
        return pmf / pmf.sum()


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Pmfs given on an ascending action grid over one shared support.

    Between grid actions the pmf is interpolated linearly and renormalized;
    outside the grid it is held at the nearest end.
    """

    grid: np.ndarray
    support: np.ndarray
    pmfs: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float).ravel()
        support = np.array(self.support, dtype=float).ravel()
        pmfs = np.atleast_2d(np.array(self.pmfs, dtype=float))
        if grid.size == 0:
            raise ParameterError("tabulated family needs at least one grid action")
        if np.any(np.diff(grid) <= 0):
            raise ParameterError("tabulated action grid must be strictly increasing")
        if pmfs.shape != (grid.size, support.size):
            raise ParameterError(
                f"pmf table has shape {pmfs.shape}, expected {(grid.size, support.size)}")
        for row, x in zip(pmfs, grid):
            try:
                DiscreteDistribution(support, row)
            except ValueError as exc:
                raise ParameterError(f"invalid pmf at x={x:g}: {exc}") from None
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "support", _frozen(support))
        object.__setattr__(self, "pmfs", _frozen(pmfs))

    def pmf(self, x: float) -> np.ndarray:
        grid = self.grid
        if grid.size == 1 or x <= grid[0]:
            return self.pmfs[0].copy()
        if x >= grid[-1]:
            return self.pmfs[-1].copy()
        k = int(np.searchsorted(grid, x, side="right")) - 1
        w = (x - grid[k]) / (grid[k + 1] - grid[k])
        row = (1.0 - w) * self.pmfs[k] + w * self.pmfs[k + 1]
        row = np.maximum(row, 0.0)
        return row / row.sum()


Family = Union[BinomialRansomware, Tabulated]


@dataclass(frozen=True, eq=False)
class ParameterizedLossModel:
    """Action set ``[action_low, action_high]`` and a loss family over it."""

    family: Family
    action_low: float = 0.0
    action_high: float = 1.0

    def __post_init__(self):
        if not self.action_low <= self.action_high:
            raise ParameterError(
                f"action_low={self.action_low!r} exceeds action_high={self.action_high!r}")
        if isinstance(self.family, BinomialRansomware):
            # lock probability must stay in [0, 1] on the whole action set
            for x in (self.action_low, self.action_high, 0.0):
                if self.action_low <= x <= self.action_high:
                    self.family.pmf(x)

    @property
    def support(self) -> np.ndarray:
        return self.family.support

    @property
    def width(self) -> float:
        return self.action_high - self.action_low

    def contains(self, x: float, slack: float = 1e-12) -> bool:
        return self.action_low - slack <= x <= self.action_high + slack

    def clip(self, x: float) -> float:
        return min(max(x, self.action_low), self.action_high)

    def pmf(self, x: float) -> np.ndarray:
        if not self.contains(x):
            raise DomainError(
                f"action {x!r} outside [{self.action_low}, {self.action_high}]")
        return self.family.pmf(self.clip(x))

    def grid(self, points: int) -> np.ndarray:
        return np.linspace(self.action_low, self.action_high, points)


def binomial_model(n: int = 10, damping: float = 0.8) -> ParameterizedLossModel:
    """The ransomware family on the action set ``[0, 1]``."""
    return ParameterizedLossModel(BinomialRansomware(n, damping), 0.0, 1.0)


def tabulated_model(grid, support, pmfs, action_low=None, action_high=None) -> ParameterizedLossModel:
    fam = Tabulated(grid, support, pmfs)
    lo = fam.grid[0] if action_low is None else float(action_low)
    hi = fam.grid[-1] if action_high is None else float(action_high)
    return ParameterizedLossModel(fam, lo, hi)


def distribution_at(model: ParameterizedLossModel, x: float) -> DiscreteDistribution:
    """Loss distribution when the user invests ``x``."""
    return DiscreteDistribution(model.support, model.pmf(x))


def load_tabulated_csv(path, action_low=None, action_high=None) -> ParameterizedLossModel:
    """Read a family from CSV: header ``x,<support...>``, then one pmf row per action."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParameterError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "x" or len(header) < 2:
        raise ParameterError(f"{path}:1: header must be 'x,<support values...>'")
    try:
        support = [float(v) for v in header[1:]]
    except ValueError as exc:
        raise ParameterError(f"{path}:1: bad support value ({exc})") from None
    grid, pmfs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParameterError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: {exc}") from None
        grid.append(vals[0])
        pmfs.append(vals[1:])
    return tabulated_model(grid, support, pmfs, action_low, action_high)


def write_tabulated_csv(model: ParameterizedLossModel, path) -> None:
    fam = model.family
    if not isinstance(fam, Tabulated):
        raise TypeError("only tabulated families can be written")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", *(f"{z:.17g}" for z in fam.support)])
        for x, row in zip(fam.grid, fam.pmfs):
            w.writerow([f"{x:.17g}", *(f"{p:.17g}" for p in row)])


# --- assumption diagnostics -------------------------------------------------


@dataclass
class FosdReport:
    x1: float
    x2: float
    passed: bool
    max_gap: float
    worst_loss: float | None = None
    tol: float = CHECK_TOL

    def to_dict(self) -> dict:
        return {"x1": self.x1, "x2": self.x2, "passed": self.passed,
                "max_gap": self.max_gap, "worst_loss": self.worst_loss, "tol": self.tol}


def check_fosd(model: ParameterizedLossModel, x1: float, x2: float,
               tol: float = CHECK_TOL) -> FosdReport:
    """Check that investing ``x2 >= x1`` shifts losses down: ``F(., x2) >= F(., x1)``.

    ``max_gap`` is the largest amount by which ``F(., x1)`` exceeds ``F(., x2)``
    (zero when dominance holds everywhere).
    """
    if x1 > x2:
        raise ValueError(f"need x1 <= x2, got {x1!r} > {x2!r}")
    for x in (x1, x2):
        if not model.contains(x):
            raise DomainError(f"action {x!r} outside [{model.action_low}, {model.action_high}]")
    f1 = np.cumsum(model.pmf(x1))
    f2 = np.cumsum(model.pmf(x2))
    gaps = f1 - f2
    k = int(np.argmax(gaps))
    gap = max(float(gaps[k]), 0.0)
    return FosdReport(float(x1), float(x2), bool(gap <= tol), gap,
                      float(model.support[k]) if gap > 0 else None, tol)


@dataclass
class ConvexityReport:
    x_grid: np.ndarray
    support: np.ndarray
    second_differences: np.ndarray  # shape (len(x_grid), len(support))
    passed: bool
    min_value: float
    h: float
    tol: float = CHECK_TOL

    def to_dict(self) -> dict:
        k = np.unravel_index(np.argmin(self.second_differences), self.second_differences.shape)
        return {"passed": self.passed, "min_second_difference": self.min_value,
                "worst_x": float(self.x_grid[k[0]]), "worst_loss": float(self.support[k[1]]),
                "h": self.h, "tol": self.tol, "grid_points": int(len(self.x_grid))}


def pmf_second_difference(model: ParameterizedLossModel, x: float, h: float) -> np.ndarray:
    """Second difference of every pmf entry at ``x``; one-sided near the action bounds."""
    lo, hi = model.action_low, model.action_high
    if x - h >= lo - 1e-15 and x + h <= hi + 1e-15:
        return (model.pmf(min(x + h, hi)) - 2.0 * model.pmf(x) + model.pmf(max(x - h, lo))) / h**2
    s = 1.0 if x - h < lo else -1.0
    # second-order one-sided stencil
    p = [model.pmf(model.clip(x + s * j * h)) for j in range(4)]
    return (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) / h**2


def check_density_convexity(model: ParameterizedLossModel, x_grid: Sequence[float],
                            h: float = 1e-3, tol: float = CHECK_TOL) -> ConvexityReport:
    """Check that every pmf entry is convex in the action, by second differences."""
    xs = np.asarray(x_grid, dtype=float)
    if xs.size < 3:
        raise ValueError("convexity check needs at least 3 grid actions")
    if h <= 0:
        raise ValueError("step must be positive")
    if 3 * h > model.width:
        raise ValueError(f"step {h!r} too large for the action set")
    d2 = np.array([pmf_second_difference(model, float(x), h) for x in xs])
    mn = float(d2.min())
    return ConvexityReport(xs, model.support.copy(), d2, bool(mn >= -tol), mn, h, tol)
