"""Derivatives of the action-to-risk map ``x -> rho[loss | x]``.

Finite differences use central stencils in the interior and second-order
one-sided stencils at the action bounds. For AV@R an envelope (Danskin)
estimator built from the dual optimizer is also available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ParameterizedLossModel, distribution_at
from .risk import RiskMeasureSpec, dual_evaluate_avar, evaluate

KINK_TOL = 1e-6


def default_step(model: ParameterizedLossModel) -> float:
    return 1e-4 * model.width


def _check_step(h: float | None, model: ParameterizedLossModel) -> float:
    h = default_step(model) if h is None else float(h)
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    if 3 * h > model.width:
        raise ValueError(f"step {h!r} too large for action set of width {model.width!r}")
    return h


def risk_curve(spec: RiskMeasureSpec, model: ParameterizedLossModel):
    """``x -> rho[loss | x]`` as a plain function."""
    return lambda x: evaluate(spec, distribution_at(model, model.clip(x)))


def _first_derivative(f, x, h, lo, hi):
    if x - h >= lo and x + h <= hi:
        return (f(x + h) - f(x - h)) / (2 * h)
    if x - h < lo:
        return (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h)
    return (3 * f(x) - 4 * f(x - h) + f(x - 2 * h)) / (2 * h)


def risk_derivative_fd(spec: RiskMeasureSpec, model: ParameterizedLossModel, x: float,
                       h: float | None = None) -> float:
    """Finite-difference estimate of ``d rho / dx`` at ``x``."""
    h = _check_step(h, model)
    x = float(x)
    distribution_at(model, x)  # domain check
    f = risk_curve(spec, model)
    return _first_derivative(f, x, h, model.action_low, model.action_high)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    left: float | None
    right: float | None
    kink: bool


def risk_derivative_report(spec: RiskMeasureSpec, model: ParameterizedLossModel, x: float,
                           h: float | None = None, tol: float = KINK_TOL) -> DerivativeEstimate:
    """Derivative plus one-sided values; ``kink`` when they disagree by more than ``10 * tol``."""
    h = _check_step(h, model)
    x = float(x)
    value = risk_derivative_fd(spec, model, x, h)
    f = risk_curve(spec, model)
    left = right = None
    if x - 2 * h >= model.action_low:
        left = (3 * f(x) - 4 * f(x - h) + f(x - 2 * h)) / (2 * h)
    if x + 2 * h <= model.action_high:
        right = (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h)
    kink = left is not None and right is not None and abs(left - right) > 10 * tol
    return DerivativeEstimate(value, left, right, kink)


def pmf_derivative(model: ParameterizedLossModel, x: float, h: float) -> np.ndarray:
    """Finite-difference derivative of every pmf entry with respect to the action."""
    return _first_derivative(model.pmf, float(x), h, model.action_low, model.action_high)


def risk_derivative_dual(model: ParameterizedLossModel, x: float, level: float,
                         h: float | None = None) -> float:
    """Envelope derivative of AV@R with the dual optimizer held fixed.

    The normalization multiplier (the value-at-risk) enters as
    ``sum((z - VaR) * zeta * dp/dx)``; without it the estimate is biased
    whenever the pmf derivative does not integrate against ``zeta`` to zero.
    """
    h = _check_step(h, model)
    dist = distribution_at(model, x)
    _, dual = dual_evaluate_avar(dist, level)
    dp = pmf_derivative(model, x, h)
    return float(np.sum((dist.support - dual.threshold) * dual.weights * dp))


def risk_second_derivative_fd(spec: RiskMeasureSpec, model: ParameterizedLossModel, x: float,
                              h: float | None = None) -> float:
    """Second central difference of the risk; one-sided second-order at the bounds."""
    h = _check_step(h, model)
    x = float(x)
    distribution_at(model, x)
    f = risk_curve(spec, model)
    lo, hi = model.action_low, model.action_high
    if x - h >= lo and x + h <= hi:
        return (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    s = 1.0 if x - h < lo else -1.0
    return (2 * f(x) - 5 * f(x + s * h) + 4 * f(x + 2 * s * h) - f(x + 3 * s * h)) / h**2
