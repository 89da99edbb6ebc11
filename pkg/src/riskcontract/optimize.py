"""Scalar minimization on a compact interval: grid scan plus golden-section refinement."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-10, max_iter: int = 200) -> tuple[float, float]:
    """Minimize ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    Only a local minimizer is guaranteed unless ``f`` is unimodal on the
    bracket. The endpoints are compared against the interior result so a
    monotone ``f`` returns the correct end.
    """
    if hi < lo:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    if hi - lo <= tol:
        return lo, f(lo)
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    x_mid, f_mid = (x1, f1) if f1 <= f2 else (x2, f2)
    candidates = [(lo, f(lo)), (x_mid, f_mid), (hi, f(hi))]
    return min(candidates, key=lambda t: (t[1], t[0]))


def argmin_first(values: Sequence[float]) -> int:
    """Index of the minimum; ties resolve to the first (smallest action)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.all(np.isnan(arr)):
        raise ValueError("no finite values")
    return int(np.nanargmin(arr))


def grid_then_golden(f: Callable[[float], float], lo: float, hi: float,
                     points: int = 401, tol: float = 1e-10) -> tuple[float, float]:
    """Coarse grid scan followed by golden-section search on the best bracket."""
    if points < 2 or hi <= lo:
        return lo, f(lo)
    xs = np.linspace(lo, hi, points)
    vals = np.array([f(x) for x in xs])
    k = argmin_first(vals)
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, points - 1)]
    x_ref, f_ref = golden_section(f, float(a), float(b), tol=tol)
    if f_ref < vals[k]:
        return x_ref, f_ref
    return float(xs[k]), float(vals[k])
