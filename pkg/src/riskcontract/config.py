"""Scenario configuration: one JSON document, strictly validated.

Sections: ``model``, ``insurer``, ``user``, ``costs``, ``grids``,
``tolerances``, ``output`` and optionally ``sweep``. Unknown keys are
rejected with the line they appear on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .casestudy import MODES, CaseStudyConfig
from .contract import ProblemSpec, Tolerances
from .distributions import (
    BinomialRansomware, ParameterizedLossModel, load_tabulated_csv, tabulated_model,
)
from .risk import AVaR, RiskMeasureSpec, measure_from_dict

SECTIONS = {"model", "insurer", "user", "costs", "grids", "tolerances", "output", "sweep"}
REQUIRED = {"model", "insurer", "user", "costs"}
MODEL_KEYS = {
    "binomial": {"family", "n", "damping", "action_low", "action_high"},
    "tabulated": {"family", "csv", "grid", "support", "pmf", "action_low", "action_high"},
}
GRID_KEYS = {"solver_points", "oracle_c_points", "oracle_x_points", "check_points",
             "axiom_trials", "avar_levels", "sweep_x"}
OUTPUT_KEYS = {"dir", "prefix"}
SWEEP_KEYS = {"mode", "fixed_x"}


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.line = line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    problem: ProblemSpec
    raw: dict
    source: str
    oracle_c_points: int = 201
    oracle_x_points: int = 1001
    check_points: int = 21
    axiom_trials: int = 1000
    avar_levels: tuple = tuple(np.linspace(0.0, 0.95, 41).round(12))
    sweep_x: tuple = tuple(np.linspace(0.0, 1.0, 41).round(12))
    sweep_mode: str = "at-baseline"
    fixed_x: float = 0.5
    out_dir: str = "."
    prefix: str = "riskcontract"

    def case_study(self, which: str) -> CaseStudyConfig:
        model = self.problem.model
        if not isinstance(model.family, BinomialRansomware):
            raise ConfigError("sweeps need the binomial ransomware family", self.source,
                              _locate(self.raw["_text"], ["model", "family"]))
        if (model.action_low, model.action_high) != (0.0, 1.0):
            raise ConfigError("sweeps use the action set [0, 1]", self.source,
                              _locate(self.raw["_text"], ["model"]))
        user = self.problem.user
        if not isinstance(user, AVaR):
            raise ConfigError("sweeps need an AV@R user measure", self.source,
                              _locate(self.raw["_text"], ["user"]))
        levels = self.avar_levels if which == "coverage" else (user.level,)
        return CaseStudyConfig(
            n=model.family.n, kappa=model.family.damping, m=self.problem.m,
            user_avar_levels=levels, insurer_spec=self.problem.insurer, x_grid=self.sweep_x,
            mode=self.sweep_mode, fixed_x=self.fixed_x,
            baseline_points=self.problem.grid_points, tolerances=self.problem.tolerances)


def _locate(text: str, path: list) -> int | None:
    """Line of the last key in ``path``, searching each key after the previous one."""
    pos = 0
    for key in path:
        i = text.find(f'"{key}"', pos)
        if i < 0:
            return None
        pos = i + 1
    return text.count("\n", 0, pos) + 1


def _check_keys(d, allowed, path, text, source):
    if not isinstance(d, dict):
        raise ConfigError(f"section '{'.'.join(path)}' must be an object", source, _locate(text, path))
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}' in '{'.'.join(path) or 'top level'}'", source,
                              _locate(text, path + [k]))


def _axis(spec, name, text, source):
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "num"}, ["grids", name], text, source)
        try:
            vals = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except KeyError as exc:
            raise ConfigError(f"grids.{name} missing {exc}", source, _locate(text, ["grids", name]))
        return tuple(vals.round(12))
    if isinstance(spec, list):
        return tuple(float(v) for v in spec)
    raise ConfigError(f"grids.{name} must be a list or {{start, stop, num}}", source,
                      _locate(text, ["grids", name]))


def _measure(d, name, text, source) -> RiskMeasureSpec:
    try:
        return measure_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}", source, _locate(text, [name])) from None


def _model(d, text, source, base: Path) -> ParameterizedLossModel:
    if not isinstance(d, dict):
        raise ConfigError("model must be an object", source, _locate(text, ["model"]))
    fam = d.get("family")
    if fam not in MODEL_KEYS:
        raise ConfigError(f"model.family must be one of {sorted(MODEL_KEYS)}", source,
                          _locate(text, ["model", "family"]))
    _check_keys(d, MODEL_KEYS[fam], ["model"], text, source)
    try:
        if fam == "binomial":
            return ParameterizedLossModel(
                BinomialRansomware(int(d.get("n", 10)), float(d.get("damping", 0.8))),
                float(d.get("action_low", 0.0)), float(d.get("action_high", 1.0)))
        lo, hi = d.get("action_low"), d.get("action_high")
        if "csv" in d:
            return load_tabulated_csv(base / d["csv"], lo, hi)
        return tabulated_model(d["grid"], d["support"], d["pmf"], lo, hi)
    except KeyError as exc:
        raise ConfigError(f"model missing key {exc}", source, _locate(text, ["model"])) from None
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"model: {exc}", source, _locate(text, ["model"])) from None


def parse_config(text: str, source: str = "<config>", base: Path | None = None) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", source, exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", source, 1)
    _check_keys(raw, SECTIONS, [], text, source)
    missing = REQUIRED - set(raw)
    if missing:
        raise ConfigError(f"missing section(s) {sorted(missing)}", source, 1)
    base = base or Path(".")

    model = _model(raw["model"], text, source, base)
    insurer = _measure(raw["insurer"], "insurer", text, source)
    user = _measure(raw["user"], "user", text, source)

    costs = raw["costs"]
    _check_keys(costs, {"m"}, ["costs"], text, source)
    m = costs.get("m")
    if not isinstance(m, (int, float)) or isinstance(m, bool) or not m > 0:
        raise ConfigError(f"costs.m must be a positive number, got {m!r}", source,
                          _locate(text, ["costs", "m"]))

    tol_raw = raw.get("tolerances", {})
    tol_names = {f.name for f in fields(Tolerances)}
    _check_keys(tol_raw, tol_names, ["tolerances"], text, source)
    for k, v in tol_raw.items():
        if v is not None and (not isinstance(v, (int, float)) or not v > 0):
            raise ConfigError(f"tolerances.{k} must be positive", source,
                              _locate(text, ["tolerances", k]))
    tolerances = Tolerances(**tol_raw)

    grids = raw.get("grids", {})
    _check_keys(grids, GRID_KEYS, ["grids"], text, source)
    ints = {}
    for key, default, least in (("solver_points", 401, 3), ("oracle_c_points", 201, 1),
                                ("oracle_x_points", 1001, 1), ("check_points", 21, 3),
                                ("axiom_trials", 1000, 1)):
        v = grids.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < least:
            raise ConfigError(f"grids.{key} must be an integer >= {least}", source,
                              _locate(text, ["grids", key]))
        ints[key] = v

    try:
        problem = ProblemSpec(insurer, user, model, float(m), ints["solver_points"], tolerances)
    except ValueError as exc:
        raise ConfigError(str(exc), source, _locate(text, ["costs"])) from None

    sc = Scenario(problem=problem, raw={**raw, "_text": text}, source=source,
                  oracle_c_points=ints["oracle_c_points"], oracle_x_points=ints["oracle_x_points"],
                  check_points=ints["check_points"], axiom_trials=ints["axiom_trials"])
    if "avar_levels" in grids:
        sc.avar_levels = _axis(grids["avar_levels"], "avar_levels", text, source)
        bad = [a for a in sc.avar_levels if not 0.0 <= a < 1.0]
        if bad:
            raise ConfigError(f"AV@R levels must lie in [0, 1): {bad}", source,
                              _locate(text, ["grids", "avar_levels"]))
    if "sweep_x" in grids:
        sc.sweep_x = _axis(grids["sweep_x"], "sweep_x", text, source)
        if not sc.sweep_x or any(not model.contains(x) for x in sc.sweep_x):
            raise ConfigError("grids.sweep_x must be nonempty and inside the action set", source,
                              _locate(text, ["grids", "sweep_x"]))

    sweep = raw.get("sweep", {})
    _check_keys(sweep, SWEEP_KEYS, ["sweep"], text, source)
    sc.sweep_mode = sweep.get("mode", "at-baseline")
    if sc.sweep_mode not in MODES:
        raise ConfigError(f"sweep.mode must be one of {MODES}", source, _locate(text, ["sweep", "mode"]))
    sc.fixed_x = float(sweep.get("fixed_x", 0.5))
    if not model.contains(sc.fixed_x):
        raise ConfigError("sweep.fixed_x outside the action set", source,
                          _locate(text, ["sweep", "fixed_x"]))

    out = raw.get("output", {})
    _check_keys(out, OUTPUT_KEYS, ["output"], text, source)
    sc.out_dir = str(out.get("dir", "."))
    sc.prefix = str(out.get("prefix", "riskcontract"))
    return sc


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path), path.parent)
