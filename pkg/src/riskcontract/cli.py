"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 no feasible contract,
3 a diagnostic check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .casestudy import run_coverage_vs_avar_level, run_premium_vs_investment, sweep_sidecar, write_sweep
from .config import ConfigError, Scenario, load_config
from .contract import NoContractError, check_theorem_conditions, solve_baseline, solve_contract
from .distributions import check_density_convexity, check_fosd
from .risk import check_axioms, check_dominance_consistency, describe

EXIT_OK, EXIT_CONFIG, EXIT_NO_CONTRACT, EXIT_DIAGNOSTIC = 0, 1, 2, 3

log = logging.getLogger("riskcontract")


def _out_dir(sc: Scenario, override: str | None) -> Path:
    out = Path(override if override is not None else sc.out_dir)
    if not sc.out_dir or not out.is_dir():
        raise ConfigError(f"output directory '{out}' does not exist", sc.source)
    return out


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")
    log.info("wrote %s", path)


def _echo(sc: Scenario, seed: int) -> dict:
    raw = {k: v for k, v in sc.raw.items() if k != "_text"}
    return {"config": raw, "seed": seed,
            "tolerances": {k: getattr(sc.problem.tolerances, k)
                           for k in vars(sc.problem.tolerances)}}


def cmd_solve(sc: Scenario, out: Path, seed: int) -> int:
    spec = sc.problem
    baseline = solve_baseline(spec)
    log.info("baseline x0=%.6g U_bar=%.6g", baseline.x0, baseline.U_bar)
    path = out / f"{sc.prefix}_solve.json"
    try:
        report = solve_contract(spec, baseline)
    except NoContractError as exc:
        reasons = [[x, r] for x, r in sorted(exc.reasons.items())]
        _dump(path, {"error": "no-contract", "x0": baseline.x0, "U_bar": baseline.U_bar,
                     "reasons": reasons, **_echo(sc, seed)})
        print(f"error: {exc}", file=sys.stderr)
        for x, r in reasons[:20]:
            print(f"  x={x:.6g}: {r}", file=sys.stderr)
        if len(reasons) > 20:
            print(f"  ... {len(reasons) - 20} more in {path}", file=sys.stderr)
        return EXIT_NO_CONTRACT
    payload = {**report.to_dict(), **_echo(sc, seed),
               "insurer_measure": describe(spec.insurer), "user_measure": describe(spec.user)}
    _dump(path, payload)
    for w in report.warnings:
        log.warning("%s", w)
    print(f"x0={baseline.x0:.6g} U_bar={baseline.U_bar:.6g} x*={report.x_star:.6g} "
          f"c*={report.contract.coverage:.6g} q*={report.contract.premium:.6g} "
          f"security_enhanced={report.security_enhanced}")
    return EXIT_OK


def cmd_sweep(sc: Scenario, out: Path, seed: int, kind: str) -> int:
    cfg = sc.case_study(kind)
    if kind == "coverage":
        table, col = run_coverage_vs_avar_level(cfg), "c"
    else:
        table, col = run_premium_vs_investment(cfg), "q"
    side = sweep_sidecar(cfg, table, col, seed)
    base = out / f"{sc.prefix}_{kind}"
    write_sweep(table, side, base.with_suffix(".csv"), base.with_suffix(".json"))
    seg = side["segments"]
    print(f"{kind} sweep: {len(table.rows)} rows, {side['feasible_rows']} feasible"
          + (f", {len(seg['segments'])} monotone segment(s)" if seg else ""))
    return EXIT_OK


def cmd_check(sc: Scenario, out: Path, seed: int) -> int:
    spec = sc.problem
    model = spec.model
    xs = model.grid(sc.check_points)
    report: dict = {"axioms": {}, "dominance_consistency": {}, **_echo(sc, seed)}
    ok = True
    for role, measure in (("insurer", spec.insurer), ("user", spec.user)):
        ax = check_axioms(measure, trials=sc.axiom_trials, tol=spec.tolerances.check, seed=seed)
        report["axioms"][role] = ax.to_dict()
        ok &= ax.all_passed
        dc = check_dominance_consistency(measure, model, xs, spec.tolerances.check)
        report["dominance_consistency"][role] = dc.to_dict()
        ok &= dc.passed
    fosd = [check_fosd(model, float(a), float(b)) for a, b in zip(xs, xs[1:])]
    report["fosd"] = {"passed": all(r.passed for r in fosd),
                      "pairs": [r.to_dict() for r in fosd]}
    ok &= report["fosd"]["passed"]
    warnings = []
    h = min(1e-3, model.width / 10)
    if h > 0:
        conv = check_density_convexity(model, xs, h)
        report["density_convexity"] = conv.to_dict()
        if not conv.passed:
            warnings.append("pmf not convex in the action: "
                            "the security-enhancement guarantee does not apply")
    cond = check_theorem_conditions(spec, xs)
    report["theorem_conditions"] = {"c1_holds": cond.c1_holds, "c2_holds": cond.c2_holds,
                                    "min_D": cond.min_gap,
                                    "min_sensitivity_gap": cond.min_sensitivity_gap}
    report["warnings"] = warnings
    report["passed"] = bool(ok)
    _dump(out / f"{sc.prefix}_check.json", report)
    for w in warnings:
        log.warning("%s", w)
    print("checks passed" if ok else "checks FAILED")
    return EXIT_OK if ok else EXIT_DIAGNOSTIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--verbose", "-v", action="store_true")

    p = argparse.ArgumentParser(prog="riskcontract", description=__doc__.splitlines()[0],
                                parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve the contract design problem")
    s.add_argument("config")
    s = sub.add_parser("sweep", parents=[common], help="case-study coverage/premium sweep")
    s.add_argument("--kind", choices=("coverage", "premium"), required=True)
    s.add_argument("config")
    s = sub.add_parser("check", parents=[common], help="risk-measure and loss-model diagnostics")
    s.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sc = load_config(args.config)
        out = _out_dir(sc, args.out)
        if args.command == "solve":
            return cmd_solve(sc, out, args.seed)
        if args.command == "sweep":
            return cmd_sweep(sc, out, args.seed, args.kind)
        return cmd_check(sc, out, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
