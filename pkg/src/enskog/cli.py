"""Command-line runner: ``enskog <command> --config FILE --out DIR``.

Exit codes: 0 pass or converged, 1 verification or convergence failure,
2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, EnskogError, HypothesisViolation
from .forces import check_hypotheses
from .lemmas import run_sweeps
from .limit import boltzmann_limit_study
from .picard import SolveConfig, solve
from .weighted import write_field

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_check_force(cfg: ExperimentConfig, out: str, workers: int = 1) -> int:
    report = check_hypotheses(cfg.force, cfg.hypotheses)
    _write_json(os.path.join(out, "hypotheses.json"), report.to_dict())
    print(f"check-force: {'pass' if report.ok else 'FAIL'} (alpha0 ~ {report.alpha0:.6g}, "
          f"tau0 ~ {report.tau0}, samples {report.sample_count})")
    if not report.ok:
        print(f"counterexample: {json.dumps(report.counterexample, sort_keys=True)}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_verify_lemmas(cfg: ExperimentConfig, out: str, workers: int = 1) -> int:
    hyp = None
    if not cfg.force.analytic:
        hyp = check_hypotheses(cfg.force, cfg.hypotheses)
        if not hyp.ok:
            raise HypothesisViolation(f"force field fails the hypotheses: {hyp.counterexample}")
    report = run_sweeps(cfg.sweeps, cfg.force, hyp, cfg.lhs_scale, workers, plus=cfg.plus, minus=cfg.minus)
    report.write_json(os.path.join(out, "verification.json"))
    fails = report.failures()
    print(f"verify-lemmas: {len(report.checks) - len(fails)}/{len(report.checks)} checks pass")
    for c in fails[:10]:
        print(f"  FAIL {c.lemma}: lhs {c.lhs.value:.6g} +- {c.lhs.stderr:.2g} > bound {c.bound:.6g} "
              f"at {json.dumps(c.to_dict()['inputs'], sort_keys=True)}")
    return EXIT_OK if report.passed else EXIT_FAIL


def solve_config(cfg: ExperimentConfig) -> SolveConfig:
    s = cfg.solve
    return SolveConfig(cfg.force, cfg.collision, cfg.plus, cfg.minus, cfg.weights, cfg.initial.function(cfg.weights),
                       cfg.grid_spec(), cfg.rule, s.max_iter, s.tol, s.R, s.norm_floor, s.tilt)


def cmd_solve(cfg: ExperimentConfig, out: str, workers: int = 1) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f, report = solve(solve_config(cfg))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_field(os.path.join(out, "field.bin"), f, cfg.weights)
    report.write_csv(os.path.join(out, "residuals.csv"))
    report.write_json(os.path.join(out, "solve_report.json"))
    state = "converged" if report.converged else "NOT converged"
    print(f"solve: {state} after {report.iterations} iterations, last residual "
          f"{report.residuals[-1]:.3e}, max clamp {report.max_clamp:.3e}")
    if report.notes:
        print("notes: " + "; ".join(report.notes))
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_boltzmann_limit(cfg: ExperimentConfig, out: str, workers: int = 1) -> int:
    b = cfg.boltzmann
    table = boltzmann_limit_study(b.a_values, b.points, b.amplitude, cfg.weights, b.families, cfg.seed,
                                  cfg.collision.mass, b.anisotropy)
    order = sorted((a, i) for i, a in enumerate(table.a_values) if a > 0)
    ok = True
    for fam, row in table.differences.items():
        seq = [row[i] for _, i in order]
        ok &= all(x < y for x, y in zip(seq, seq[1:]))
    if not ok:
        table.notes.append("differences are not monotone in a")
    table.write_json(os.path.join(out, "boltzmann_limit.json"))
    table.write_csv(os.path.join(out, "boltzmann_limit.csv"))
    for fam, row in table.differences.items():
        cells = ", ".join(f"a={a:g}: {d:.4e}" for a, d in zip(table.a_values, row))
        print(f"boltzmann-limit [{fam}]: {cells}; order {table.slopes[fam]:.3f}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "check-force": cmd_check_force,
    "verify-lemmas": cmd_verify_lemmas,
    "solve": cmd_solve,
    "boltzmann-limit": cmd_boltzmann_limit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file (defaults apply when omitted)")
    common.add_argument("--out", default="enskog-out", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    common.add_argument("--workers", type=int, default=1, help="cap on parallel workers for sweeps")
    common.add_argument("--strict-stencil", action="store_true",
                        help="fail instead of reading zeros when a collision stencil leaves the grid")
    parser = argparse.ArgumentParser(prog="enskog", description="Enskog mild-solution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config) if args.config else parse_config({})
        cfg = cfg.with_overrides(args.seed, args.strict_stencil)
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args.out, args.workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnskogError as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
