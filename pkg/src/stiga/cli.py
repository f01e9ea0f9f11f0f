"""Command-line entry point: ``solve``, ``study`` and ``estimate``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .assembly import StabilizationParams
from .cases import get_case
from .linsolve import SolverError
from .spaces import DiscreteField
from .study import (
    ERROR_FLOOR,
    ConfigError,
    LevelSolution,
    check_compatible,
    emit_csv,
    estimate_level,
    level_space,
    make_geometry,
    parse_config,
    run_study,
    solve_level,
)


def write_coefficients(coef, path=None) -> None:
    text = "".join(f"{c:.17g}\n" for c in coef)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_coefficients(path) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                vals.append(float(s))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not a number: {s!r}") from None
    return np.array(vals)


def _finest(cfg):
    case = get_case(cfg.case)
    g = make_geometry(cfg, case)
    check_compatible(case, g)
    return case, g, cfg.levels[-1]


def cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    case, g, level = _finest(cfg)
    sol = solve_level(cfg, g, case, level, args.threads)
    write_coefficients(sol.v.coefficients, args.out)
    print(f"level {level}: {sol.space.n_free} free DOFs, h = {sol.space.mesh.h:.6g}", file=sys.stderr)
    return 0


def cmd_study(args) -> int:
    cfg = parse_config(args.config)
    table = run_study(cfg, args.threads)
    emit_csv(table, args.out or cfg.output)
    for note in table.notes:
        print(note, file=sys.stderr)
    return 1 if table.notes else 0


def cmd_estimate(args) -> int:
    cfg = parse_config(args.config)
    case, g, level = _finest(cfg)
    V = level_space(cfg, g, level)
    coef = read_coefficients(args.coefficients)
    if coef.size != V.n_free:
        raise ConfigError(f"{args.coefficients}: expected {V.n_free} coefficients for level {level}, found {coef.size}")
    stab = StabilizationParams.for_space(V, cfg.theta)
    sol = LevelSolution(level, V, stab, DiscreteField(V, coef), 0.0)
    rep, err = estimate_level(cfg, sol, case)
    lines = [
        f"level = {level}",
        f"majorant_kind = {rep.kind}",
        f"majorant = {rep.value:.12g}",
        f"bounded_norm_squared = {rep.lhs:.12g}",
        f"error_sh = {err:.12g}",
        f"i_eff = {rep.i_eff:.12g}" if rep.i_eff is not None and err >= ERROR_FLOOR else "i_eff = NA",
    ]
    lines += [f"term.{k} = {v:.12g}" for k, v in rep.terms.as_dict().items()]
    lines += [f"param.{k} = {v:.12g}" for k, v in rep.params.items()]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stiga", description="Space-time spline solver for the heat equation with guaranteed error majorants.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="study configuration file (key = value lines)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--threads", type=int, default=1, help="assembly worker threads")

    common(sub.add_parser("solve", help="solve on the finest configured level and write the free-DOF coefficients"))
    common(sub.add_parser("study", help="run the refinement study and write the CSV table"))
    p = sub.add_parser("estimate", help="evaluate the majorant for given coefficients on the finest level")
    common(p)
    p.add_argument("--coefficients", required=True, help="file with one coefficient per line, free DOFs in lexicographic order (time index fastest)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    handler = {"solve": cmd_solve, "study": cmd_study, "estimate": cmd_estimate}[args.command]
    try:
        return handler(args)
    except (ConfigError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
