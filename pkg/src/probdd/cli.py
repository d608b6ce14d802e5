"""Command line interface wiring parsing, compilation, sampling and checks.

Exit codes: 0 success, 1 usage error, 2 input error, 3 property or
verification failure, 4 resource guard exceeded.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .cnf import CnfFormula, WeightFunction, parse_dimacs, parse_weights
from .compiler import DEFAULT_MAX_VARS, choose_ordering, compile_cnf, export_prob, import_prob
from .errors import (
    GuardError,
    ParseError,
    SoundnessError,
    StructureError,
    WeightError,
    ZeroProbabilityError,
)
from .oracle import MAX_ORACLE_VARS, compare, exact_distribution, occurrence_histogram
from .prob import FALSE_ID, Prob, annotate, find_violations, parameterize, smooth
from .sampler import run_incremental, round_reports_csv, sample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_PROPERTY = 3
EXIT_GUARD = 4

SEED_ENV_VAR = "PROB_SAMPLER_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage errors; this tool uses 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ParseError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return 1


def _load_formula(args) -> CnfFormula:
    return parse_dimacs(_read(args.cnf))


def _load_weights(args, formula: CnfFormula) -> WeightFunction:
    if args.weights is None:
        print("warning: no weights given, sampling uniformly", file=sys.stderr)
        return WeightFunction.uniform()
    return parse_weights(_read(args.weights), formula)


def _prepare_diagram(args) -> tuple[Prob, WeightFunction | None]:
    """Build a smooth, parameterized diagram from --cnf or --prob."""
    if (args.cnf is None) == (args.prob is None):
        raise ParseError("exactly one of --cnf or --prob is required")
    if args.cnf is not None:
        formula = _load_formula(args)
        ordering = choose_ordering(formula, args.ordering)
        prob = compile_cnf(formula, ordering, max_vars=args.max_vars)
        weights = _load_weights(args, formula)
    else:
        prob = import_prob(_read(args.prob))
        weights = None
        if args.weights is not None:
            scope = CnfFormula(prob.num_vars, ())  # for literal range checks only
            weights = parse_weights(_read(args.weights), scope)
    smooth(prob)
    if weights is None and not prob.parameterized:
        # covers imported skeletons and imports whose parameters were
        # invalidated because smoothing added nodes
        print("warning: no weights given, sampling uniformly", file=sys.stderr)
        weights = WeightFunction.uniform()
    if weights is not None:
        parameterize(prob, weights)
    return prob, weights


def cmd_compile(args) -> int:
    formula = _load_formula(args)
    ordering = choose_ordering(formula, args.ordering)
    prob = compile_cnf(formula, ordering, max_vars=args.max_vars)
    if args.smooth:
        smooth(prob)
    if prob.root == FALSE_ID:
        print("warning: the formula is unsatisfiable", file=sys.stderr)
    _write(args.out, export_prob(prob))
    kinds = prob.count_kinds()
    print(
        f"nodes={prob.node_count} decision={kinds['D']} conj={kinds['A']} terminals={kinds['T'] + kinds['F']}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_smooth(args) -> int:
    prob = import_prob(_read(args.prob))
    smooth(prob)
    _write(args.out, export_prob(prob))
    return EXIT_OK


def cmd_sample(args) -> int:
    prob, _ = _prepare_diagram(args)
    batch = sample(prob, args.k, _resolve_seed(args), mode=args.mode, threads=args.threads)
    _write(args.out, batch.model_lines())
    return EXIT_OK


def cmd_inc(args) -> int:
    formula = _load_formula(args)
    weights = _load_weights(args, formula)
    ordering = choose_ordering(formula, args.ordering)
    reports = run_incremental(
        formula,
        weights,
        rounds=args.rounds,
        k=args.k,
        seed=_resolve_seed(args),
        ordering=ordering,
        mode=args.mode,
        threads=args.threads,
        max_vars=args.max_vars,
    )
    sys.stdout.write(round_reports_csv(reports))
    model_text = "".join(f"c round {rep.round}\n" + rep.samples.model_lines() for rep in reports)
    if args.out is not None:
        _write(args.out, model_text)
    else:
        sys.stdout.write(model_text)
    return EXIT_OK


def cmd_check(args) -> int:
    prob = import_prob(_read(args.prob))
    violations = find_violations(prob)
    failed = False
    for name in ("determinism", "decomposability", "smoothness"):
        offenders = [v for v in violations if v.property_name == name]
        if offenders:
            failed = True
            first = offenders[0]
            print(f"{name} violated at node {first.node_id}: {first.detail}")
        else:
            print(f"{name}: ok")
    if prob.parameterized:
        phi = annotate(prob)
        root_mass = math.exp(phi[prob.root]) if prob.root in phi else 0.0
        if root_mass > 1.0 + 1e-9:
            failed = True
            print(f"annotation violated at node {prob.root}: root mass {root_mass} exceeds 1")
        else:
            print(f"annotation: ok (root mass {root_mass:.6g})")
    else:
        print("annotation: skipped (no branch parameters)")
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_dist(args) -> int:
    formula = _load_formula(args)
    weights = _load_weights(args, formula)
    ordering = choose_ordering(formula, args.ordering)
    prob = compile_cnf(formula, ordering, max_vars=args.max_vars)
    smooth(prob)
    parameterize(prob, weights)
    batch = sample(prob, args.k, _resolve_seed(args), mode=args.mode, threads=args.threads)
    if formula.num_vars <= MAX_ORACLE_VARS:
        exact = exact_distribution(formula, weights)
        report = compare(batch, exact)
        _write(args.out, report.histogram_csv())
        print(f"samples={len(batch)} support={len(exact)}")
        print(f"tv_distance={report.tv_distance:.6f}")
        print(f"chi_square={report.chi_square:.4f} dof={report.chi_square_dof} p_value={report.chi_square_p:.6g}")
    else:
        masks = np.asarray(batch.int_masks(), dtype=np.uint64)
        _, counts = np.unique(masks, return_counts=True)
        histogram = occurrence_histogram(counts)
        lines = ["occurrences,num_unique_solutions"]
        lines.extend(f"{occ},{num}" for occ, num in histogram)
        _write(args.out, "\n".join(lines) + "\n")
        print(f"samples={len(batch)} (oracle comparison skipped beyond {MAX_ORACLE_VARS} variables)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probdd", description="Weighted sampling of CNF solutions via decision diagrams")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, cnf=False, prob=False, sampling=False):
        if cnf:
            p.add_argument("--cnf", help="DIMACS CNF input file")
        if prob:
            p.add_argument("--prob", help="diagram text input file")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--ordering", choices=["natural", "occ"], default="occ", help="variable ordering heuristic")
        p.add_argument("--max-vars", type=int, default=DEFAULT_MAX_VARS, dest="max_vars",
                       help="compilation guard on the variable count")
        if sampling:
            p.add_argument("--weights", help="literal weight file (default: uniform)")
            p.add_argument("-k", type=int, default=100, help="samples per round")
            p.add_argument("--seed", type=int, default=None,
                           help=f"RNG seed (falls back to ${SEED_ENV_VAR}, then 1)")
            p.add_argument("--mode", choices=["log", "rational"], default="log",
                           help="annotation arithmetic")
            p.add_argument("--threads", type=int, default=1, help="worker threads for the sample pass")

    p_compile = sub.add_parser("compile", help="compile a CNF into a diagram file")
    add_common(p_compile, cnf=True)
    p_compile.add_argument("--smooth", action="store_true", help="smooth before writing")
    p_compile.set_defaults(func=cmd_compile)

    p_smooth = sub.add_parser("smooth", help="smooth an existing diagram file")
    p_smooth.add_argument("--prob", required=True, help="diagram text input file")
    p_smooth.add_argument("--out", help="output file (default: stdout)")
    p_smooth.set_defaults(func=cmd_smooth)

    p_sample = sub.add_parser("sample", help="draw k weighted samples")
    add_common(p_sample, cnf=True, prob=True, sampling=True)
    p_sample.set_defaults(func=cmd_sample)

    p_inc = sub.add_parser("inc", help="incremental multi-round sampling")
    add_common(p_inc, cnf=True, sampling=True)
    p_inc.add_argument("--rounds", type=int, default=10, help="number of sampling rounds")
    p_inc.set_defaults(func=cmd_inc)

    p_check = sub.add_parser("check", help="verify structural properties of a diagram file")
    p_check.add_argument("--prob", required=True, help="diagram text input file")
    p_check.set_defaults(func=cmd_check)

    p_dist = sub.add_parser("dist", help="compare sampled and exact distributions")
    add_common(p_dist, cnf=True, sampling=True)
    p_dist.set_defaults(func=cmd_dist)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cnf_path = getattr(args, "cnf", None)
    prob_path = getattr(args, "prob", None)
    if args.command in ("compile", "inc", "dist") and cnf_path is None:
        parser.error("--cnf is required")
    if args.command == "sample" and (cnf_path is None) == (prob_path is None):
        parser.error("exactly one of --cnf or --prob is required")
    try:
        return args.func(args)
    except (ParseError, WeightError, ZeroProbabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StructureError, SoundnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
