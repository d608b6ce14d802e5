"""Shared test utilities: deterministic formula generators and naive checks."""

import random

from probdd import CnfFormula, WeightFunction, model_masks
from probdd.cnf import normalize_clause

# Worked example used throughout: (x or y) and (not x or not z) with x=1 y=2 z=3.
# Its models, as bitmasks with bit v-1 = variable v:
#   x -y -z = 1, -x y -z = 2, x y -z = 3, -x y z = 6.
EXAMPLE_DIMACS = "p cnf 3 2\n1 2 0\n-1 -3 0\n"
EXAMPLE_MODELS = {1, 2, 3, 6}
EXAMPLE_WEIGHTS = "".join(f"w {v} 0.75\nw {-v} 0.25\n" for v in (1, 2, 3))


def random_mixed_cnf(rng: random.Random, num_vars: int, num_clauses: int, width: int = 3) -> CnfFormula:
    """Random clauses of size 1..width, tautologies rejected."""
    clauses = []
    while len(clauses) < num_clauses:
        size = rng.randint(1, width)
        lits = {rng.choice([-1, 1]) * rng.randint(1, num_vars) for _ in range(size)}
        clause = normalize_clause(lits)
        if clause:
            clauses.append(clause)
    return CnfFormula(num_vars, tuple(clauses))


def random_k_cnf(rng: random.Random, num_vars: int, num_clauses: int, width: int = 3) -> CnfFormula:
    """Random clauses over `width` distinct variables each."""
    clauses = []
    while len(clauses) < num_clauses:
        variables = rng.sample(range(1, num_vars + 1), min(width, num_vars))
        lits = [v if rng.random() < 0.5 else -v for v in variables]
        clauses.append(tuple(sorted(lits, key=abs)))
    return CnfFormula(num_vars, tuple(clauses))


def random_weights(rng: random.Random, num_vars: int, low: float = 0.1, high: float = 10.0) -> WeightFunction:
    return WeightFunction(
        {lit: rng.uniform(low, high) for v in range(1, num_vars + 1) for lit in (v, -v)}
    )


def constrained_instances(seed: int, count: int, max_vars: int, max_models: int):
    """Satisfiable random formulas with a support small enough for tight TV bounds."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(4, max_vars)
        formula = random_mixed_cnf(rng, n, rng.randint(2 * n, 3 * n))
        if 1 <= len(model_masks(formula)) <= max_models:
            out.append(formula)
    return out


def naive_satisfies(clauses, values) -> bool:
    """Clause-by-clause check, independent of the package's evaluate."""
    for clause in clauses:
        hit = False
        for lit in clause:
            if values[abs(lit)] == (lit > 0):
                hit = True
                break
        if not hit:
            return False
    return True


def histogram_benchmark_formula() -> CnfFormula:
    """Fixed 15-variable benchmark with 792 models, used for histogram checks."""
    rng = random.Random(6)
    clauses = []
    while len(clauses) < 26:
        size = rng.randint(2, 3)
        lits = {rng.choice([-1, 1]) * rng.randint(1, 15) for _ in range(size)}
        clause = normalize_clause(lits)
        if clause:
            clauses.append(clause)
    return CnfFormula(15, tuple(clauses))


def compile_heavy_formula() -> CnfFormula:
    """Fixed satisfiable 28-variable 3-CNF whose compilation dominates sampling."""
    return random_k_cnf(random.Random(1), 28, 100)
