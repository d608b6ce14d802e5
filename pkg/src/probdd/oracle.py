"""Brute-force ground truth for models, weighted distributions, and sample checks.

Everything here enumerates the full assignment space directly from the
clause list, on purpose sharing nothing with the compilation pipeline,
so it can serve as an independent referee for the sampler and counter.
Enumeration is vectorized over assignment bitmasks and guarded at 24
variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .cnf import Assignment, CnfFormula, WeightFunction
from .errors import GuardError, SoundnessError, ZeroProbabilityError
from .sampler import SampleBatch

MAX_ORACLE_VARS = 24


def model_masks(formula: CnfFormula) -> np.ndarray:
    """Sorted bitmasks of all satisfying assignments; bit v-1 = variable v."""
    n = formula.num_vars
    if n > MAX_ORACLE_VARS:
        raise GuardError(f"{n} variables exceed the oracle guard ({MAX_ORACLE_VARS})")
    masks = np.arange(1 << n, dtype=np.uint64)
    keep = np.ones(1 << n, dtype=bool)
    one = np.uint64(1)
    for clause in formula.clauses:
        satisfied = np.zeros(1 << n, dtype=bool)
        for lit in clause:
            bit = (masks >> np.uint64(abs(lit) - 1)) & one
            satisfied |= bit == (one if lit > 0 else 0)
        keep &= satisfied
    return masks[keep]


def enumerate_models(formula: CnfFormula) -> list[Assignment]:
    """All satisfying assignments in canonical (ascending bitmask) order."""
    return [Assignment.from_mask(int(m), formula.num_vars) for m in model_masks(formula)]


def _model_weights_float(models: np.ndarray, num_vars: int, weights: WeightFunction) -> np.ndarray:
    w = np.ones(len(models), dtype=np.float64)
    one = np.uint64(1)
    for var in range(1, num_vars + 1):
        bit = (models >> np.uint64(var - 1)) & one
        w *= np.where(bit == one, weights[var], weights[-var])
    return w


def _model_weight_rational(mask: int, num_vars: int, weights: WeightFunction) -> Fraction:
    w = Fraction(1)
    for var in range(1, num_vars + 1):
        lit = var if (mask >> (var - 1)) & 1 else -var
        w *= Fraction(weights[lit])
    return w


@dataclass
class ExactDistribution:
    """Exact weighted distribution over the satisfying assignments.

    Only models with positive probability are kept in the support;
    masks are sorted ascending and probs aligned with them.
    """

    masks: np.ndarray
    probs: np.ndarray
    normalization: float | Fraction
    num_vars: int

    def __len__(self) -> int:
        return len(self.masks)

    def support(self) -> list[tuple[Assignment, float]]:
        return [
            (Assignment.from_mask(int(m), self.num_vars), float(p))
            for m, p in zip(self.masks, self.probs)
        ]

    def prob_of(self, mask: int) -> float:
        pos = int(np.searchsorted(self.masks, np.uint64(mask)))
        if pos < len(self.masks) and int(self.masks[pos]) == mask:
            return float(self.probs[pos])
        return 0.0


def exact_distribution(formula: CnfFormula, weights: WeightFunction, rational: bool = False) -> ExactDistribution:
    """Pr[model] = product of its literal weights, normalized by their sum N."""
    models = model_masks(formula)
    if rational:
        fracs = [_model_weight_rational(int(m), formula.num_vars, weights) for m in models]
        normalization = sum(fracs, Fraction(0))
        if normalization == 0:
            raise ZeroProbabilityError("every satisfying assignment has weight zero")
        probs = np.array([float(f / normalization) for f in fracs], dtype=np.float64)
        positive = np.array([f > 0 for f in fracs], dtype=bool)
        return ExactDistribution(models[positive], probs[positive], normalization, formula.num_vars)
    w = _model_weights_float(models, formula.num_vars, weights)
    normalization = float(w.sum())
    if normalization == 0:
        raise ZeroProbabilityError("every satisfying assignment has weight zero")
    positive = w > 0
    return ExactDistribution(models[positive], w[positive] / normalization, normalization, formula.num_vars)


def satisfies_masks(formula: CnfFormula, masks: np.ndarray) -> np.ndarray:
    """Vectorized clause check of packed assignments, shape (k, words) or (k,)."""
    if masks.ndim == 1:
        masks = masks[:, None]
    k = masks.shape[0]
    ok = np.ones(k, dtype=bool)
    one = np.uint64(1)
    for clause in formula.clauses:
        satisfied = np.zeros(k, dtype=bool)
        for lit in clause:
            word, bit = divmod(abs(lit) - 1, 64)
            value = (masks[:, word] >> np.uint64(bit)) & one
            satisfied |= value == (one if lit > 0 else 0)
        ok &= satisfied
    return ok


def _pooled_chi_square(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Pearson chi-square after pooling low-expectation cells into one bin."""
    small = expected < min_expected
    obs = list(observed[~small])
    exp = list(expected[~small])
    if small.any():
        obs.append(observed[small].sum())
        exp.append(expected[small].sum())
    obs_arr = np.asarray(obs, dtype=np.float64)
    exp_arr = np.asarray(exp, dtype=np.float64)
    usable = exp_arr > 0
    obs_arr, exp_arr = obs_arr[usable], exp_arr[usable]
    if len(exp_arr) < 2:
        return 0.0, 0, 1.0
    stat = float(((obs_arr - exp_arr) ** 2 / exp_arr).sum())
    dof = len(exp_arr) - 1
    return stat, dof, float(stats.chi2.sf(stat, dof))


@dataclass
class ComparisonReport:
    """Statistical comparison of a sample batch against the exact distribution."""

    tv_distance: float
    chi_square: float
    chi_square_dof: int
    chi_square_p: float
    counts: np.ndarray                      # sampled count per support model
    histogram: list[tuple[int, int]]        # (occurrences, number of unique solutions)

    def histogram_csv(self) -> str:
        lines = ["occurrences,num_unique_solutions"]
        lines.extend(f"{occ},{num}" for occ, num in self.histogram)
        return "\n".join(lines) + "\n"

    def stats_csv(self) -> str:
        return (
            "tv_distance,chi_square,chi_square_dof,chi_square_p\n"
            f"{self.tv_distance:.9f},{self.chi_square:.6f},{self.chi_square_dof},{self.chi_square_p:.9g}\n"
        )


def occurrence_histogram(counts: np.ndarray) -> list[tuple[int, int]]:
    """How many support models were sampled exactly x times, for each seen x."""
    values, freqs = np.unique(counts, return_counts=True)
    return [(int(v), int(f)) for v, f in zip(values, freqs)]


def compare(batch: SampleBatch, exact: ExactDistribution) -> ComparisonReport:
    """Total-variation distance, pooled chi-square, and the occurrence histogram.

    A sampled assignment outside the support is a soundness failure and
    raises instead of being scored.
    """
    if len(batch) == 0:
        raise ValueError("empty sample batch")
    if len(exact) == 0:
        raise ValueError("empty support")
    if batch.words != 1:
        raise GuardError("comparison supports at most 64 variables")
    sample_masks = np.asarray(batch.int_masks(), dtype=np.uint64)
    uniq, cnt = np.unique(sample_masks, return_counts=True)
    pos = np.searchsorted(exact.masks, uniq)
    inside = pos < len(exact.masks)
    inside[inside] &= exact.masks[pos[inside]] == uniq[inside]
    if not inside.all():
        offender = int(uniq[~inside][0])
        raise SoundnessError(f"sampled assignment {offender:#x} is outside the satisfying set")
    counts = np.zeros(len(exact), dtype=np.int64)
    counts[pos] = cnt
    k = len(batch)
    empirical = counts / k
    tv = 0.5 * float(np.abs(empirical - exact.probs).sum())
    stat, dof, p_value = _pooled_chi_square(counts.astype(np.float64), exact.probs * k)
    return ComparisonReport(
        tv_distance=tv,
        chi_square=stat,
        chi_square_dof=dof,
        chi_square_p=p_value,
        counts=counts,
        histogram=occurrence_histogram(counts),
    )


def expected_occurrence_histogram(exact: ExactDistribution, k: int, max_occurrence: int) -> np.ndarray:
    """Expected number of unique solutions sampled x times, x = 0..max_occurrence.

    Each model's occurrence count is Binomial(k, p); entry x sums the
    probability mass every model puts on occurrence x.
    """
    occ = np.arange(max_occurrence + 1)
    return stats.binom.pmf(occ[:, None], k, exact.probs[None, :]).sum(axis=1)


def occurrence_chi_square(exact: ExactDistribution, counts: np.ndarray, k: int, min_expected: float = 5.0):
    """Chi-square of the observed occurrence histogram against its prediction.

    The open tail beyond the largest observed occurrence is folded into a
    final cell so expected masses sum to the support size.
    """
    max_occ = int(counts.max())
    expected = expected_occurrence_histogram(exact, k, max_occ)
    observed = np.zeros(max_occ + 2, dtype=np.float64)
    values, freqs = np.unique(counts, return_counts=True)
    observed[values] = freqs
    tail = len(exact) - expected.sum()
    expected = np.append(expected, max(tail, 0.0))
    return _pooled_chi_square(observed, expected, min_expected)
