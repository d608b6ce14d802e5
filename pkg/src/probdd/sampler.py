"""Bottom-up weighted sampling and the incremental multi-round driver.

A batch of k samples is drawn in a single bottom-up pass over the
diagram. While walking the nodes in topological order the pass computes
each node's joint probability (the annotation) and, in the same visit,
the k partial samples of that node: the true terminal contributes empty
partials, a conjunction node bitwise-ORs its children's partials (their
assigned variables are disjoint by decomposability), and a decision node
flips k independent coins with the conditional probability of its hi
branch and extends the chosen child's partials with the decided literal.
Smoothness guarantees the root's partials are complete assignments.

Randomness is counter-based: every decision node owns a Philox stream
keyed by (seed, its position in the traversal order), and sample index i
always consumes draw i of that stream. Batches are therefore
reproducible and independent of evaluation order, and a batch may be
split across worker threads without changing its result. A node shared
by several parents is sampled once per batch index and all parents reuse
those partials; any fixed convention is distributionally correct here,
and this one makes results reproducible.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cnf import Assignment, CnfFormula, WeightFunction
from .compiler import VariableOrdering, choose_ordering, compile_cnf, DEFAULT_MAX_VARS
from .errors import StructureError, ZeroProbabilityError
from .prob import (
    FALSE_ID,
    NEG_INF,
    Prob,
    decision_edge_fractions,
    decision_edge_logs,
    node_log_prob,
    node_rational_prob,
    parameterize,
    smooth,
)

MASK64 = (1 << 64) - 1


@dataclass
class SampleBatch:
    """k complete assignments packed as bitmasks, bit v-1 = variable v.

    masks has shape (k, words) with words = ceil(num_vars / 64).
    """

    masks: np.ndarray
    num_vars: int
    seed: int
    round: int = 1
    root_log_prob: float = 0.0

    def __len__(self) -> int:
        return int(self.masks.shape[0])

    @property
    def words(self) -> int:
        return int(self.masks.shape[1])

    def int_masks(self) -> np.ndarray | list[int]:
        """Masks as plain integers; a numpy array when one word suffices."""
        if self.words == 1:
            return self.masks[:, 0]
        return [sum(int(w) << (64 * i) for i, w in enumerate(row)) for row in self.masks]

    def assignments(self) -> list[Assignment]:
        if self.words == 1:
            return [Assignment.from_mask(int(m), self.num_vars) for m in self.masks[:, 0]]
        return [Assignment.from_mask(m, self.num_vars) for m in self.int_masks()]

    def frequencies(self) -> np.ndarray:
        """Empirical probability of each positive literal; index v-1 = variable v."""
        k = len(self)
        out = np.empty(self.num_vars, dtype=np.float64)
        for var in range(1, self.num_vars + 1):
            word, bit = divmod(var - 1, 64)
            out[var - 1] = np.count_nonzero(self.masks[:, word] & np.uint64(1 << bit)) / k
        return out

    def model_lines(self) -> str:
        """One DIMACS-style model line per sample: signed literals then 0."""
        lines = []
        for row in self.masks:
            lits = []
            for var in range(1, self.num_vars + 1):
                word, bit = divmod(var - 1, 64)
                lits.append(str(var) if (int(row[word]) >> bit) & 1 else str(-var))
            lits.append("0")
            lines.append(" ".join(lits))
        return "\n".join(lines) + "\n"


UpdateRule = Callable[[SampleBatch, WeightFunction], WeightFunction]


def _node_uniforms(seed: int, stream: int, start: int, stop: int) -> np.ndarray:
    """Doubles [start, stop) of the node's dedicated counter-based stream.

    The generator emits four 64-bit words per counter step and one double
    consumes one word, so advancing the counter by start // 4 and
    trimming the remainder lands exactly on draw `start`.
    """
    key = np.array([seed & MASK64, stream], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    skip, offset = divmod(start, 4)
    if skip:
        bitgen.advance(skip)
    uniforms = np.random.Generator(bitgen).random(stop - 4 * skip)
    return uniforms[offset:] if offset else uniforms


def _pass(prob: Prob, order: list[int], start: int, stop: int, seed: int, mode: str):
    """One fused annotation-and-sampling sweep for sample indices [start, stop).

    Returns (phi, root_masks); phi maps node id to its log (or rational)
    joint probability with zero-probability nodes absent, and root_masks
    is None when the root itself has probability zero.
    """
    nodes = prob.nodes
    words = max(1, (prob.num_vars + 63) // 64)
    count = stop - start
    rational = mode == "rational"
    phi: dict[int, object] = {}
    store: dict[int, np.ndarray] = {}

    remaining: dict[int, int] = {}
    for nid in order:
        for child in prob.children_of(nid):
            remaining[child] = remaining.get(child, 0) + 1

    for stream, nid in enumerate(order):
        node = nodes[nid]
        value = node_rational_prob(node, phi) if rational else node_log_prob(node, phi)
        if value is not None:
            phi[nid] = value
            if node.kind == "T":
                store[nid] = np.zeros((count, words), dtype=np.uint64)
            elif node.kind == "A":
                vals = store[node.children[0]] | store[node.children[1]]
                for child in node.children[2:]:
                    vals |= store[child]
                store[nid] = vals
            else:
                if rational:
                    p_lo, p_hi = decision_edge_fractions(node, phi)
                    hi_only = p_lo == 0
                    lo_only = p_hi == 0
                    p_cond = float(p_hi / (p_lo + p_hi)) if not (hi_only or lo_only) else 0.0
                else:
                    p_lo, p_hi = decision_edge_logs(node, phi)
                    hi_only = p_lo == NEG_INF
                    lo_only = p_hi == NEG_INF
                    p_cond = math.exp(p_hi - value) if not (hi_only or lo_only) else 0.0
                word, bit = divmod(node.var - 1, 64)
                bitval = np.uint64(1 << bit)
                if hi_only:
                    vals = store[node.hi].copy()
                    vals[:, word] |= bitval
                elif lo_only:
                    vals = store[node.lo].copy()
                else:
                    take = _node_uniforms(seed, stream, start, stop) < p_cond
                    vals = np.where(take[:, None], store[node.hi], store[node.lo])
                    setbits = np.zeros(count, dtype=np.uint64)
                    setbits[take] = bitval
                    vals[:, word] |= setbits
                store[nid] = vals
        for child in prob.children_of(nid):
            remaining[child] -= 1
            if remaining[child] == 0 and child != prob.root:
                store.pop(child, None)
    return phi, store.get(prob.root)


def _chunk_ranges(k: int, parts: int) -> list[tuple[int, int]]:
    size, extra = divmod(k, parts)
    ranges = []
    lo = 0
    for i in range(parts):
        hi = lo + size + (1 if i < extra else 0)
        if hi > lo:
            ranges.append((lo, hi))
        lo = hi
    return ranges


def sample(prob: Prob, k: int, seed: int, *, mode: str = "log", threads: int = 1) -> SampleBatch:
    """Draw k satisfying assignments with replacement, weighted per the parameters.

    Each sample is distributed with probability W(assignment) / N where N
    is the weighted model count. mode 'rational' computes annotations in
    exact rational arithmetic instead of log space; the drawn bits use
    the same per-node streams either way. threads > 1 splits the batch
    across worker threads without changing the result.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if mode not in ("log", "rational"):
        raise ValueError(f"unknown mode {mode!r}")
    if not prob.smooth:
        raise StructureError("sampling requires a smoothed diagram", property_name="smoothness")
    if not prob.parameterized:
        raise StructureError("sampling requires a parameterized diagram", property_name="parameters")
    if prob.root == FALSE_ID:
        raise ZeroProbabilityError("the diagram is unsatisfiable")

    order = prob.topo_order()
    if threads <= 1:
        phi, root_masks = _pass(prob, order, 0, k, seed, mode)
    else:
        ranges = _chunk_ranges(k, threads)
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            results = list(pool.map(lambda r: _pass(prob, order, r[0], r[1], seed, mode), ranges))
        phi = results[0][0]
        parts = [masks for _, masks in results]
        root_masks = None if parts[0] is None else np.concatenate(parts, axis=0)

    if root_masks is None:
        raise ZeroProbabilityError("no satisfying assignment has positive probability under these weights")
    root_value = phi[prob.root]
    root_log_prob = math.log(float(root_value)) if mode == "rational" else float(root_value)
    return SampleBatch(masks=root_masks, num_vars=prob.num_vars, seed=seed, root_log_prob=root_log_prob)


def update_weights(prob: Prob, new_weights: WeightFunction) -> None:
    """Apply new weights to an already compiled diagram, in place.

    Only the branch parameters change; the structure and therefore the
    compilation cost are reused across rounds.
    """
    if not prob.smooth:
        raise StructureError("update_weights expects a smoothed diagram", property_name="smoothness")
    parameterize(prob, new_weights)


def default_update_rule(batch: SampleBatch, previous: WeightFunction) -> WeightFunction:
    """Diversity-driven default: push weight toward the rarely sampled polarity.

    For each variable with empirical positive-literal frequency f, the
    new weights are W(x) = max(1 - f, eps) and W(-x) = max(f, eps) with
    eps = 1 / (2k), so no variable ever reaches a zero-sum weight pair.
    """
    if len(batch) == 0:
        raise ValueError("empty sample batch")
    freqs = batch.frequencies()
    eps = 1.0 / (2 * len(batch))
    weights: dict[int, float] = {}
    for var in range(1, batch.num_vars + 1):
        f = float(freqs[var - 1])
        weights[var] = max(1.0 - f, eps)
        weights[-var] = max(f, eps)
    return WeightFunction(weights)


@dataclass
class RoundReport:
    """Timing and output of one sampling round.

    wall_time covers re-parameterization plus the sampling pass (which
    includes annotation); compile_s and smooth_s are nonzero only in the
    round that built the diagram.
    """

    round: int
    wall_time: float
    samples: SampleBatch
    weights: WeightFunction
    root_log_prob: float
    compile_s: float = 0.0
    smooth_s: float = 0.0
    param_s: float = 0.0
    sample_s: float = 0.0

    @property
    def total_s(self) -> float:
        return self.compile_s + self.smooth_s + self.param_s + self.sample_s


def round_seed(seed: int, round_index: int) -> int:
    """Deterministic per-round sampling seed derived from the base seed."""
    ss = np.random.SeedSequence(entropy=(seed & MASK64, round_index))
    return int(ss.generate_state(1, np.uint64)[0])


def run_incremental(
    formula: CnfFormula,
    initial_weights: WeightFunction,
    rounds: int,
    k: int,
    rule: UpdateRule = default_update_rule,
    seed: int = 1,
    ordering: VariableOrdering | None = None,
    mode: str = "log",
    threads: int = 1,
    max_vars: int = DEFAULT_MAX_VARS,
) -> list[RoundReport]:
    """Compile once, then sample over multiple rounds with evolving weights.

    Round 1 compiles, smooths, parameterizes with the initial weights
    and samples. Every later round derives new weights from the previous
    round's samples via `rule`, re-parameterizes the persisted diagram
    and samples again, so compilation cost is paid exactly once.
    """
    if rounds < 1 or k < 1:
        raise ValueError("rounds and k must be at least 1")
    if ordering is None:
        ordering = choose_ordering(formula)

    t0 = time.perf_counter()
    prob = compile_cnf(formula, ordering, max_vars=max_vars)
    compile_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    smooth(prob)
    smooth_s = time.perf_counter() - t0

    reports: list[RoundReport] = []
    weights = initial_weights
    for rnd in range(1, rounds + 1):
        if rnd > 1:
            weights = rule(reports[-1].samples, reports[-1].weights)
        t0 = time.perf_counter()
        update_weights(prob, weights)
        param_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        batch = sample(prob, k, round_seed(seed, rnd), mode=mode, threads=threads)
        sample_s = time.perf_counter() - t0
        batch.round = rnd
        reports.append(
            RoundReport(
                round=rnd,
                wall_time=param_s + sample_s,
                samples=batch,
                weights=weights,
                root_log_prob=batch.root_log_prob,
                compile_s=compile_s if rnd == 1 else 0.0,
                smooth_s=smooth_s if rnd == 1 else 0.0,
                param_s=param_s,
                sample_s=sample_s,
            )
        )
    return reports


def round_reports_csv(reports: list[RoundReport]) -> str:
    """CSV with one row per round: timings in seconds plus the root log probability."""
    lines = ["round,compile_s,smooth_s,param_s,sample_s,total_s,root_log_prob"]
    for rep in reports:
        lines.append(
            f"{rep.round},{rep.compile_s:.6f},{rep.smooth_s:.6f},{rep.param_s:.6f},"
            f"{rep.sample_s:.6f},{rep.total_s:.6f},{rep.root_log_prob:.12g}"
        )
    return "\n".join(lines) + "\n"
