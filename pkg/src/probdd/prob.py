"""Decision diagrams with conjunction nodes and probability annotations.

The diagram is a DAG stored as an arena of nodes. Ids 0 and 1 are the
shared false and true terminals. Decision nodes branch on one variable
(lo-child = variable false, hi-child = variable true) and carry a pair
of branch probabilities once parameterized; conjunction nodes combine
sub-diagrams over disjoint variable sets.

Joint probabilities are annotated bottom-up in log space: the value of a
conjunction node is the sum of its children's values, and the value of a
decision node is the log-sum-exp of its two weighted branches. Edges
into the false terminal contribute probability zero and are skipped, so
zero-probability nodes are simply absent from the annotation cache. An
exact-rational twin of the annotation exists for oracle-grade counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .cnf import WeightFunction
from .errors import GuardError, StructureError, WeightError

FALSE_ID = 0
TRUE_ID = 1
NEG_INF = float("-inf")
THETA_SUM_TOL = 1e-12


@dataclass(slots=True)
class Node:
    """One arena slot. kind is 'F', 'T', 'D' (decision) or 'A' (conjunction)."""

    kind: str
    var: int = 0
    lo: int = 0
    hi: int = 0
    children: tuple[int, ...] = ()
    theta_lo: float | None = None
    theta_hi: float | None = None
    log_theta_lo: float = NEG_INF
    log_theta_hi: float = NEG_INF


class Prob:
    """Arena-backed diagram with a designated root node."""

    def __init__(self, num_vars: int):
        if num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        self.nodes: list[Node] = [Node("F"), Node("T")]
        self.root: int = FALSE_ID
        self.num_vars = num_vars
        self.smooth = False
        self.parameterized = False

    def __len__(self) -> int:
        return len(self.nodes)

    def add_decision(self, var: int, lo: int, hi: int) -> int:
        if not 1 <= var <= self.num_vars:
            raise ValueError(f"decision variable {var} out of range")
        for child in (lo, hi):
            if not 0 <= child < len(self.nodes):
                raise ValueError(f"child id {child} does not exist")
        self.nodes.append(Node("D", var=var, lo=lo, hi=hi))
        return len(self.nodes) - 1

    def add_conj(self, children: Iterable[int]) -> int:
        kids = tuple(children)
        if len(kids) < 2:
            raise ValueError("conjunction nodes need at least two children")
        for child in kids:
            if not 0 <= child < len(self.nodes):
                raise ValueError(f"child id {child} does not exist")
        self.nodes.append(Node("A", children=kids))
        return len(self.nodes) - 1

    def children_of(self, nid: int) -> tuple[int, ...]:
        node = self.nodes[nid]
        if node.kind == "D":
            return (node.lo, node.hi)
        if node.kind == "A":
            return node.children
        return ()

    def topo_order(self) -> list[int]:
        """Reachable nodes, children before parents, deterministic."""
        order: list[int] = []
        seen: set[int] = set()
        stack: list[tuple[int, bool]] = [(self.root, False)]
        while stack:
            nid, expanded = stack.pop()
            if expanded:
                order.append(nid)
                continue
            if nid in seen:
                continue
            seen.add(nid)
            stack.append((nid, True))
            for child in reversed(self.children_of(nid)):
                if child not in seen:
                    stack.append((child, False))
        return order

    @property
    def node_count(self) -> int:
        return len(self.topo_order())

    def count_kinds(self) -> dict[str, int]:
        counts = {"F": 0, "T": 0, "D": 0, "A": 0}
        for nid in self.topo_order():
            counts[self.nodes[nid].kind] += 1
        return counts


def var_sets(prob: Prob) -> dict[int, frozenset[int]]:
    """Per-node variable sets, computed bottom-up over reachable nodes."""
    kappa: dict[int, frozenset[int]] = {}
    for nid in prob.topo_order():
        node = prob.nodes[nid]
        if node.kind in ("T", "F"):
            kappa[nid] = frozenset()
        elif node.kind == "A":
            kappa[nid] = frozenset().union(*(kappa[c] for c in node.children))
        else:
            kappa[nid] = kappa[node.lo] | kappa[node.hi] | {node.var}
    return kappa


@dataclass(frozen=True)
class Violation:
    property_name: str
    node_id: int
    detail: str


def find_violations(prob: Prob) -> list[Violation]:
    """All determinism, decomposability and smoothness violations.

    Determinism requires a decision variable not to be re-decided below
    either branch; decomposability requires conjunction children to
    mention pairwise disjoint variables; smoothness requires equal
    variable sets on the two branches of every decision node, plus full
    variable coverage at the root so sampled assignments are complete.
    """
    kappa = var_sets(prob)
    violations: list[Violation] = []
    for nid in prob.topo_order():
        node = prob.nodes[nid]
        if node.kind == "D":
            below = kappa[node.lo] | kappa[node.hi]
            if node.var in below:
                violations.append(Violation("determinism", nid, f"variable {node.var} decided again below node {nid}"))
            if kappa[node.lo] != kappa[node.hi]:
                diff = kappa[node.lo] ^ kappa[node.hi]
                violations.append(Violation("smoothness", nid, f"branches of node {nid} differ on variables {sorted(diff)}"))
        elif node.kind == "A":
            covered: set[int] = set()
            for child in node.children:
                overlap = covered & kappa[child]
                if overlap:
                    violations.append(
                        Violation("decomposability", nid, f"children of node {nid} share variables {sorted(overlap)}")
                    )
                    break
                covered |= kappa[child]
    if prob.root != FALSE_ID:
        missing = frozenset(range(1, prob.num_vars + 1)) - kappa.get(prob.root, frozenset())
        if missing:
            violations.append(
                Violation("smoothness", prob.root, f"diagram never mentions variables {sorted(missing)}")
            )
    return violations


def check_determinism(prob: Prob) -> bool:
    return not any(v.property_name == "determinism" for v in find_violations(prob))


def check_decomposability(prob: Prob) -> bool:
    return not any(v.property_name == "decomposability" for v in find_violations(prob))


def check_smoothness(prob: Prob) -> bool:
    return not any(v.property_name == "smoothness" for v in find_violations(prob))


def validate_structure(prob: Prob) -> None:
    """Raise StructureError on broken arenas: bad ids, cycles, bad parameters."""
    nodes = prob.nodes
    if len(nodes) < 2 or nodes[FALSE_ID].kind != "F" or nodes[TRUE_ID].kind != "T":
        raise StructureError("ids 0 and 1 must be the false and true terminals")
    if not 0 <= prob.root < len(nodes):
        raise StructureError(f"root id {prob.root} does not exist")
    for nid, node in enumerate(nodes):
        if node.kind == "D":
            if not 1 <= node.var <= prob.num_vars:
                raise StructureError(f"node {nid}: variable {node.var} out of range", node_id=nid)
            for child in (node.lo, node.hi):
                if not 0 <= child < len(nodes):
                    raise StructureError(f"node {nid}: dangling child {child}", node_id=nid)
            has_theta = node.theta_lo is not None and node.theta_hi is not None
            if has_theta and abs(node.theta_lo + node.theta_hi - 1.0) > THETA_SUM_TOL:
                raise StructureError(
                    f"node {nid}: branch parameters sum to {node.theta_lo + node.theta_hi!r}, not 1",
                    property_name="parameters",
                    node_id=nid,
                )
            if prob.parameterized and not has_theta:
                raise StructureError(f"node {nid}: missing branch parameters", property_name="parameters", node_id=nid)
        elif node.kind == "A":
            if len(node.children) < 2:
                raise StructureError(f"node {nid}: conjunction with fewer than two children", node_id=nid)
            for child in node.children:
                if not 0 <= child < len(nodes):
                    raise StructureError(f"node {nid}: dangling child {child}", node_id=nid)
        elif node.kind not in ("T", "F"):
            raise StructureError(f"node {nid}: unknown kind {node.kind!r}", node_id=nid)
    # cycle check: iterative DFS coloring from the root
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[int, int]] = [(prob.root, 0)]
    while stack:
        nid, idx = stack.pop()
        children = prob.children_of(nid)
        if idx == 0:
            state[nid] = 1
        if idx == len(children):
            state[nid] = 2
            continue
        stack.append((nid, idx + 1))
        child = children[idx]
        mark = state.get(child)
        if mark == 1:
            raise StructureError(f"cycle through node {child}", node_id=child)
        if mark is None:
            stack.append((child, 0))


def parameterize(prob: Prob, weights: WeightFunction) -> Prob:
    """Set branch probabilities from normalized literal weights, in place.

    For a decision on x: theta_lo = W(-x) / (W(-x) + W(x)) and theta_hi
    its complement. Idempotent; calling again with new weights is the
    incremental update path and never touches the structure.
    """
    for node in prob.nodes:
        if node.kind != "D":
            continue
        w_neg, w_pos = weights.pair(node.var)
        total = w_neg + w_pos
        if not total > 0:
            raise WeightError(f"variable {node.var}: W(x) + W(-x) must be positive")
        node.theta_lo = w_neg / total
        node.theta_hi = w_pos / total
        node.log_theta_lo = math.log(node.theta_lo) if node.theta_lo > 0 else NEG_INF
        node.log_theta_hi = math.log(node.theta_hi) if node.theta_hi > 0 else NEG_INF
    prob.parameterized = True
    return prob


def smooth(prob: Prob) -> Prob:
    """Equalize the variable sets on both branches of every decision node.

    Bottom-up over the diagram: whenever one branch misses variables the
    other covers, the deficient child edge is rewired to a new
    conjunction of the old child and shared don't-care decision nodes
    (both branches pointing at the true terminal, one node per variable).
    Variables absent from the entire diagram are wrapped around the root
    the same way, so samples always cover every variable. The model set
    is unchanged. Already-smooth diagrams are returned as-is.
    """
    if prob.root == FALSE_ID:
        prob.smooth = True
        return prob

    kappa: dict[int, frozenset[int]] = {}
    dont_care: dict[int, int] = {}
    for nid, node in enumerate(prob.nodes):
        if node.kind == "D" and node.lo == TRUE_ID and node.hi == TRUE_ID:
            dont_care.setdefault(node.var, nid)
    wrap_cache: dict[tuple[int, frozenset[int]], int] = {}
    created = False

    def dc_node(var: int) -> int:
        nonlocal created
        nid = dont_care.get(var)
        if nid is None:
            nid = prob.add_decision(var, TRUE_ID, TRUE_ID)
            dont_care[var] = nid
            kappa[nid] = frozenset((var,))
            created = True
        return nid

    def wrap(child: int, missing: frozenset[int]) -> int:
        nonlocal created
        key = (child, missing)
        cached = wrap_cache.get(key)
        if cached is not None:
            return cached
        if child == TRUE_ID:
            base: list[int] = []
        elif prob.nodes[child].kind == "A":
            base = list(prob.nodes[child].children)  # keep conjunctions flat
        else:
            base = [child]
        kids = base + [dc_node(v) for v in sorted(missing)]
        if len(kids) == 1:
            new = kids[0]
        else:
            new = prob.add_conj(kids)
            kappa[new] = kappa.get(child, frozenset()) | missing
            created = True
        wrap_cache[key] = new
        return new

    for nid in prob.topo_order():
        node = prob.nodes[nid]
        if node.kind in ("T", "F"):
            kappa[nid] = frozenset()
        elif node.kind == "A":
            kappa[nid] = frozenset().union(*(kappa[c] for c in node.children))
        else:
            lo_set, hi_set = kappa[node.lo], kappa[node.hi]
            if hi_set - lo_set:
                node.lo = wrap(node.lo, hi_set - lo_set)
            if lo_set - hi_set:
                node.hi = wrap(node.hi, lo_set - hi_set)
            kappa[nid] = kappa[node.lo] | kappa[node.hi] | {node.var}

    missing_root = frozenset(range(1, prob.num_vars + 1)) - kappa[prob.root]
    if missing_root:
        prob.root = wrap(prob.root, missing_root)
    if created:
        prob.parameterized = False
    prob.smooth = True
    return prob


def log_sum_exp(a: float, b: float) -> float:
    """log(exp(a) + exp(b)) without underflow; -inf encodes probability 0."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _edge_log(log_theta: float, child_value: float | None) -> float:
    if child_value is None or log_theta == NEG_INF:
        return NEG_INF
    return log_theta + child_value


def decision_edge_logs(node: Node, phi: dict[int, float]) -> tuple[float, float]:
    """Log probabilities of the two weighted branches of a decision node."""
    return (
        _edge_log(node.log_theta_lo, phi.get(node.lo)),
        _edge_log(node.log_theta_hi, phi.get(node.hi)),
    )


def node_log_prob(node: Node, phi: dict[int, float]) -> float | None:
    """Log joint probability of one node given its children's; None = zero."""
    if node.kind == "T":
        return 0.0
    if node.kind == "F":
        return None
    if node.kind == "A":
        total = 0.0
        for child in node.children:
            value = phi.get(child)
            if value is None:
                return None
            total += value
        return total
    p_lo, p_hi = decision_edge_logs(node, phi)
    if p_lo == NEG_INF and p_hi == NEG_INF:
        return None
    return log_sum_exp(p_lo, p_hi)


def annotate(prob: Prob) -> dict[int, float]:
    """Log joint probability of every reachable node, bottom-up.

    The false terminal and every node whose sub-diagram has probability
    zero are excluded from the cache. exp of the root's value is the
    probability mass of satisfying assignments; with the normalized
    branch parameters it always lies in [0, 1].
    """
    if not prob.parameterized:
        raise StructureError("diagram is not parameterized", property_name="parameters")
    phi: dict[int, float] = {}
    for nid in prob.topo_order():
        value = node_log_prob(prob.nodes[nid], phi)
        if value is not None:
            phi[nid] = value
    return phi


def decision_edge_fractions(node: Node, phi: dict[int, Fraction]) -> tuple[Fraction, Fraction]:
    zero = Fraction(0)
    p_lo = phi.get(node.lo)
    p_hi = phi.get(node.hi)
    lo = Fraction(node.theta_lo) * p_lo if p_lo is not None else zero
    hi = Fraction(node.theta_hi) * p_hi if p_hi is not None else zero
    return lo, hi


def node_rational_prob(node: Node, phi: dict[int, Fraction]) -> Fraction | None:
    if node.kind == "T":
        return Fraction(1)
    if node.kind == "F":
        return None
    if node.kind == "A":
        total = Fraction(1)
        for child in node.children:
            value = phi.get(child)
            if value is None:
                return None
            total *= value
        return total
    p_lo, p_hi = decision_edge_fractions(node, phi)
    total = p_lo + p_hi
    return total if total > 0 else None


def annotate_rational(prob: Prob) -> dict[int, Fraction]:
    """Exact-rational twin of annotate, over the same branch parameters."""
    if not prob.parameterized:
        raise StructureError("diagram is not parameterized", property_name="parameters")
    phi: dict[int, Fraction] = {}
    for nid in prob.topo_order():
        value = node_rational_prob(prob.nodes[nid], phi)
        if value is not None:
            phi[nid] = value
    return phi


def weighted_model_count(prob: Prob, weights: WeightFunction, mode: str = "log"):
    """Sum over satisfying assignments of the product of literal weights.

    Recovered from the root annotation by undoing the per-variable
    normalization: N = P(root) * prod_x (W(x) + W(-x)). With unit
    weights this is the model count. mode 'rational' returns an exact
    Fraction, mode 'log' a float. The diagram is re-parameterized with
    the given weights so annotation and normalization always agree.
    """
    if not prob.smooth:
        raise StructureError("weighted_model_count requires a smoothed diagram", property_name="smoothness")
    parameterize(prob, weights)
    if mode == "rational":
        phi = annotate_rational(prob)
        mass = phi.get(prob.root, Fraction(0))
        scale = Fraction(1)
        for var in range(1, prob.num_vars + 1):
            scale *= Fraction(weights[-var]) + Fraction(weights[var])
        return mass * scale
    if mode != "log":
        raise ValueError(f"unknown mode {mode!r}")
    phi_log = annotate(prob)
    if prob.root not in phi_log:
        return 0.0
    scale = 1.0
    for var in range(1, prob.num_vars + 1):
        scale *= weights[-var] + weights[var]
    return math.exp(phi_log[prob.root]) * scale


def _expand_free(masks: np.ndarray, free_vars: Iterable[int]) -> np.ndarray:
    """Duplicate each mask over both values of every unconstrained variable."""
    for var in sorted(free_vars):
        bit = np.uint64(1 << (var - 1))
        masks = np.concatenate([masks, masks | bit])
    return masks


def diagram_models(prob: Prob, max_vars: int = 24) -> np.ndarray:
    """All complete assignments accepted by the diagram, as sorted bitmasks.

    Bit v-1 of a mask holds the value of variable v. Traversal
    semantics: variables a branch never consults are unconstrained there
    and take both values, so this works on non-smooth diagrams too.
    Intended for verification at small scale, hence the variable guard.
    """
    if prob.num_vars > max_vars:
        raise GuardError(f"{prob.num_vars} variables exceed the enumeration guard ({max_vars})")
    kappa = var_sets(prob)
    sets: dict[int, np.ndarray] = {}
    for nid in prob.topo_order():
        node = prob.nodes[nid]
        if node.kind == "F":
            sets[nid] = np.zeros(0, dtype=np.uint64)
        elif node.kind == "T":
            sets[nid] = np.zeros(1, dtype=np.uint64)
        elif node.kind == "A":
            acc = sets[node.children[0]]
            for child in node.children[1:]:
                rhs = sets[child]
                acc = (acc[:, None] | rhs[None, :]).ravel()
            sets[nid] = acc
        else:
            bit = np.uint64(1 << (node.var - 1))
            scope = kappa[nid] - {node.var}
            lo = _expand_free(sets[node.lo], scope - kappa[node.lo])
            hi = _expand_free(sets[node.hi], scope - kappa[node.hi])
            sets[nid] = np.concatenate([lo, hi | bit])
    models = _expand_free(sets[prob.root], frozenset(range(1, prob.num_vars + 1)) - kappa[prob.root])
    return np.sort(models)
