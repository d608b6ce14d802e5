"""Top-down CNF compilation into a diagram, plus its text format.

Compilation is Shannon expansion on the lowest-ranked variable of each
residual clause set. Residuals that split into variable-disjoint
connected components become conjunction nodes, residuals are memoized,
and a unique table shares structurally identical nodes. This is simple
and deterministic; it is meant for desk scale, not to compete with
industrial compilers, which is why a variable-count guard applies.
"""

from __future__ import annotations

import math
from collections import Counter

from .cnf import Clause, CnfFormula
from .errors import GuardError, ParseError, StructureError
from .prob import FALSE_ID, TRUE_ID, Prob, find_violations, validate_structure

DEFAULT_MAX_VARS = 30
FORMAT_HEADER = "prob 1.0"


class VariableOrdering:
    """A permutation of variables 1..n with O(1) rank lookup."""

    __slots__ = ("order", "rank")

    def __init__(self, order):
        order = tuple(int(v) for v in order)
        if sorted(order) != list(range(1, len(order) + 1)):
            raise ValueError("ordering must be a permutation of 1..n")
        self.order = order
        self.rank = {var: pos for pos, var in enumerate(order)}

    @property
    def num_vars(self) -> int:
        return len(self.order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VariableOrdering):
            return NotImplemented
        return self.order == other.order

    def __repr__(self) -> str:
        return f"VariableOrdering({self.order!r})"


def choose_ordering(formula: CnfFormula, heuristic: str = "occurrence-desc") -> VariableOrdering:
    """Deterministic variable ordering.

    'natural' is the identity; 'occurrence-desc' sorts by descending
    literal occurrence count with ascending index as the tie-break.
    """
    if heuristic == "natural":
        return VariableOrdering(range(1, formula.num_vars + 1))
    if heuristic in ("occurrence-desc", "occ"):
        counts: Counter[int] = Counter()
        for clause in formula.clauses:
            for lit in clause:
                counts[abs(lit)] += 1
        ordered = sorted(formula.variables(), key=lambda v: (-counts[v], v))
        return VariableOrdering(ordered)
    raise ValueError(f"unknown ordering heuristic {heuristic!r}")


def compile_cnf(formula: CnfFormula, ordering: VariableOrdering | None = None,
                max_vars: int = DEFAULT_MAX_VARS) -> Prob:
    """Compile a formula into an unparameterized, not necessarily smooth diagram.

    The result is deterministic and decomposable and represents exactly
    the model set of the formula. Variables appearing in no clause do
    not appear in the diagram; smoothing reintroduces them.
    """
    if formula.num_vars > max_vars:
        raise GuardError(
            f"{formula.num_vars} variables exceed the compilation guard ({max_vars}); raise max_vars to override"
        )
    if ordering is None:
        ordering = choose_ordering(formula)
    if ordering.num_vars != formula.num_vars:
        raise ValueError("ordering must cover exactly the formula's variables")
    rank = ordering.rank

    prob = Prob(formula.num_vars)
    decision_index: dict[tuple[int, int, int], int] = {}
    conj_index: dict[tuple[int, ...], int] = {}
    node_vars: dict[int, frozenset[int]] = {FALSE_ID: frozenset(), TRUE_ID: frozenset()}
    memo: dict[frozenset[Clause], int] = {}

    def make_decision(var: int, lo: int, hi: int) -> int:
        if lo == hi:
            return lo
        key = (var, lo, hi)
        nid = decision_index.get(key)
        if nid is None:
            nid = prob.add_decision(var, lo, hi)
            decision_index[key] = nid
            node_vars[nid] = node_vars[lo] | node_vars[hi] | {var}
        return nid

    def make_conj(children: list[int]) -> int:
        kids: list[int] = []
        for child in children:
            if child == FALSE_ID:
                return FALSE_ID
            if child == TRUE_ID:
                continue
            if prob.nodes[child].kind == "A":
                kids.extend(prob.nodes[child].children)
            else:
                kids.append(child)
        if not kids:
            return TRUE_ID
        if len(kids) == 1:
            return kids[0]
        kids.sort(key=lambda c: min(rank[v] for v in node_vars[c]))
        key = tuple(kids)
        nid = conj_index.get(key)
        if nid is None:
            nid = prob.add_conj(key)
            conj_index[key] = nid
            node_vars[nid] = frozenset().union(*(node_vars[c] for c in key))
        return nid

    def components(clauses: frozenset[Clause]) -> list[frozenset[Clause]]:
        parent: dict[int, int] = {}

        def find(v: int) -> int:
            root = v
            while parent[root] != root:
                root = parent[root]
            while parent[v] != root:
                parent[v], v = root, parent[v]
            return root

        for clause in clauses:
            first = abs(clause[0])
            parent.setdefault(first, first)
            for lit in clause[1:]:
                var = abs(lit)
                parent.setdefault(var, var)
                parent[find(var)] = find(first)
        groups: dict[int, list[Clause]] = {}
        for clause in clauses:
            groups.setdefault(find(abs(clause[0])), []).append(clause)
        parts = [frozenset(group) for group in groups.values()]
        parts.sort(key=lambda part: min(rank[abs(l)] for cl in part for l in cl))
        return parts

    def restrict(clauses: frozenset[Clause], var: int, value: bool) -> frozenset[Clause]:
        satisfied = var if value else -var
        out: list[Clause] = []
        for clause in clauses:
            if satisfied in clause:
                continue
            if -satisfied in clause:
                clause = tuple(l for l in clause if l != -satisfied)
            out.append(clause)
        return frozenset(out)

    def build(clauses: frozenset[Clause]) -> int:
        if not clauses:
            return TRUE_ID
        if () in clauses:
            return FALSE_ID
        hit = memo.get(clauses)
        if hit is not None:
            return hit
        parts = components(clauses)
        if len(parts) > 1:
            nid = make_conj([build(part) for part in parts])
        else:
            var = min((abs(l) for cl in clauses for l in cl), key=rank.__getitem__)
            nid = make_decision(var, build(restrict(clauses, var, False)), build(restrict(clauses, var, True)))
        memo[clauses] = nid
        return nid

    prob.root = build(frozenset(formula.clauses))
    return prob


def export_prob(prob: Prob) -> str:
    """Serialize to the line-oriented text format.

    Node ids are renumbered densely in bottom-up topological order with
    the terminals pinned at 0 and 1, so structurally identical diagrams
    export byte-identically.
    """
    validate_structure(prob)
    remap = {FALSE_ID: 0, TRUE_ID: 1}
    body: list[str] = []
    next_id = 2
    for nid in prob.topo_order():
        node = prob.nodes[nid]
        if node.kind in ("T", "F"):
            continue
        remap[nid] = next_id
        if node.kind == "D":
            line = f"{next_id} D {node.var} {remap[node.lo]} {remap[node.hi]}"
            if prob.parameterized:
                line += f" {node.theta_lo!r} {node.theta_hi!r}"
        else:
            line = f"{next_id} A {len(node.children)} " + " ".join(str(remap[c]) for c in node.children)
        body.append(line)
        next_id += 1
    lines = [
        FORMAT_HEADER,
        f"nvars {prob.num_vars}",
        f"nnodes {next_id}",
        "0 F",
        "1 T",
        *body,
        f"root {remap[prob.root]}",
    ]
    return "\n".join(lines) + "\n"


def import_prob(text: str) -> Prob:
    """Parse the text format back into a diagram.

    Node lines must appear in bottom-up topological order (children
    before parents), which rules out cycles and dangling references.
    Determinism and decomposability are validated; the smoothness flag
    records whether the diagram is smooth with full variable coverage.
    Branch parameters must be present on either all or none of the
    decision lines.
    """
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines or not lines[0].startswith("prob "):
        raise ParseError("missing 'prob <version>' header")
    if lines[0] != FORMAT_HEADER:
        raise ParseError(f"unsupported format version {lines[0]!r}")

    def expect_int_field(index: int, name: str) -> int:
        if index >= len(lines):
            raise ParseError(f"missing '{name}' line")
        parts = lines[index].split()
        if len(parts) != 2 or parts[0] != name:
            raise ParseError(f"expected '{name} <int>', got {lines[index]!r}")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise ParseError(f"expected '{name} <int>', got {lines[index]!r}") from exc

    num_vars = expect_int_field(1, "nvars")
    num_nodes = expect_int_field(2, "nnodes")
    if num_vars < 0 or num_nodes < 2:
        raise ParseError("nvars must be non-negative and nnodes at least 2")
    if len(lines) != 3 + num_nodes + 1:
        raise ParseError(f"expected {num_nodes} node lines plus a root line")

    prob = Prob(num_vars)
    saw_theta: bool | None = None
    for nid in range(num_nodes):
        parts = lines[3 + nid].split()
        if not parts or parts[0] != str(nid):
            raise ParseError(f"node line {nid} must start with id {nid}, got {lines[3 + nid]!r}")
        kind = parts[1] if len(parts) > 1 else ""
        if nid == 0 or nid == 1:
            expected = "F" if nid == 0 else "T"
            if parts[1:] != [expected]:
                raise ParseError(f"node {nid} must be '{nid} {expected}'")
            continue
        if kind == "D":
            if len(parts) not in (5, 7):
                raise ParseError(f"node {nid}: decision lines are '<id> D <var> <lo> <hi> [<theta_lo> <theta_hi>]'")
            try:
                var, lo, hi = int(parts[2]), int(parts[3]), int(parts[4])
            except ValueError as exc:
                raise ParseError(f"node {nid}: bad integer field") from exc
            if not 1 <= var <= num_vars:
                raise ParseError(f"node {nid}: variable {var} out of range")
            for child in (lo, hi):
                if not 0 <= child < nid:
                    raise ParseError(f"node {nid}: reference to {child} is dangling or not bottom-up")
            made = prob.add_decision(var, lo, hi)
            has_theta = len(parts) == 7
            if saw_theta is None:
                saw_theta = has_theta
            elif saw_theta != has_theta:
                raise ParseError("branch parameters must appear on all decision lines or none")
            if has_theta:
                node = prob.nodes[made]
                try:
                    node.theta_lo, node.theta_hi = float(parts[5]), float(parts[6])
                except ValueError as exc:
                    raise ParseError(f"node {nid}: bad parameter field") from exc
                if not (math.isfinite(node.theta_lo) and math.isfinite(node.theta_hi)):
                    raise ParseError(f"node {nid}: parameters must be finite")
                if node.theta_lo < 0 or node.theta_hi < 0:
                    raise ParseError(f"node {nid}: parameters must be non-negative")
                node.log_theta_lo = math.log(node.theta_lo) if node.theta_lo > 0 else float("-inf")
                node.log_theta_hi = math.log(node.theta_hi) if node.theta_hi > 0 else float("-inf")
        elif kind == "A":
            if len(parts) < 3:
                raise ParseError(f"node {nid}: conjunction lines are '<id> A <k> <children...>'")
            try:
                arity = int(parts[2])
                children = [int(p) for p in parts[3:]]
            except ValueError as exc:
                raise ParseError(f"node {nid}: bad integer field") from exc
            if arity != len(children):
                raise ParseError(f"node {nid}: arity {arity} does not match {len(children)} children")
            if arity < 2:
                raise ParseError(f"node {nid}: conjunction needs at least two children")
            for child in children:
                if not 0 <= child < nid:
                    raise ParseError(f"node {nid}: reference to {child} is dangling or not bottom-up")
            prob.add_conj(children)
        else:
            raise ParseError(f"node {nid}: unknown node kind {kind!r}")

    root_parts = lines[3 + num_nodes].split()
    if len(root_parts) != 2 or root_parts[0] != "root":
        raise ParseError(f"expected 'root <id>', got {lines[3 + num_nodes]!r}")
    try:
        root = int(root_parts[1])
    except ValueError as exc:
        raise ParseError("expected 'root <id>'") from exc
    if not 0 <= root < num_nodes:
        raise ParseError(f"root id {root} does not exist")
    prob.root = root
    prob.parameterized = saw_theta if saw_theta is not None else True

    validate_structure(prob)
    violations = find_violations(prob)
    for violation in violations:
        if violation.property_name in ("determinism", "decomposability"):
            raise StructureError(
                f"{violation.property_name} violated at node {violation.node_id}: {violation.detail}",
                property_name=violation.property_name,
                node_id=violation.node_id,
            )
    prob.smooth = not any(v.property_name == "smoothness" for v in violations)
    return prob
