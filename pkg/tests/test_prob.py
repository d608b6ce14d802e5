import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probdd import (
    CnfFormula,
    Prob,
    WeightFunction,
    annotate,
    annotate_rational,
    check_decomposability,
    check_determinism,
    check_smoothness,
    choose_ordering,
    compile_cnf,
    diagram_models,
    find_violations,
    log_sum_exp,
    model_masks,
    parse_dimacs,
    parameterize,
    smooth,
    var_sets,
    weighted_model_count,
)
from probdd.errors import StructureError, WeightError
from probdd.prob import FALSE_ID, TRUE_ID, Node

from helpers import EXAMPLE_DIMACS, EXAMPLE_MODELS, random_mixed_cnf, random_weights

NEG_INF = float("-inf")


@pytest.fixture
def example_pre_smooth():
    formula = parse_dimacs(EXAMPLE_DIMACS)
    return formula, compile_cnf(formula, choose_ordering(formula, "natural"))


@pytest.fixture
def example_smooth(example_pre_smooth):
    formula, prob = example_pre_smooth
    return formula, smooth(prob)


def weights_75():
    return WeightFunction({lit: (0.75 if lit > 0 else 0.25) for v in (1, 2, 3) for lit in (v, -v)})


class TestVarSets:
    def test_worked_example(self, example_smooth):
        _, prob = example_smooth
        kappa = var_sets(prob)
        root = prob.nodes[prob.root]
        assert kappa[prob.root] == {1, 2, 3}
        lo_conj, hi_conj = prob.nodes[root.lo], prob.nodes[root.hi]
        assert lo_conj.kind == "A" and hi_conj.kind == "A"
        assert {kappa[c] for c in lo_conj.children} == {frozenset({2}), frozenset({3})}
        assert kappa[root.lo] == kappa[root.hi] == {2, 3}

    def test_terminals_are_empty(self, example_smooth):
        _, prob = example_smooth
        kappa = var_sets(prob)
        assert kappa[TRUE_ID] == frozenset()

    def test_pre_smooth_root_covers_all(self, example_pre_smooth):
        _, prob = example_pre_smooth
        assert var_sets(prob)[prob.root] == {1, 2, 3}


class TestParameterize:
    def test_worked_weights(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, weights_75())
        for node in prob.nodes:
            if node.kind == "D":
                assert node.theta_hi == 0.75
                assert node.theta_lo == 0.25

    def test_uniform_weights(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, WeightFunction.uniform())
        root = prob.nodes[prob.root]
        assert root.theta_lo == root.theta_hi == 0.5

    def test_only_ratio_matters(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, WeightFunction({1: 3.0, -1: 1.0}))
        root = prob.nodes[prob.root]
        assert root.theta_hi == 0.75
        assert root.theta_lo == 0.25

    @given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(0.01, 100.0))
    @settings(max_examples=100, deadline=None)
    def test_scale_invariance(self, w_pos, w_neg, scale):
        formula = parse_dimacs("p cnf 1 1\n1 0\n")
        prob = smooth(compile_cnf(formula))
        parameterize(prob, WeightFunction({1: w_pos, -1: w_neg}))
        base = [(n.theta_lo, n.theta_hi) for n in prob.nodes if n.kind == "D"]
        parameterize(prob, WeightFunction({1: w_pos * scale, -1: w_neg * scale}))
        scaled = [(n.theta_lo, n.theta_hi) for n in prob.nodes if n.kind == "D"]
        for (a, b), (c, d) in zip(base, scaled):
            assert math.isclose(a, c, rel_tol=1e-12)
            assert math.isclose(b, d, rel_tol=1e-12)

    def test_zero_sum_rejected(self, example_smooth):
        _, prob = example_smooth
        with pytest.raises(WeightError):
            parameterize(prob, WeightFunction({2: 0.0, -2: 0.0}))

    def test_theta_pair_sums_to_one(self, example_smooth):
        _, prob = example_smooth
        rng = random.Random(3)
        parameterize(prob, random_weights(rng, 3, 1e-3, 1e3))
        for node in prob.nodes:
            if node.kind == "D":
                assert abs(node.theta_lo + node.theta_hi - 1.0) <= 1e-12


class TestSmooth:
    def test_example_structure(self, example_pre_smooth):
        formula, prob = example_pre_smooth
        assert not check_smoothness(prob)
        smooth(prob)
        assert prob.node_count == 9
        assert check_smoothness(prob)
        root = prob.nodes[prob.root]
        assert root.kind == "D" and root.var == 1
        for conj_id, dc_var in ((root.lo, 3), (root.hi, 2)):
            conj = prob.nodes[conj_id]
            assert conj.kind == "A" and len(conj.children) == 2
            dont_cares = [
                c for c in conj.children
                if prob.nodes[c].kind == "D"
                and prob.nodes[c].lo == TRUE_ID
                and prob.nodes[c].hi == TRUE_ID
            ]
            assert [prob.nodes[c].var for c in dont_cares] == [dc_var]

    def test_model_set_unchanged(self, example_pre_smooth):
        formula, prob = example_pre_smooth
        before = set(int(m) for m in diagram_models(prob))
        smooth(prob)
        after = set(int(m) for m in diagram_models(prob))
        assert before == after == EXAMPLE_MODELS

    def test_already_smooth_unchanged(self, example_smooth):
        _, prob = example_smooth
        count = prob.node_count
        again = smooth(prob)
        assert again is prob
        assert prob.node_count == count == 9

    def test_single_variable_dont_care_shape(self):
        formula = CnfFormula(1, ((1,),))
        prob = compile_cnf(formula)
        count = prob.node_count
        smooth(prob)
        assert prob.node_count == count  # both branches already cover {} each

    def test_trivial_dont_care_diagram_unchanged(self):
        prob = Prob(1)
        prob.root = prob.add_decision(1, TRUE_ID, TRUE_ID)
        before = prob.node_count
        smooth(prob)
        assert prob.node_count == before == 2  # root and the true terminal
        assert check_smoothness(prob)

    def test_false_branch_wrapped_for_coverage(self):
        # x forced true, y constrained only on the hi side; the dead lo
        # branch still gets wrapped so both branches cover {y}
        formula = parse_dimacs("p cnf 2 2\n1 0\n-1 2 0\n")
        prob = compile_cnf(formula, choose_ordering(formula, "natural"))
        smooth(prob)
        assert check_smoothness(prob)
        root = prob.nodes[prob.root]
        wrapped = prob.nodes[root.lo]
        assert wrapped.kind == "A"
        assert FALSE_ID in wrapped.children
        assert set(int(m) for m in diagram_models(prob)) == {0b11}
        parameterize(prob, WeightFunction.uniform())
        phi = annotate(prob)
        assert math.isclose(math.exp(phi[prob.root]), 0.25, rel_tol=1e-12)
        assert root.lo not in phi  # conjunction over the false node has mass zero

    def test_free_variable_wrapped_at_root(self):
        formula = parse_dimacs("p cnf 3 1\n1 2 0\n")  # variable 3 unconstrained
        prob = compile_cnf(formula, choose_ordering(formula, "natural"))
        assert 3 not in var_sets(prob)[prob.root]
        smooth(prob)
        assert var_sets(prob)[prob.root] == {1, 2, 3}
        assert check_smoothness(prob)

    def test_zero_clause_formula_covers_all_vars(self):
        formula = CnfFormula(3, ())
        prob = smooth(compile_cnf(formula))
        assert var_sets(prob)[prob.root] == {1, 2, 3}
        assert set(int(m) for m in diagram_models(prob)) == set(range(8))

    def test_unsat_diagram_untouched(self):
        formula = CnfFormula(2, ((),))
        prob = smooth(compile_cnf(formula))
        assert prob.root == FALSE_ID
        assert prob.node_count == 1

    def test_preserves_models_on_random_formulas(self):
        rng = random.Random(11)
        for _ in range(60):
            n = rng.randint(1, 16)
            formula = random_mixed_cnf(rng, n, rng.randint(0, 2 * n + 4))
            prob = compile_cnf(formula)
            before = diagram_models(prob)
            smooth(prob)
            after = diagram_models(prob)
            assert np.array_equal(before, after)
            assert np.array_equal(after, model_masks(formula))
            assert check_smoothness(prob)
            assert check_determinism(prob)
            assert check_decomposability(prob)

    def test_dont_care_growth_bounded(self):
        rng = random.Random(5)
        for _ in range(40):
            n = rng.randint(2, 14)
            formula = random_mixed_cnf(rng, n, rng.randint(1, n))
            prob = compile_cnf(formula)

            def dc_count():
                return sum(
                    1
                    for nid in prob.topo_order()
                    if prob.nodes[nid].kind == "D"
                    and prob.nodes[nid].lo == TRUE_ID
                    and prob.nodes[nid].hi == TRUE_ID
                )

            before = dc_count()
            smooth(prob)
            assert dc_count() - before <= n

    def test_dont_care_nodes_get_weights(self, example_pre_smooth):
        _, prob = example_pre_smooth
        smooth(prob)
        parameterize(prob, weights_75())
        for nid in prob.topo_order():
            node = prob.nodes[nid]
            if node.kind == "D" and node.lo == TRUE_ID and node.hi == TRUE_ID:
                assert node.theta_hi == 0.75

    def test_smoothing_invalidates_parameters_when_nodes_added(self, example_pre_smooth):
        _, prob = example_pre_smooth
        parameterize(prob, weights_75())
        smooth(prob)
        assert not prob.parameterized


class TestCheckers:
    def test_example_smooth_passes_all(self, example_smooth):
        _, prob = example_smooth
        assert check_determinism(prob)
        assert check_decomposability(prob)
        assert check_smoothness(prob)

    def test_example_pre_smooth_fails_at_root(self, example_pre_smooth):
        _, prob = example_pre_smooth
        offenders = [v for v in find_violations(prob) if v.property_name == "smoothness"]
        assert len(offenders) == 1
        assert offenders[0].node_id == prob.root
        assert prob.nodes[offenders[0].node_id].var == 1

    def test_overlapping_conjunction_children(self):
        prob = Prob(2)
        a = prob.add_decision(1, FALSE_ID, TRUE_ID)
        b = prob.add_decision(2, FALSE_ID, TRUE_ID)
        prob.nodes.append(Node("D", var=1, lo=b, hi=TRUE_ID))
        c = len(prob.nodes) - 1
        prob.root = prob.add_conj([a, c])
        assert not check_decomposability(prob)

    def test_duplicated_variable_on_path(self):
        prob = Prob(2)
        inner = prob.add_decision(1, FALSE_ID, TRUE_ID)
        prob.root = prob.add_decision(1, inner, TRUE_ID)
        assert not check_determinism(prob)

    def test_checkers_are_pure(self, example_pre_smooth):
        _, prob = example_pre_smooth
        count = prob.node_count
        check_smoothness(prob)
        check_determinism(prob)
        check_decomposability(prob)
        assert prob.node_count == count


class TestLogSumExp:
    def test_zero_branch(self):
        assert log_sum_exp(math.log(0.25), NEG_INF) == math.log(0.25)

    def test_symmetric_halves(self):
        assert abs(log_sum_exp(math.log(0.5), math.log(0.5))) < 1e-15

    def test_deep_negative_values(self):
        expected = -1000 + math.log1p(math.exp(-1.0))
        got = log_sum_exp(-1000.0, -1001.0)
        assert math.isfinite(got)
        assert abs(got - expected) <= 1e-12
        with mpmath.workdps(60):
            reference = float(mpmath.log(mpmath.exp(-1000) + mpmath.exp(-1001)))
        assert abs(got - reference) <= 1e-12

    def test_both_zero(self):
        assert log_sum_exp(NEG_INF, NEG_INF) == NEG_INF

    @given(st.floats(-700, 700))
    @settings(max_examples=200, deadline=None)
    def test_neg_inf_identity_is_exact(self, a):
        assert log_sum_exp(a, NEG_INF) == a
        assert log_sum_exp(NEG_INF, a) == a

    @given(st.floats(-50, 50), st.floats(-50, 50))
    @settings(max_examples=200, deadline=None)
    def test_matches_direct_evaluation(self, a, b):
        direct = math.log(math.exp(a) + math.exp(b))
        assert math.isclose(log_sum_exp(a, b), direct, rel_tol=1e-12, abs_tol=1e-12)

    @given(st.floats(-300, 300), st.floats(-300, 300))
    @settings(max_examples=200, deadline=None)
    def test_commutative_and_dominates_max(self, a, b):
        assert log_sum_exp(a, b) == log_sum_exp(b, a)
        assert log_sum_exp(a, b) >= max(a, b)


class TestAnnotate:
    def test_uniform_mass(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, WeightFunction.uniform())
        phi = annotate(prob)
        assert math.isclose(math.exp(phi[prob.root]), 0.5, rel_tol=1e-12)

    def test_weighted_mass(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, weights_75())
        phi = annotate(prob)
        assert math.isclose(math.exp(phi[prob.root]), 0.375, rel_tol=1e-12)

    def test_single_dont_care_has_mass_one(self):
        prob = Prob(1)
        prob.root = prob.add_decision(1, TRUE_ID, TRUE_ID)
        prob.smooth = True
        parameterize(prob, WeightFunction({1: 0.3, -1: 0.7}))
        phi = annotate(prob)
        assert abs(phi[prob.root]) < 1e-12

    def test_false_node_excluded(self, example_smooth):
        _, prob = example_smooth
        parameterize(prob, WeightFunction.uniform())
        phi = annotate(prob)
        assert FALSE_ID not in phi

    def test_unparameterized_rejected(self, example_smooth):
        _, prob = example_smooth
        with pytest.raises(StructureError):
            annotate(prob)

    def test_root_mass_in_unit_interval(self):
        rng = random.Random(23)
        for _ in range(40):
            n = rng.randint(1, 12)
            formula = random_mixed_cnf(rng, n, rng.randint(0, 2 * n))
            prob = smooth(compile_cnf(formula))
            parameterize(prob, random_weights(rng, n))
            phi = annotate(prob)
            mass = math.exp(phi[prob.root]) if prob.root in phi else 0.0
            assert 0.0 <= mass <= 1.0 + 1e-12
            expects_one = len(model_masks(formula)) == (1 << n)
            assert (abs(mass - 1.0) < 1e-9) == expects_one

    def test_log_matches_rational_everywhere(self):
        rng = random.Random(29)
        for _ in range(30):
            n = rng.randint(1, 16)
            formula = random_mixed_cnf(rng, n, rng.randint(0, 2 * n))
            prob = smooth(compile_cnf(formula))
            parameterize(prob, random_weights(rng, n, 1e-3, 1e3))
            phi_log = annotate(prob)
            phi_rat = annotate_rational(prob)
            assert set(phi_log) == set(phi_rat)
            for nid, value in phi_log.items():
                exact = phi_rat[nid]
                assert math.isclose(math.exp(value), float(exact), rel_tol=1e-9)


class TestWeightedModelCount:
    def test_unit_weights_count_models(self, example_smooth):
        _, prob = example_smooth
        assert weighted_model_count(prob, WeightFunction.uniform(), "rational") == 4

    def test_weighted_count(self, example_smooth):
        _, prob = example_smooth
        w = weights_75()
        assert weighted_model_count(prob, w, "rational") == Fraction(3, 8)
        assert math.isclose(weighted_model_count(prob, w, "log"), 0.375, rel_tol=1e-12)

    def test_unsatisfiable_counts_zero(self):
        prob = smooth(compile_cnf(CnfFormula(2, ((),))))
        assert weighted_model_count(prob, WeightFunction.uniform(), "rational") == 0
        assert weighted_model_count(prob, WeightFunction.uniform(), "log") == 0.0

    def test_matches_oracle_on_random_formulas(self):
        rng = random.Random(41)
        for _ in range(50):
            n = rng.randint(1, 14)
            formula = random_mixed_cnf(rng, n, rng.randint(0, 2 * n))
            prob = smooth(compile_cnf(formula))
            count = len(model_masks(formula))
            assert weighted_model_count(prob, WeightFunction.uniform(), "rational") == count
            if count:
                log_value = weighted_model_count(prob, WeightFunction.uniform(), "log")
                assert math.isclose(log_value, count, rel_tol=1e-9)
