"""Tests for identification: estimand trees, the core algorithm and its
conditional variant, calculus/adjustment checkers, causal relations,
recoverability, hedges, and serialization.

Numeric claims are checked against the exact model engine: random models
on the relevant graph, with the interventional kernel computed by
truncated factorization as the independent reference.
"""

import random

import pytest

from pagid.graph import (
    ARROW,
    CIRCLE,
    Edge,
    GraphClass,
    TAIL,
    parse_graph,
)
from pagid import oracle as oc
from pagid.identify import (
    ALL_NO,
    SOME_YES,
    AssemblyTree,
    Base,
    BoxProduct,
    Compose,
    Condition,
    ExchangeFail,
    FailCertificate,
    Marginalize,
    OrderedProduct,
    adjustment_check,
    attach_kernel,
    build_tree,
    calculus_check,
    causal_relation,
    format_estimand,
    hedge_witness,
    l0_sets,
    maximal_regime_separated,
    parse_certificate,
    parse_estimand,
    s_recoverability_check,
    scidp,
    sidp,
    verify_hedge,
    Hedge,
)
from pagid.represent import canonical_isadmg, mag_of
from helpers import fixing_identifiable, district_of, kernel_matches, rand_isadmg

ADMG = GraphClass.ADMG

# the undirected four-cycle and the back-door triangle recur throughout
CYCLE4 = (
    "node a output\nnode b output\nnode c1 output\nnode c2 output\n"
    "edge b --- c1\nedge b --- c2\nedge c1 --- a\nedge c2 --- a\n"
)
BACKDOOR = (
    "node a output\nnode b output\nnode c output\n"
    "edge c --> a\nedge a --> b\nedge c --> b\n"
)
CHAIN = (
    "node a output\nnode b output\nnode c output\n"
    "edge a --> b\nedge b --> c\n"
)


def cycle4():
    return parse_graph(CYCLE4)


def backdoor():
    return parse_graph(BACKDOOR)


class TestEstimandTrees:
    def test_outputs_algebra(self):
        V = frozenset("abc")
        q = Base(V)
        assert q.outputs == V
        m = Marginalize(q, frozenset("a"))
        assert m.outputs == frozenset("bc")
        c = Condition(m, ("b",))
        assert c.outputs == frozenset("c")
        p = OrderedProduct((c, Marginalize(q, frozenset("bc"))))
        assert p.outputs == frozenset("ac")
        comp = Compose(c, m, ("b",))
        assert comp.outputs == c.outputs

    def test_containment_is_checked(self):
        q = Base(frozenset("ab"))
        with pytest.raises(ValueError):
            Marginalize(q, frozenset("z"))
        with pytest.raises(ValueError):
            Condition(q, ("z",))

    def test_fail_certificate_shape(self):
        c = FailCertificate(frozenset({"a", "c1", "c2"}),
                            frozenset({"a", "b", "c1", "c2"}))
        assert str(c) == "FAIL C={a,c1,c2} T={a,b,c1,c2}"
        with pytest.raises(ValueError):
            FailCertificate(frozenset(), frozenset("a"))
        with pytest.raises(ValueError):
            FailCertificate(frozenset("a"), frozenset("a"))

    def test_exchange_fail_shape(self):
        e = ExchangeFail(frozenset("b"), frozenset("b"), frozenset("c"))
        assert str(e).startswith("FAIL exchange bucket={b}")

    def test_assembly_tree_invariants(self):
        l = AssemblyTree(frozenset("a"))
        r = AssemblyTree(frozenset("b"))
        t = AssemblyTree(frozenset("ab"), l, r)
        assert not t.is_leaf and l.is_leaf
        assert t.leaves() == [l, r]
        with pytest.raises(ValueError):
            AssemblyTree(frozenset())
        with pytest.raises(ValueError):
            AssemblyTree(frozenset("abc"), l, r)
        with pytest.raises(ValueError):
            AssemblyTree(frozenset("ab"), l, None)


class TestReductionSets:
    def test_cycle4_targets(self):
        D, Dt, H = l0_sets(cycle4(), ["a"], ["b"])
        assert D == frozenset({"a", "c1", "c2"})
        assert Dt == frozenset()
        assert H == frozenset()

    def test_chain_drops_upstream_of_removed(self):
        g = parse_graph(CHAIN)
        D, _, H = l0_sets(g, ["c"], ["b"])
        assert D == frozenset({"c"})
        assert H == frozenset({"a"})

    def test_rejects_bad_sets(self):
        g = parse_graph(CHAIN)
        with pytest.raises(ValueError):
            l0_sets(g, [], ["b"])
        with pytest.raises(ValueError):
            l0_sets(g, ["a"], ["a"])
        with pytest.raises(ValueError):
            l0_sets(g, ["nope"], [])


class TestBuildTree:
    def test_single_bucket_is_a_leaf(self):
        t = build_tree({"a", "c1", "c2"}, cycle4())
        assert t.is_leaf
        assert t.label == frozenset({"a", "c1", "c2"})

    def test_disconnected_parts_split(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\nnode d output\n"
            "edge a --> b\nedge c --> d\n"
        )
        t = build_tree(set("abcd"), g, ADMG)
        assert not t.is_leaf
        # no leaf mixes the two disconnected halves
        for leaf in t.leaves():
            assert leaf.label <= frozenset("ab") or leaf.label <= frozenset(
                "cd"
            )

    def test_labels_union_to_root(self):
        rng = random.Random(3)
        for _ in range(40):
            a = rand_isadmg(rng, n_out=rng.randint(2, 5), n_sel=0,
                            n_lat=0, n_in=0, p=0.5)
            t = build_tree(set(a.outputs), a, ADMG)
            got = frozenset()
            for leaf in t.leaves():
                assert leaf.label
                got |= leaf.label
            assert got == frozenset(a.outputs)


class TestSidp:
    def test_cycle4_failure_certificate(self):
        res = sidp(cycle4(), ["a"], ["b"])
        assert isinstance(res, FailCertificate)
        assert str(res) == "FAIL C={a,c1,c2} T={a,b,c1,c2}"

    def test_dag_chain_marginal(self):
        g = parse_graph(CHAIN)
        res = sidp(g, ["a"], [], ADMG)
        scm = oc.random_scm(g, random.Random(2))
        qv = oc.observational_kernel(scm)
        got = oc.eval_estimand(res, qv, scm)
        assert kernel_matches(got, qv.marginalize({"b", "c"}))

    def test_backdoor_admg_reading_matches_model(self):
        g = backdoor()
        res = sidp(g, ["b"], ["a"], ADMG)
        assert not isinstance(res, FailCertificate)
        for seed in range(5):
            scm = oc.random_scm(g, random.Random(seed))
            qv = oc.observational_kernel(scm)
            got = oc.eval_estimand(res, qv, scm)
            want = oc.interventional_kernel(scm, ["a"], outputs=["b"])
            assert kernel_matches(got, want), seed

    def test_backdoor_ancestral_reading_fails(self):
        # read as an ancestral graph, a --> b admits hidden confounding
        # (no witness for visibility), so the effect is not identified
        res = sidp(backdoor(), ["b"], ["a"])
        assert isinstance(res, FailCertificate)
        mag, wit, h = hedge_witness(backdoor(), ["b"], ["a"], res)
        D = maximal_regime_separated(wit, ["b"], ["a"])
        assert verify_hedge(
            wit, {"b"} | (set(wit.selections) - D), {"a"} | D, h
        )

    def test_visible_edge_identifies(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c1 output\n"
            "edge c1 <-> a\nedge a --> b\n"
        )
        res = sidp(g, ["b"], ["a"])
        assert not isinstance(res, FailCertificate)
        for seed in range(4):
            scm = oc.random_scm(g, random.Random(seed))
            got = oc.eval_estimand(res, oc.observational_kernel(scm), scm)
            want = oc.interventional_kernel(scm, ["a"], outputs=["b"])
            assert kernel_matches(got, want), seed

    def test_selection_free_agreement_with_district_factorization(self):
        # classical reading: success iff every district factor is reachable
        # by fixing, and the value matches the factorized reference
        rng = random.Random(17)
        hits = fails = 0
        for trial in range(60):
            g = rand_isadmg(rng, n_out=rng.randint(2, 4), n_sel=0,
                            n_lat=0, n_in=0, p=0.6)
            # the generator places one edge per pair; add confounding
            # alongside some directed edges so bow arcs occur
            extra = [
                Edge(e.a, ARROW, e.b, ARROW)
                for e in g.edges
                if (e.mark_a, e.mark_b) == (TAIL, ARROW)
                and rng.random() < 0.5
            ]
            g = g.with_edges(extra)
            outs = sorted(g.outputs)
            if len(outs) < 2:
                continue
            a = rng.choice(outs)
            B = rng.sample(
                [v for v in outs if v != a],
                rng.randint(1, len(outs) - 1),
            )
            res = sidp(g, [a], B, ADMG)
            D = g.induced(set(outs) - set(B)).ancestors({a})
            dists = set()
            sub = g.induced(D)
            for v in sorted(D):
                dists.add(frozenset(district_of(sub, v)))
            ok = all(fixing_identifiable(g, S) for S in dists)
            assert ok == (not isinstance(res, FailCertificate)), (g, a, B)
            if not ok:
                fails += 1
                continue
            hits += 1
            scm = oc.random_scm(g, random.Random(1000 + trial))
            qv = oc.observational_kernel(scm)
            got = oc.eval_estimand(res, qv, scm)
            want = oc.interventional_kernel(scm, B, outputs=[a])
            assert kernel_matches(got, want), (g, a, B)
            factors = [oc.c_factor(scm, S) for S in sorted(dists, key=min)]
            formula = oc.kernel_product(factors, scm.domains)
            formula = formula.marginalize(set(D) - {a})
            assert kernel_matches(formula, want), (g, a, B)
        assert hits >= 10 and fails >= 5

    def test_box_product_is_a_markov_combination(self):
        # the assembly product of the overlap-consistent kernels equals
        # q[left] * q[right] / q[overlap] pointwise
        g = backdoor()
        res = sidp(g, ["b"], ["a"], ADMG)
        box = res
        while not isinstance(box, BoxProduct):
            box = box.child
        scm = oc.random_scm(g, random.Random(9))
        qv = oc.observational_kernel(scm)
        kl = oc.eval_estimand(box.left, qv, scm)
        kr = oc.eval_estimand(box.right, qv, scm)
        kb = oc.eval_estimand(box, qv, scm)
        shared = set(kl.outputs) & set(kr.outputs)
        ki = kl.marginalize(set(kl.outputs) - shared)
        kj = kr.marginalize(set(kr.outputs) - shared)
        names = kb.context + kb.outputs
        for ctx in oc._assignments(kb.domains, kb.context):
            for out in oc._assignments(kb.domains, kb.outputs):
                asg = dict(zip(names, ctx + out))
                assert ki.value(asg) == kj.value(asg)
                denom = ki.value(asg)
                if denom:
                    assert kb.value(asg) * denom == kl.value(asg) * kr.value(
                        asg
                    )

    def test_input_graph_is_validated(self):
        bad = parse_graph(
            "node a output\nnode b output\nedge a --> b\nedge a <-> b\n"
            "node c output\nedge b o-o c\n"
        )
        with pytest.raises(ValueError):
            sidp(bad, ["a"], [])


class TestScidp:
    def test_cycle4_conditional_effect(self):
        res = scidp(cycle4(), ["a"], ["b"], ["c1", "c2"])
        assert format_estimand(res) == "(cond (b c1 c2) (Q (a b c1 c2)))"

    def test_cycle4_conditional_matches_model(self):
        wit = canonical_isadmg(cycle4())
        res = scidp(cycle4(), ["a"], ["b"], ["c1", "c2"])
        for seed in range(4):
            scm = oc.random_scm(wit, random.Random(seed))
            qv = oc.observational_kernel(scm)
            got = oc.eval_estimand(res, qv, scm)
            want = oc.interventional_kernel(
                scm, ["b"], outputs=["a", "c1", "c2"]
            ).condition(("c1", "c2"))
            assert kernel_matches(got, want), seed

    def test_empty_condition_reduces_to_unconditional(self):
        g = backdoor()
        assert format_estimand(scidp(g, ["b"], ["a"], [], ADMG)) == \
            format_estimand(sidp(g, ["b"], ["a"], ADMG))

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            scidp(cycle4(), ["a"], ["b"], ["a"])


class TestCalculus:
    def test_cycle4_exchange_rules(self):
        g = cycle4()
        assert calculus_check(g, 2, ["a"], ["b"], ["c1", "c2"])
        assert calculus_check(g, 3, ["a"], ["b"], ["c1", "c2"])

    def test_cycle4_needs_the_separators(self):
        g = cycle4()
        assert not calculus_check(g, 2, ["a"], ["b"])
        assert not calculus_check(g, 3, ["a"], ["b"])

    def test_observation_exchange_on_partial_graph(self):
        p = parse_graph(
            "node a output\nnode b output\nnode c1 output\n"
            "node c2 output\nnode t output\n"
            "edge a o-> c1\nedge c2 o-> c1\nedge c2 o-o b\n"
            "edge c2 o-> t\nedge a o-> t\nedge t o-o c1\n"
        )
        assert calculus_check(p, 1, ["a"], ["b"], ["c1", "c2"], ["t"])
        assert not calculus_check(p, 1, ["a"], ["b"], ["c1"], ["t"])

    def test_rejects_bad_arguments(self):
        g = cycle4()
        with pytest.raises(ValueError):
            calculus_check(g, 4, ["a"], ["b"])
        with pytest.raises(ValueError):
            calculus_check(g, 1, ["a"], ["a"])
        with pytest.raises(ValueError):
            calculus_check(g, 1, [], ["a"])

    def test_rule_equalities_hold_numerically(self):
        # when a rule applies, the corresponding kernel equality is exact
        g = backdoor()
        assert calculus_check(g, 2, ["b"], ["a"], ["c"], cls=ADMG)
        for seed in range(4):
            scm = oc.random_scm(g, random.Random(seed))
            doa = oc.interventional_kernel(
                scm, ["a"], outputs=["b", "c"]
            ).condition(("c",))
            obs = oc.observational_kernel(scm).condition(("a", "c"))
            obs = Trim(obs, ("b",))
            doa = Trim(doa, ("b",))
            assert kernel_matches(obs, doa) or kernel_matches(doa, obs)


def Trim(k, outputs):
    return k.marginalize(set(k.outputs) - set(outputs))


class TestAdjustment:
    def test_backdoor_set(self):
        ok, est = adjustment_check(
            backdoor(), ["b"], ["a"], J0=["c"], cls=ADMG
        )
        assert ok
        g = backdoor()
        for seed in range(4):
            scm = oc.random_scm(g, random.Random(seed))
            got = oc.eval_estimand(est, oc.observational_kernel(scm), scm)
            want = oc.interventional_kernel(scm, ["a"], outputs=["b"])
            assert kernel_matches(got, want), seed

    def test_backdoor_fails_at_ancestral_reading(self):
        # the invisible a --> b admits confounding, so no adjustment set
        # is licensed for the graph read as a MAG
        ok, est = adjustment_check(backdoor(), ["b"], ["a"], J0=["c"])
        assert not ok and est is None

    def test_empty_adjustment_set(self):
        g = parse_graph("node a output\nnode b output\nedge a --> b\n")
        ok, est = adjustment_check(g, ["b"], ["a"], cls=ADMG)
        assert ok
        assert not isinstance(est, Compose)
        scm = oc.random_scm(g, random.Random(1))
        got = oc.eval_estimand(est, oc.observational_kernel(scm), scm)
        want = oc.interventional_kernel(scm, ["a"], outputs=["b"])
        assert kernel_matches(got, want)

    def test_rejects_overlapping_roles(self):
        with pytest.raises(ValueError):
            adjustment_check(backdoor(), ["b"], ["a"], J0=["b"])


class TestCausalRelations:
    def setup_method(self):
        self.g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge b --> c\nedge b <-> c\n"
        )

    def test_direct_cause_excluded(self):
        assert causal_relation(self.g, "a", "c", "direct") == ALL_NO

    def test_total_cause_possible(self):
        assert causal_relation(self.g, "a", "c", "total") == SOME_YES

    def test_confounding_excluded(self):
        assert causal_relation(self.g, "a", "b", "confounding") == ALL_NO

    def test_selection_ancestry(self):
        # an arrowhead toward the node rules out selection ancestry
        assert causal_relation(self.g, "c", "a", "sel_ancestor") == ALL_NO
        assert causal_relation(self.g, "a", "b", "sel_ancestor") == SOME_YES

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            causal_relation(self.g, "a", "b", "nonsense")
        with pytest.raises(ValueError):
            causal_relation(self.g, "a", "a", "direct")


class TestSRecoverability:
    def test_failed_identification_blocks_recovery(self):
        assert not s_recoverability_check(backdoor(), ["b"], ["a"])

    def test_separated_from_unselected_roots(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge b <-> c\n"
        )
        # the only arrowhead-free node is a; c is blocked from it
        assert s_recoverability_check(g, ["c"], [])
        assert not s_recoverability_check(g, ["b"], [])


class TestHedges:
    # the represented graph drawn next to the undirected four-cycle:
    # one cherry of the cycle is confounded, the rest splits off
    WIT = (
        "node a output\nnode b output\nnode c1 output\nnode c2 output\n"
        "node s1 selection\nnode s2 selection\n"
        "node s3 selection\nnode s4 selection\n"
        "edge b --> c2\nedge b <-> c2\nedge c2 --> a\n"
        "edge b --> s1\nedge c2 --> s1\nedge c2 --> s2\nedge a --> s2\n"
        "edge b --> s3\nedge c1 --> s3\nedge c1 --> s4\nedge a --> s4\n"
    )

    def test_cycle4_witness_hedge(self):
        wit = parse_graph(self.WIT)
        assert mag_of(wit) == cycle4()
        h = Hedge(
            H=frozenset({"b", "c2"}),
            Hprime=frozenset({"c2"}),
            R=frozenset({"c2"}),
            forest_edges=(
                Edge("b", TAIL, "c2", ARROW),
                Edge("b", ARROW, "c2", ARROW),
            ),
            forest_prime_edges=(),
        )
        S = set(wit.selections)
        assert maximal_regime_separated(wit, ["a"], ["b"]) == frozenset()
        assert verify_hedge(wit, {"a"} | S, {"b"}, h)

    def test_cycle4_constructed_witness(self):
        cert = sidp(cycle4(), ["a"], ["b"])
        mag, wit, h = hedge_witness(cycle4(), ["a"], ["b"], cert)
        assert mag_of(wit) == cycle4()
        assert len(h.H) == 2 and len(h.Hprime) == 1 and h.R == h.Hprime
        D = maximal_regime_separated(wit, ["a"], ["b"])
        assert verify_hedge(
            wit, {"a"} | (set(wit.selections) - D), {"b"} | D, h
        )

    # the selection-biased bow-arc neighbourhood: two treatments into a,
    # one confounded and selected
    A9 = (
        "node a output\nnode b1 output\nnode b2 output\nnode c output\n"
        "node s selection\n"
        "edge b1 --> a\nedge c --> b1\nedge b2 --> a\nedge c --> s\n"
        "edge b2 --> s\nedge c <-> a\nedge c <-> b2\n"
    )

    def _a9_hedge(self):
        return Hedge(
            H=frozenset({"b2", "a", "c"}),
            Hprime=frozenset({"a", "c"}),
            R=frozenset({"a", "c"}),
            forest_edges=(
                Edge("b2", TAIL, "a", ARROW),
                Edge("c", ARROW, "a", ARROW),
                Edge("c", ARROW, "b2", ARROW),
            ),
            forest_prime_edges=(Edge("c", ARROW, "a", ARROW),),
        )

    def test_selected_bow_arc_hedges(self):
        g = parse_graph(self.A9)
        h = self._a9_hedge()
        assert verify_hedge(g, {"a", "s"}, {"b2"}, h)
        assert verify_hedge(g, {"a", "s"}, {"b1", "b2"}, h)

    def test_unselected_variant_is_not_hedged(self):
        # without the selection node, the root set is no longer ancestral
        # to the target, so the same structure is not a hedge
        g = parse_graph(self.A9).without_nodes({"s"})
        assert not verify_hedge(g, {"a"}, {"b1", "b2"}, self._a9_hedge())

    def test_mag_failure_is_certified(self):
        m = mag_of(parse_graph(self.A9))
        cert = sidp(m, ["a"], ["b1", "b2"])
        assert isinstance(cert, FailCertificate)
        mag, wit, h = hedge_witness(m, ["a"], ["b1", "b2"], cert)
        D = maximal_regime_separated(wit, ["a"], ["b1", "b2"])
        assert verify_hedge(
            wit,
            {"a"} | (set(wit.selections) - D),
            {"b1", "b2"} | D,
            h,
        )

    def test_verify_hedge_rejects_bad_shapes(self):
        g = parse_graph(self.A9)
        good = self._a9_hedge()
        bad_nesting = Hedge(good.H, good.H | {"b1"}, good.R,
                            good.forest_edges, good.forest_prime_edges)
        assert not verify_hedge(g, {"a", "s"}, {"b2"}, bad_nesting)
        overlap = Hedge(good.H, frozenset({"b2"}), frozenset({"b2"}),
                        good.forest_edges, ())
        assert not verify_hedge(g, {"a", "s"}, {"b2"}, overlap)

    def test_witness_needs_a_certificate(self):
        with pytest.raises(ValueError):
            hedge_witness(cycle4(), ["a"], ["b"], None)


class TestSerialization:
    def test_round_trip_all_nodes(self):
        q = Base(frozenset("abcd"))
        est = Marginalize(
            Condition(
                BoxProduct(
                    OrderedProduct(
                        (Marginalize(q, frozenset("d")),)
                    ),
                    Marginalize(q, frozenset("abc")),
                    frozenset("abcd"),
                    (("a",), ("b", "c"), ("d",)),
                ),
                ("a",),
            ),
            frozenset("b"),
        )
        text = format_estimand(est)
        assert parse_estimand(text) == est

    def test_compose_round_trip(self):
        q = Base(frozenset("ab"))
        est = Compose(Condition(q, ("a",)), Marginalize(q, frozenset("b")),
                      ("a",))
        assert parse_estimand(format_estimand(est)) == est

    def test_certificate_round_trip(self):
        cert = FailCertificate(frozenset({"a"}), frozenset({"a", "b"}))
        assert parse_certificate(str(cert)) == cert
        assert parse_estimand(str(cert)) == cert

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_estimand("(Q (a)) trailing")
        with pytest.raises(ValueError):
            parse_estimand("(huh (a))")
        with pytest.raises(ValueError):
            parse_certificate("FAIL C={a} X={b}")

    def test_algorithm_outputs_round_trip(self):
        for res in (
            sidp(backdoor(), ["b"], ["a"], ADMG),
            sidp(cycle4(), ["a"], ["b"]),
            scidp(cycle4(), ["a"], ["b"], ["c1", "c2"]),
        ):
            if isinstance(res, FailCertificate):
                assert parse_estimand(str(res)) == FailCertificate(
                    res.C, res.T
                )
            else:
                assert parse_estimand(format_estimand(res)) == res


class TestKernelAttachment:
    def test_leaf_estimand_structure(self):
        g = parse_graph(CHAIN)
        V = frozenset(g.outputs)
        tree = build_tree({"a"}, g, ADMG)
        table = attach_kernel(tree, V, Base(V), g, ADMG)
        est = table[tree]
        assert est.outputs == frozenset({"a"})
        # fixing proceeds leafward: last bucket removed first
        assert isinstance(est, OrderedProduct)
