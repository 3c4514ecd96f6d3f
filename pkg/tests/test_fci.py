"""Tests for constraint-based structure recovery: the independence
oracles, the adjacency search, the orientation rules, and the combined
procedure, checked against known graphs and random models."""

import random

import pytest

from pagid.graph import (
    ARROW,
    CIRCLE,
    GraphClass,
    Mark,
    NodeKind,
    TAIL,
    parse_graph,
    validate,
)
from pagid.fci import (
    FciConflict,
    distribution_oracle,
    fci,
    graph_oracle,
    orient,
    skeleton,
)
from pagid.oracle import parse_scm, random_scm
from pagid.represent import canonical_isadmg, enumerate_mags, mag_of
from helpers import rand_isadmg


def marks_of(g):
    out = {}
    for e in g.edges:
        out[(e.a, e.b)] = e.mark_b
        out[(e.b, e.a)] = e.mark_a
    return out


def skeleton_pairs(g):
    return {frozenset((e.a, e.b)) for e in g.edges}


class TestGraphOracle:
    def test_basic_separation(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge b --> c\n"
        )
        o = graph_oracle(g)
        assert o.query({"a"}, {"c"}, {"b"})
        assert not o.query({"a"}, {"c"})

    def test_selection_is_always_conditioned(self):
        g = parse_graph(
            "node a output\nnode b output\nnode s selection\n"
            "edge a --> s\nedge b --> s\n"
        )
        # conditioning on the collider child links the two causes
        assert not graph_oracle(g).query({"a"}, {"b"})

    def test_inputs_are_implicitly_conditioned(self):
        g = parse_graph(
            "node i input\nnode a output\nnode b output\n"
            "edge i --> a\nedge a --> b\n"
        )
        o = graph_oracle(g)
        assert not o.query({"i"}, {"b"})
        assert o.query({"i"}, {"b"}, {"a"})
        # a query with the input as an endpoint must not condition on it
        assert not o.query({"i"}, {"a"})

    def test_memoized_and_symmetric(self):
        g = parse_graph("node a output\nnode b output\nedge a --> b\n")
        o = graph_oracle(g)
        assert o.query({"a"}, {"b"}) == o.query({"b"}, {"a"})


class TestDistributionOracle:
    CHAIN = (
        "var a\nvar b parents=a\nvar c parents=b\n"
        "cpt a - 1/2 1/2\ncpt b 0 3/4 1/4\ncpt b 1 1/4 3/4\n"
        "cpt c 0 2/3 1/3\ncpt c 1 1/3 2/3\n"
    )

    def test_chain_independences(self):
        o = distribution_oracle(parse_scm(self.CHAIN))
        assert o.query({"a"}, {"c"}, {"b"})
        assert not o.query({"a"}, {"c"})
        assert not o.query({"a"}, {"b"})

    def test_selected_collider_dependence(self):
        scm = parse_scm(
            "var a\nvar b\nvar s kind=selection parents=a,b\n"
            "cpt a - 1/2 1/2\ncpt b - 1/2 1/2\n"
            "cpt s 0,0 1 0\ncpt s 0,1 1/2 1/2\n"
            "cpt s 1,0 1/2 1/2\ncpt s 1,1 0 1\n"
        )
        assert not distribution_oracle(scm).query({"a"}, {"b"})

    def test_input_invariance_queries(self):
        scm = parse_scm(
            "var i kind=input\nvar a parents=i\nvar b parents=a\n"
            "cpt a 0 3/4 1/4\ncpt a 1 1/4 3/4\n"
            "cpt b 0 2/3 1/3\ncpt b 1 1/3 2/3\n"
        )
        o = distribution_oracle(scm)
        assert not o.query({"i"}, {"a"})
        assert not o.query({"i"}, {"b"})
        assert o.query({"i"}, {"b"}, {"a"})

    def test_rejects_input_vs_input(self):
        scm = parse_scm(
            "var i kind=input\nvar j kind=input\nvar a parents=i,j\n"
            "cpt a 0,0 1 0\ncpt a 0,1 0 1\ncpt a 1,0 0 1\ncpt a 1,1 1 0\n"
        )
        o = distribution_oracle(scm)
        with pytest.raises(ValueError):
            o.query({"i"}, {"j"})

    def test_agrees_with_graph_oracle(self):
        rng = random.Random(13)
        for trial in range(8):
            g = rand_isadmg(rng, n_out=3, n_sel=1, n_lat=0, n_in=1, p=0.5)
            do = distribution_oracle(random_scm(g, random.Random(trial)))
            go = graph_oracle(g)
            outs = sorted(g.outputs)
            for a, b in [(outs[0], outs[1]), (outs[1], outs[2])]:
                for cs in ([], [v for v in outs if v not in (a, b)]):
                    if go.query({a}, {b}, set(cs)):
                        assert do.query({a}, {b}, set(cs)), (g, a, b, cs)


class TestSkeleton:
    def test_chain_skeleton_and_sepsets(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge b --> c\n"
        )
        sk, seps = skeleton(graph_oracle(g), [], ["a", "b", "c"])
        assert skeleton_pairs(sk) == {frozenset("ab"), frozenset("bc")}
        assert seps[frozenset("ac")] == frozenset("b")
        for e in sk.edges:
            assert (e.mark_a, e.mark_b) == (CIRCLE, CIRCLE)

    def test_matches_true_skeleton_on_random_graphs(self):
        rng = random.Random(29)
        for _ in range(30):
            a = rand_isadmg(rng, n_out=rng.randint(3, 5),
                            n_sel=rng.randint(0, 1), n_lat=rng.randint(0, 1),
                            n_in=rng.randint(0, 1), p=0.4)
            m = mag_of(a)
            o = graph_oracle(canonical_isadmg(m))
            sk, _ = skeleton(o, m.inputs, m.outputs)
            assert skeleton_pairs(sk) == skeleton_pairs(m), a

    def test_long_range_edge_from_inducing_path(self):
        # b <-> m <-> c with m an ancestor of b: no subset of the
        # neighbourhoods separates b from c, so the edge must survive
        a = parse_graph(
            "node b output\nnode m output\nnode c output\n"
            "edge b <-> m\nedge m <-> c\nedge m --> b\n"
        )
        m = mag_of(a)
        assert frozenset("bc") in skeleton_pairs(m)
        sk, _ = skeleton(graph_oracle(a), [], ["b", "m", "c"])
        assert skeleton_pairs(sk) == skeleton_pairs(m)


class TestOrientationGoldens:
    def test_collider(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge b --> a\nedge c --> a\n"
        )
        p = fci(graph_oracle(g), g.nodes)
        mk = marks_of(p)
        assert mk[("b", "a")] is ARROW and mk[("c", "a")] is ARROW
        assert mk[("a", "b")] is CIRCLE and mk[("a", "c")] is CIRCLE

    def test_fork_is_uninformative(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge a --> c\n"
        )
        p = fci(graph_oracle(g), g.nodes)
        assert all(
            (e.mark_a, e.mark_b) == (CIRCLE, CIRCLE) for e in p.edges
        )

    def test_shielded_triangle_stays_circles(self):
        # the closure of a -> b -> c with b <-> c is a complete graph;
        # nothing is unshielded, so no rule fires
        a = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge a --> b\nedge b --> c\nedge b <-> c\n"
        )
        p = fci(graph_oracle(a), a.nodes)
        assert skeleton_pairs(p) == {
            frozenset("ab"), frozenset("bc"), frozenset("ac")
        }
        assert all(
            (e.mark_a, e.mark_b) == (CIRCLE, CIRCLE) for e in p.edges
        )

    def test_chordless_cycle_orients_undirected(self):
        # an undirected four-cycle is alone in its equivalence class: the
        # circle-path rule turns every end into a tail
        m = parse_graph(
            "node a output\nnode b output\nnode c1 output\nnode c2 output\n"
            "edge b --- c1\nedge b --- c2\nedge c1 --- a\nedge c2 --- a\n"
        )
        p = fci(graph_oracle(canonical_isadmg(m)), m.nodes)
        assert p == m
        assert list(enumerate_mags(p)) == [m]

    def test_collider_then_propagation(self):
        # c1, c2 -> a -> b: colliders at a, then the arrow propagates
        # to b and the circles at c1, c2 become tails
        g = parse_graph(
            "node c1 output\nnode c2 output\nnode a output\nnode b output\n"
            "edge c1 --> a\nedge c2 --> a\nedge a --> b\n"
        )
        p = fci(graph_oracle(g), g.nodes)
        mk = marks_of(p)
        assert mk[("c1", "a")] is ARROW and mk[("c2", "a")] is ARROW
        assert mk[("a", "b")] is ARROW and mk[("b", "a")] is TAIL

    def test_input_edge_gets_tail(self):
        g = parse_graph(
            "node i input\nnode a output\nnode b output\n"
            "edge i --> a\nedge a --> b\n"
        )
        p = fci(graph_oracle(g), g.nodes)
        mk = marks_of(p)
        assert mk[("a", "i")] is TAIL
        assert p.kind("i") is NodeKind.INPUT

    def test_selected_bow_arc_neighbourhood(self):
        a = parse_graph(
            "node a output\nnode b1 output\nnode b2 output\nnode c output\n"
            "node s selection\n"
            "edge b1 --> a\nedge c --> b1\nedge b2 --> a\nedge c --> s\n"
            "edge b2 --> s\nedge c <-> a\nedge c <-> b2\n"
        )
        p = fci(graph_oracle(a), mag_of(a).nodes)
        mk = marks_of(p)
        assert mk[("b1", "a")] is ARROW and mk[("b2", "a")] is ARROW
        assert mk[("c", "a")] is ARROW
        assert mk[("a", "b1")] is CIRCLE and mk[("a", "c")] is CIRCLE
        assert mk[("b1", "c")] is CIRCLE and mk[("c", "b1")] is CIRCLE
        assert mk[("b2", "c")] is CIRCLE and mk[("c", "b2")] is CIRCLE


class TestOrientErrors:
    def test_missing_sepset_is_a_conflict(self):
        sk = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge b o-o a\nedge c o-o a\n"
        )
        with pytest.raises(FciConflict):
            orient(sk, {})

    def test_handmade_sepsets_orient_both_colliders(self):
        sk = parse_graph(
            "node a output\nnode b output\nnode c output\nnode d output\n"
            "edge b o-o a\nedge c o-o a\nedge b o-o d\nedge c o-o d\n"
        )
        seps = {
            frozenset("bc"): frozenset(),  # collider at both a and d
            frozenset("ad"): frozenset("bc"),
        }
        g = orient(sk, seps)
        mk = marks_of(g)
        assert mk[("b", "a")] is ARROW and mk[("b", "d")] is ARROW


class TestFci:
    def test_trace_records_rule_applications(self):
        g = parse_graph(
            "node a output\nnode b output\nnode c output\n"
            "edge b --> a\nedge c --> a\n"
        )
        trace = []
        fci(graph_oracle(g), g.nodes, trace=trace)
        assert any("R0" in str(t) for t in trace)

    def test_idempotent_reconstruction(self):
        rng = random.Random(41)
        for _ in range(15):
            a = rand_isadmg(rng, n_out=rng.randint(3, 4),
                            n_sel=rng.randint(0, 1), n_lat=0,
                            n_in=rng.randint(0, 1), p=0.5)
            m = mag_of(a)
            p = fci(graph_oracle(canonical_isadmg(m)), m.nodes)
            assert fci(graph_oracle(canonical_isadmg(m)), m.nodes) == p

    def test_sound_against_generating_graph(self):
        # every definite mark in the output agrees with the true graph,
        # and the output is a valid partial graph containing it
        rng = random.Random(43)
        for _ in range(25):
            a = rand_isadmg(rng, n_out=rng.randint(3, 5),
                            n_sel=rng.randint(0, 1), n_lat=rng.randint(0, 1),
                            n_in=rng.randint(0, 1), p=0.4)
            m = mag_of(a)
            p = fci(graph_oracle(canonical_isadmg(m)), m.nodes)
            assert validate(p, GraphClass.PAG) == [], (a, p)
            true = marks_of(m)
            for pair, mark in marks_of(p).items():
                if mark is not CIRCLE:
                    assert true[pair] is mark, (a, pair)
            circles = sum(
                (e.mark_a is CIRCLE) + (e.mark_b is CIRCLE)
                for e in p.edges
            )
            if circles <= 14:
                assert m in set(enumerate_mags(p)), a

    def test_distribution_oracle_end_to_end(self):
        g = parse_graph(
            "node c1 output\nnode c2 output\nnode a output\nnode b output\n"
            "edge c1 --> a\nedge c2 --> a\nedge a --> b\n"
        )
        scm = random_scm(g, random.Random(2))
        p = fci(distribution_oracle(scm), g.nodes)
        assert p == fci(graph_oracle(g), g.nodes)

    def test_default_nodes_come_from_oracle(self):
        g = parse_graph(
            "node a output\nnode b output\nedge a --> b\n"
        )
        p = fci(graph_oracle(g))
        assert set(p.node_ids) == {"a", "b"}
