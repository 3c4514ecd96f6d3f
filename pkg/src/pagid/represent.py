"""Translations between the graph classes and witness constructions.

The three workhorse maps are:

* ``mag_of``      projects an acyclic directed mixed graph with latent and
                  selection nodes down to its maximal ancestral graph over
                  the input and output nodes;
* ``canonical_isadmg``  goes the other way, replacing each undirected edge
                  of a MAG by a fresh selection child of both endpoints;
* ``marginalize_latents``  eliminates latent nodes one at a time, splicing
                  walks through them into direct edges.

On top of these sit enumeration helpers (all MAGs represented by a partial
graph, all small witness graphs represented by a MAG) and the witness
constructions used to certify failed separations.
"""

from __future__ import annotations

import itertools

from .graph import (
    ARROW,
    CIRCLE,
    INPUT,
    LATENT,
    OUTPUT,
    SELECTION,
    TAIL,
    Edge,
    GraphClass,
    MixedGraph,
    inducing_path_exists,
    validate,
)
from .manipulate import ManipulatedGraph, is_visible, manipulate
from . import separate


def _plain(g) -> MixedGraph:
    return g.graph if isinstance(g, ManipulatedGraph) else g


def mag_of(a: MixedGraph) -> MixedGraph:
    """Maximal ancestral graph of an acyclic directed mixed graph: keep the
    input and output nodes, connect pairs joined by an inducing path, and
    put a tail exactly at endpoints that are ancestors of the other end or
    of a selection node."""
    a = _plain(a)
    problems = validate(a, GraphClass.ADMG)
    if problems:
        raise ValueError("not a valid ADMG: " + "; ".join(problems))
    latents = set(a.latents)
    selections = set(a.selections)
    keep = [v for v in a.node_ids if a.kind(v) in (INPUT, OUTPUT)]
    nodes = {v: a.kind(v) for v in keep}
    edges = []
    for x, y in itertools.combinations(keep, 2):
        if a.kind(x) is INPUT and a.kind(y) is INPUT:
            continue
        if not inducing_path_exists(a, x, y, latents, selections):
            continue
        mx = TAIL if x in a.ancestors({y} | selections) else ARROW
        my = TAIL if y in a.ancestors({x} | selections) else ARROW
        edges.append(Edge(x, mx, y, my))
    m = MixedGraph(nodes, edges)
    assert validate(m, GraphClass.MAG) == [], validate(m, GraphClass.MAG)
    return m


def split_id(a: str, b: str) -> str:
    a, b = sorted((a, b))
    return f"s__{a}__{b}"


def canonical_isadmg(m: MixedGraph) -> MixedGraph:
    """Canonical represented graph of a MAG: undirected edges become a
    shared selection child, everything else is copied verbatim."""
    m = _plain(m)
    for e in m.edges:
        if CIRCLE in (e.mark_a, e.mark_b):
            raise ValueError(f"circle mark in {e}: not a MAG")
    nodes = {v: m.kind(v) for v in m.node_ids}
    edges = []
    for e in m.edges:
        if e.mark_a is TAIL and e.mark_b is TAIL:
            s = split_id(e.a, e.b)
            if s in nodes:
                raise ValueError(f"node id {s} collides with split namespace")
            nodes[s] = SELECTION
            edges.append(Edge(e.a, TAIL, s, ARROW))
            edges.append(Edge(e.b, TAIL, s, ARROW))
        else:
            edges.append(e)
    a = MixedGraph(nodes, edges)
    assert validate(a, GraphClass.ADMG) == [], validate(a, GraphClass.ADMG)
    return a


def marginalize_latents(a: MixedGraph, drop=None) -> MixedGraph:
    """Eliminate latent nodes (all by default) by splicing the walks that
    pass through them as non-colliders into direct edges."""
    a = _plain(a)
    todo = sorted(set(a.latents) if drop is None else set(drop))
    for l in todo:
        if a.kind(l) is not LATENT:
            raise ValueError(f"{l} is not a latent node")
    for l in todo:
        incident = a.edges_at(l)
        new_edges = []
        for i, (x, _ml1, mx, e1) in enumerate(incident):
            for y, _ml2, my, e2 in incident[i:]:
                if e1 is e2 or x == y:
                    continue
                if e1.mark_at(l) is ARROW and e2.mark_at(l) is ARROW:
                    continue  # collider at the latent: nothing to splice
                new_edges.append(Edge(x, mx, y, my))
        a = a.without_nodes([l]).with_edges(new_edges)
    return a


# -- enumeration -------------------------------------------------------------


def enumerate_mags(p: MixedGraph, limit: int = 1 << 16, membership=None):
    """All MAGs obtained by resolving every circle mark of p into a tail or
    an arrowhead.  membership=None keeps every valid MAG; "copag" keeps
    those whose discovered partial graph is p again; a callable keeps the
    MAGs it accepts."""
    p = _plain(p)
    slots = []
    for e in p.edges:
        for v in (e.a, e.b):
            if e.mark_at(v) is CIRCLE:
                slots.append((e, v))
    if 2 ** len(slots) > limit:
        raise ValueError(f"too many circle marks ({len(slots)}) to enumerate")
    check = membership
    if membership == "copag":
        from .fci import fci, graph_oracle

        def check(m):
            return fci(graph_oracle(canonical_isadmg(m)), m.nodes) == p

    out = []
    for choice in itertools.product((TAIL, ARROW), repeat=len(slots)):
        marks = {}
        ok = True
        for (e, v), mk in zip(slots, choice):
            if mk is ARROW and p.kind(v) is INPUT:
                ok = False
                break
            marks[(e, v)] = mk
        if not ok:
            continue
        edges = []
        for e in p.edges:
            ma = marks.get((e, e.a), e.mark_a)
            mb = marks.get((e, e.b), e.mark_b)
            edges.append(Edge(e.a, ma, e.b, mb))
        m = MixedGraph(p.nodes, edges)
        if validate(m, GraphClass.MAG):
            continue
        if check is not None and not check(m):
            continue
        out.append(m)
    return out


def enumerate_represented(
    m: MixedGraph, max_extra_selection: int = 0, limit: int = 1 << 18
):
    """Graphs represented by the MAG m, built from its canonical graph by
    optionally doubling directed edges with a bidirected copy and adding up
    to max_extra_selection fresh selection nodes with parents among the
    original nodes.  Every candidate is checked to project back to m."""
    m = _plain(m)
    base = canonical_isadmg(m)
    directed = [
        e
        for e in m.edges
        if (e.mark_a, e.mark_b) in ((TAIL, ARROW), (ARROW, TAIL))
        and m.kind(e.a) is OUTPUT
        and m.kind(e.b) is OUTPUT
    ]
    names = list(m.node_ids)
    parent_sets = [
        ps
        for k in range(2, len(names) + 1)
        for ps in itertools.combinations(names, k)
    ]
    sel_options = [()]
    for k in range(1, max_extra_selection + 1):
        sel_options.extend(
            itertools.combinations_with_replacement(parent_sets, k)
        )

    count = 0
    for bd in itertools.chain.from_iterable(
        itertools.combinations(directed, k) for k in range(len(directed) + 1)
    ):
        extra = [Edge(e.a, ARROW, e.b, ARROW) for e in bd]
        for sels in sel_options:
            nodes = dict(base.nodes)
            edges = list(base.edges) + list(extra)
            for i, ps in enumerate(sels):
                s = f"s__x{i}"
                if s in nodes:
                    raise ValueError(f"node id {s} collides")
                nodes[s] = SELECTION
                edges.extend(Edge(v, TAIL, s, ARROW) for v in ps)
            count += 1
            if count > limit:
                raise ValueError("witness enumeration limit exceeded")
            cand = MixedGraph(nodes, edges)
            if validate(cand, GraphClass.ADMG):
                continue
            if mag_of(cand) == m:
                yield cand


# -- witnesses ---------------------------------------------------------------


def bidirected_witness(m: MixedGraph, a: str, b: str) -> MixedGraph:
    """Represented graph of m in which the invisible directed edge a --> b
    gains a parallel bidirected edge."""
    m = _plain(m)
    es = m.edges_between(a, b)
    if len(es) != 1 or es[0] != Edge(a, TAIL, b, ARROW):
        raise ValueError(f"no directed edge {a} --> {b}")
    if is_visible(m, a, b):
        raise ValueError(f"{a} --> {b} is visible; no bidirected witness")
    w = canonical_isadmg(m).with_edges([Edge(a, ARROW, b, ARROW)])
    assert mag_of(w) == m
    return w


def separation_failure_witness(m: MixedGraph, A, B, C=(), D=(), T=()):
    """A represented graph of the MAG m in which A is not id-separated from
    B given C together with the selection nodes, after manipulating softly
    on D and hard on T.  Returns None if every candidate in the search pool
    is separated (which certifies the separation at the MAG level)."""
    m = _plain(m)
    for cand in _witness_pool(m):
        cmg = manipulate(cand, D, T, GraphClass.ADMG)
        cc = set(C) | set(T) | set(cand.selections)
        if not separate.id_separated(cmg, A, B, cc):
            return cand
    return None


def _witness_pool(m: MixedGraph):
    """Candidate represented graphs ordered from plain to decorated: the
    canonical graph, then single bidirected additions parallel to invisible
    directed edges or aimed at split selection nodes, then pairs."""
    base = canonical_isadmg(m)
    yield base
    singles = []
    for e in m.edges:
        if (e.mark_a, e.mark_b) in ((TAIL, ARROW), (ARROW, TAIL)):
            tail = e.a if e.mark_a is TAIL else e.b
            head = e.other(tail)
            if m.kind(tail) is OUTPUT and not is_visible(m, tail, head):
                singles.append(Edge(tail, ARROW, head, ARROW))
        elif (e.mark_a, e.mark_b) == (TAIL, TAIL):
            s = split_id(e.a, e.b)
            singles.append(Edge(e.a, ARROW, s, ARROW))
            singles.append(Edge(e.b, ARROW, s, ARROW))
    seen = set()
    for k in (1, 2):
        for combo in itertools.combinations(singles, k):
            cand = base.with_edges(combo)
            if cand in seen:
                continue
            seen.add(cand)
            if validate(cand, GraphClass.ADMG):
                continue
            if mag_of(cand) == m:
                yield cand
