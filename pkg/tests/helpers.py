"""Shared test utilities: random graph generation and slow reference
implementations used as independent oracles for the fast library code."""

import random

from pagid.graph import (
    ARROW,
    CIRCLE,
    TAIL,
    Edge,
    GraphClass,
    INPUT,
    LATENT,
    Mark,
    MixedGraph,
    OUTPUT,
    SELECTION,
    validate,
)

MARKS = (TAIL, ARROW, CIRCLE)


def rand_mixed_graph(rng: random.Random, n=5, p=0.5, marks=MARKS, kinds=None):
    """Random raw mixed graph; single edge per pair, arbitrary marks."""
    names = [f"v{i}" for i in range(n)]
    nodes = {v: (kinds[i] if kinds else OUTPUT) for i, v in enumerate(names)}
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append(
                    Edge(names[i], rng.choice(marks), names[j], rng.choice(marks))
                )
    return MixedGraph(nodes, edges)


def rand_isadmg(rng: random.Random, n_out=4, n_sel=1, n_lat=0, n_in=0, p=0.5):
    """Random isADMG: directed part acyclic by construction (edges go up in
    node order), plus random bidirected edges; inputs have out-edges only;
    selection nodes are childless sinks."""
    outs = [f"v{i}" for i in range(n_out)]
    lats = [f"l{i}" for i in range(n_lat)]
    sels = [f"s{i}" for i in range(n_sel)]
    ins = [f"i{i}" for i in range(n_in)]
    nodes = {v: OUTPUT for v in outs}
    nodes.update({v: LATENT for v in lats})
    nodes.update({v: SELECTION for v in sels})
    nodes.update({v: INPUT for v in ins})
    # topological order: inputs, then outputs/latents shuffled, then selection
    mid = outs + lats
    rng.shuffle(mid)
    order = ins + mid + sels
    edges = []
    for i, x in enumerate(order):
        for y in order[i + 1:]:
            if x in ins and y in ins:
                continue
            if rng.random() >= p:
                continue
            if x in ins or y in sels:
                edges.append(Edge(x, TAIL, y, ARROW))
            elif rng.random() < 0.3:
                edges.append(Edge(x, ARROW, y, ARROW))
            else:
                edges.append(Edge(x, TAIL, y, ARROW))
    g = MixedGraph(nodes, edges)
    assert validate(g, GraphClass.ADMG) == []
    return g


def all_simple_paths(g: MixedGraph, a, b, max_len=None):
    """All simple paths from a to b as edge lists (parallel edges distinct)."""
    out = []

    def dfs(v, used_nodes, path):
        if max_len is not None and len(path) > max_len:
            return
        if v == b:
            out.append(list(path))
            return
        for w, _mv, _mw, e in g.edges_at(v):
            if w in used_nodes:
                continue
            used_nodes.add(w)
            path.append(e)
            dfs(w, used_nodes, path)
            path.pop()
            used_nodes.remove(w)

    dfs(a, {a}, [])
    return out


def path_nodes(a, edges):
    """Node sequence of a path starting at a."""
    seq = [a]
    for e in edges:
        seq.append(e.other(seq[-1]))
    return seq


def inducing_path_oracle(g: MixedGraph, a, b, L, S):
    """Reference check by explicit simple-path enumeration."""
    anc = g.ancestors({a, b} | set(S))
    for path in all_simple_paths(g, a, b):
        seq = path_nodes(a, path)
        ok = True
        for i in range(1, len(seq) - 1):
            v = seq[i]
            m_in = path[i - 1].mark_at(v)
            m_out = path[i].mark_at(v)
            collider = m_in is ARROW and m_out is ARROW
            if collider:
                if v not in anc:
                    ok = False
                    break
            elif v not in set(L):
                ok = False
                break
        if ok:
            return True
    return False


def closure_oracle(g: MixedGraph, X, edge_ok):
    """Reflexive closure of X under paths whose every edge (near mark, far
    mark) satisfies edge_ok, walking backwards from X."""
    result = set(X)
    changed = True
    while changed:
        changed = False
        for e in g.edges:
            for u, w in ((e.a, e.b), (e.b, e.a)):
                if w in result and u not in result:
                    if edge_ok(e.mark_at(u), e.mark_at(w)):
                        result.add(u)
                        changed = True
    return result


def possible_ancestors_oracle(g, X):
    return closure_oracle(
        g, X, lambda mu, mw: mu is not ARROW and mw is not TAIL
    )


def possible_anteriors_oracle(g, X):
    return closure_oracle(g, X, lambda mu, mw: mu is not ARROW)


def anteriors_oracle(g, X):
    return closure_oracle(
        g, X, lambda mu, mw: mu is TAIL and mw in (TAIL, ARROW)
    )


def kernel_matches(got, want):
    """Whether got equals want after discarding context variables that got
    carries but want does not (got must then not depend on them)."""
    if set(want.context) - set(got.context):
        return False
    if set(got.outputs) != set(want.outputs):
        return False
    names = got.context + got.outputs
    from pagid.oracle import _assignments

    for ctx in _assignments(got.domains, got.context):
        for out in _assignments(got.domains, got.outputs):
            a = dict(zip(names, ctx + out))
            if got.value(a) != want.value(a):
                return False
    return True


def fixing_identifiable(g, S):
    """Independent check that the factor of S is reachable by iterated
    fixing in the directed-mixed graph g: repeatedly remove a node outside
    S that is its own district-descendant intersection."""
    T = set(g.node_ids)
    S = set(S)
    while T > S:
        sub = g.induced(T)
        fixed = False
        for v in sorted(T - S):
            dis = district_of(sub, v)
            if dis & sub.descendants({v}) == {v}:
                T.remove(v)
                fixed = True
                break
        if not fixed:
            return False
    return True


def district_of(g, v):
    """Connected component of v over bidirected edges."""
    seen = {v}
    frontier = [v]
    while frontier:
        u = frontier.pop()
        for w, mu, mw, _e in g.edges_at(u):
            if mu is ARROW and mw is ARROW and w not in seen:
                seen.add(w)
                frontier.append(w)
    return seen
