"""Identification of interventional kernels from ancestral and partial graphs.

The entry points are ``sidp`` (unconditional targets) and ``scidp``
(conditional targets).  Both emit either a symbolic estimand tree that an
oracle can evaluate against the observed kernel, or an explicit failure
value.  Around them sit the set computations they rely on (``l0_sets``,
``build_tree``, ``attach_kernel``), checkers for the three calculus rules
and the adjustment criterion, single-pair causal-relation criteria, and the
construction and verification of hedge witnesses for failed runs.

Estimand trees use six node kinds: Base (a c-factor Q[C]), Marginalize,
Condition, OrderedProduct, BoxProduct (the assembly product evaluated along
a fixed bucket order) and Compose (kernel composition over shared
variables).  They serialize to a small prefix expression language.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .graph import (
    ARROW,
    CIRCLE,
    GraphClass,
    OUTPUT,
    SELECTION,
    TAIL,
    Edge,
    MixedGraph,
    bucket_topological_order,
    buckets,
    pc_component_set,
    region,
    validate,
)
from .manipulate import (
    ManipulatedGraph,
    hard_manipulate,
    is_visible,
    manipulate,
    regime_id,
)
from .represent import canonical_isadmg, split_id, _witness_pool
from .separate import id_separated


def _plain(g) -> MixedGraph:
    return g.graph if isinstance(g, ManipulatedGraph) else g


def _graph_class(g: MixedGraph) -> GraphClass:
    """Class used for manipulations: ADMG when latent/selection nodes or
    parallel edges are present, PAG when circles are, MAG otherwise."""
    if g.latents or g.selections:
        return GraphClass.ADMG
    for e in g.edges:
        if CIRCLE in (e.mark_a, e.mark_b):
            return GraphClass.PAG
    if validate(g, GraphClass.MAG):
        return GraphClass.ADMG
    return GraphClass.MAG


def _check_sopag(p: MixedGraph):
    cls = _graph_class(p)
    if cls is GraphClass.ADMG:
        problems = validate(p, GraphClass.ADMG)
    else:
        problems = validate(p, cls)
    if problems:
        raise ValueError("invalid input graph: " + "; ".join(problems))


# -- estimand trees ----------------------------------------------------------


@dataclass(frozen=True)
class Base:
    """The c-factor Q[C]: the kernel of X_C given everything else fixed."""

    over: frozenset

    @property
    def outputs(self) -> frozenset:
        return self.over


@dataclass(frozen=True)
class Marginalize:
    child: object
    over: frozenset

    def __post_init__(self):
        if not self.over <= self.child.outputs:
            raise ValueError(
                f"marginalizing {sorted(self.over)} outside "
                f"{sorted(self.child.outputs)}"
            )

    @property
    def outputs(self) -> frozenset:
        return self.child.outputs - self.over


@dataclass(frozen=True)
class Condition:
    child: object
    on: tuple

    def __post_init__(self):
        if not set(self.on) <= self.child.outputs:
            raise ValueError(
                f"conditioning on {list(self.on)} outside "
                f"{sorted(self.child.outputs)}"
            )

    @property
    def outputs(self) -> frozenset:
        return self.child.outputs - set(self.on)


@dataclass(frozen=True)
class OrderedProduct:
    children: tuple

    @property
    def outputs(self) -> frozenset:
        out = frozenset()
        for c in self.children:
            out |= c.outputs
        return out


@dataclass(frozen=True)
class BoxProduct:
    """Assembly product of two kernels, evaluated as a product of
    conditional factors along the stored bucket order."""

    left: object
    right: object
    d: frozenset
    bucket_order: tuple

    @property
    def outputs(self) -> frozenset:
        return self.d


@dataclass(frozen=True)
class Compose:
    """Kernel composition: sum over the shared variables of the product of
    the outer and inner kernels."""

    outer: object
    inner: object
    over: tuple

    @property
    def outputs(self) -> frozenset:
        return self.outer.outputs


@dataclass(frozen=True)
class FailCertificate:
    """Witness of a stuck leaf: the leaf label C and the set T that could
    not be shrunk down to it, plus the buckets fixed before sticking."""

    C: frozenset
    T: frozenset
    trace: tuple = ()

    def __post_init__(self):
        if not self.C or not self.C < self.T:
            raise ValueError("certificate needs non-empty C strictly below T")

    def __str__(self):
        return (
            "FAIL C={" + ",".join(sorted(self.C)) + "}"
            " T={" + ",".join(sorted(self.T)) + "}"
        )


@dataclass(frozen=True)
class ExchangeFail:
    """Failure of the conditional-target exchange: the bucket slice that
    could not be moved, with the target sets at that point."""

    bucket: frozenset
    B: frozenset
    C: frozenset

    def __str__(self):
        return (
            "FAIL exchange bucket={" + ",".join(sorted(self.bucket)) + "}"
            " B={" + ",".join(sorted(self.B)) + "}"
            " C={" + ",".join(sorted(self.C)) + "}"
        )


@dataclass(frozen=True)
class AssemblyTree:
    label: frozenset
    left: object = None
    right: object = None

    def __post_init__(self):
        if not self.label:
            raise ValueError("empty tree label")
        if (self.left is None) != (self.right is None):
            raise ValueError("internal node needs two children")
        if self.left is not None:
            if self.left.label | self.right.label != self.label:
                raise ValueError("label is not the union of child labels")

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()


# -- set computations and the core algorithm ---------------------------------


def l0_sets(p, A, B):
    """Sets of the reduction step: D = possible anteriors of A avoiding B,
    Dtilde = inputs with such an anterior path, H = everything dropped."""
    p = _plain(p)
    A, B = frozenset(A), frozenset(B)
    V = set(p.outputs)
    I = set(p.inputs)
    if not A:
        raise ValueError("A must be non-empty")
    if A & B:
        raise ValueError(f"A and B overlap: {sorted(A & B)}")
    if not A <= V or not B <= V:
        raise ValueError("A and B must consist of output nodes")
    D = frozenset(p.induced(V - B).possible_anteriors(A))
    Dt = frozenset(
        i for i in I if i in p.induced((V - B) | {i}).possible_anteriors(A)
    )
    H = frozenset((V - (D | B)) | (I - Dt))
    return D, Dt, H


def build_tree(C, p, cls: GraphClass | None = None) -> AssemblyTree:
    """Recursive region decomposition of C within p: split off the region of
    an eligible bucket, decompose both parts, and join."""
    p = _plain(p)
    dv = (cls or _graph_class(p)) is GraphClass.ADMG
    C = frozenset(C)
    for bu in buckets(p, C):
        if frozenset(bu) == C:
            continue
        C1 = frozenset(region(p, C, bu, dv))
        if C1 == C:
            continue
        C2 = frozenset(region(p, C, C - C1, dv))
        if C2 == C:
            continue
        return AssemblyTree(
            label=C1 | C2,
            left=build_tree(C1, p, cls),
            right=build_tree(C2, p, cls),
        )
    return AssemblyTree(label=C)


def _fix_leaf(R, V, q, p, dv=False):
    """Iterated fixing of removable buckets, shrinking V down to the leaf
    label R; returns the estimand or a FailCertificate."""
    T = set(V)
    est = q
    trace = []
    while T != set(R):
        sub = p.induced(T)
        pick = None
        for bu in buckets(p, T):
            bset = set(bu)
            if not bset <= T - set(R):
                continue
            pode = sub.possible_descendants(bset)
            if pc_component_set(p, T, bset, dv) & pode <= bset:
                pick = bu
                break
        if pick is None:
            return FailCertificate(
                C=frozenset(R), T=frozenset(T), trace=tuple(trace)
            )
        dplus = frozenset(sub.possible_descendants(set(pick)))
        dminus = (frozenset(T) - dplus) | set(pick)
        est = OrderedProduct(
            (
                Condition(est, tuple(sorted(dminus))),
                Marginalize(est, dplus),
            )
        )
        trace.append(tuple(pick))
        T -= set(pick)
    return est


def attach_kernel(tree: AssemblyTree, V, q, p, cls: GraphClass | None = None) -> dict:
    """Estimand (or failure) for every node of the assembly tree, computed
    bottom-up: leaves by iterated fixing, internal nodes by the assembly
    product of their children."""
    p = _plain(p)
    dv = (cls or _graph_class(p)) is GraphClass.ADMG
    V = frozenset(V)
    out = {}

    def rec(node):
        if node.is_leaf:
            out[node] = _fix_leaf(node.label, V, q, p, dv)
            return
        rec(node.left)
        rec(node.right)
        l, r = out[node.left], out[node.right]
        for side in (l, r):
            if isinstance(side, FailCertificate):
                out[node] = side
                return
        order = tuple(
            tuple(bu) for bu in bucket_topological_order(p, node.label)
        )
        out[node] = BoxProduct(l, r, frozenset(node.label), order)

    rec(tree)
    return out


def sidp(p, A, B, cls: GraphClass | None = None):
    """Identification of the kernel of X_A under hard manipulation of X_B.
    Returns an estimand over A, or the FailCertificate of the first stuck
    leaf (left to right).  cls fixes how the graph is read; in particular,
    directed edges of a graph read as an ADMG carry no hidden-confounding
    ambiguity."""
    p = _plain(p)
    cls = cls or _graph_class(p)
    _check_sopag(p)
    A, B = frozenset(A), frozenset(B)
    V = frozenset(p.outputs)
    D, _dt, _h = l0_sets(p, A, B)
    tree = build_tree(D, p, cls)
    kmap = attach_kernel(tree, V, Base(V), p, cls)
    if isinstance(kmap[tree], FailCertificate):
        for leaf in tree.leaves():
            if isinstance(kmap[leaf], FailCertificate):
                return kmap[leaf]
    root = kmap[tree]
    if D == A:
        return root
    return Marginalize(root, D - A)


def scidp(p, A, B, C, cls: GraphClass | None = None):
    """Identification of the kernel of X_A given X_C under hard manipulation
    of X_B: move bucket slices of B into the conditioning set while the
    exchange rule allows it, move them back where the action-deletion rule
    allows it, then run sidp on what remains."""
    p = _plain(p)
    _check_sopag(p)
    A, B, C = frozenset(A), frozenset(B), frozenset(C)
    for x, y in itertools.combinations((A, B, C), 2):
        if x & y:
            raise ValueError(f"overlapping sets: {sorted(x & y)}")
    cls = cls or _graph_class(p)
    V = set(p.outputs)
    part = buckets(p, V)
    D = set(p.induced(V - B).possible_anteriors(A | C))
    Bc, Cc = set(B), set(C)

    while True:
        pick = None
        for bu in part:
            bset = set(bu)
            if bset & D and not bset <= D and bset & Bc:
                pick = bset
                break
        if pick is None:
            break
        Bt = pick & Bc
        mg = manipulate(p, sorted(Bt), sorted(Bc - Bt), cls)
        regimes = [regime_id(v) for v in sorted(Bt)]
        if not id_separated(mg, sorted(A), regimes, sorted(Bc | Cc)):
            return ExchangeFail(
                bucket=frozenset(Bt), B=frozenset(Bc), C=frozenset(Cc)
            )
        Bc -= Bt
        Cc |= Bt
        D = set(p.induced(V - Bc).possible_anteriors(A | Cc))

    while True:
        pick = None
        for bu in part:
            Ci = set(bu) & Cc
            if not Ci:
                continue
            mg = manipulate(p, sorted(Ci), sorted(Bc), cls)
            regimes = [regime_id(v) for v in sorted(Ci)]
            if id_separated(mg, sorted(A), regimes, sorted(Bc | Cc)):
                pick = Ci
                break
        if pick is None:
            break
        Bc |= pick
        Cc -= pick

    res = sidp(p, A | Cc, frozenset(Bc), cls)
    if isinstance(res, FailCertificate) or not Cc:
        return res
    return Condition(res, tuple(sorted(Cc)))


# -- calculus, adjustment, causal relations ----------------------------------


def _disjoint(*sets):
    for x, y in itertools.combinations(sets, 2):
        if x & y:
            raise ValueError(f"overlapping sets: {sorted(x & y)}")


def calculus_check(g, rule: int, A, B, C=(), D=(), cls=None) -> bool:
    """Whether a calculus rule applies: 1 inserts/deletes observations of B,
    2 exchanges actions on B with observations, 3 inserts/deletes actions
    on B; all relative to conditioning on C under hard manipulation of D."""
    g = _plain(g)
    A, B, C, D = (frozenset(s) for s in (A, B, C, D))
    _disjoint(A, B, C, D)
    if not A or not B:
        raise ValueError("A and B must be non-empty")
    cls = cls or _graph_class(g)
    if rule == 1:
        mg = manipulate(g, (), sorted(D), cls)
        return id_separated(mg, sorted(A), sorted(B), sorted(C | D))
    if rule in (2, 3):
        mg = manipulate(g, sorted(B), sorted(D), cls)
        regimes = [regime_id(v) for v in sorted(B)]
        cond = B | C | D if rule == 2 else C | D
        return id_separated(mg, sorted(A), regimes, sorted(cond))
    raise ValueError(f"unknown rule {rule!r}")


def adjustment_check(g, A, B, C=(), D=(), J0=(), J1=(), H=(), cls=None):
    """General adjustment: check the three premises under soft manipulation
    of B and hard manipulation of D.  On success also return the adjustment
    estimand, summing the kernel of A given B, C and the adjustment set J
    against the kernel of J given C."""
    g = _plain(g)
    A, B, C, D, J0, J1, H = (frozenset(s) for s in (A, B, C, D, J0, J1, H))
    _disjoint(A, B, C, D, J0, J1, H)
    if not A or not B:
        raise ValueError("A and B must be non-empty")
    cls = cls or _graph_class(g)
    J = J0 | J1
    mg = manipulate(g, sorted(B), sorted(D), cls)
    regimes = [regime_id(v) for v in sorted(B)]
    ok = (
        id_separated(mg, sorted(J0 | H), regimes, sorted(C | D))
        and id_separated(
            mg, sorted(A), sorted(J1) + regimes, sorted(B | C | D | J0 | H)
        )
        and id_separated(mg, sorted(H), sorted(B), sorted(set(regimes) | C | D | J))
    )
    if not ok:
        return False, None
    W = frozenset(set(g.outputs) - D)
    base = Base(W)
    outer = Condition(
        Marginalize(base, W - (A | B | C | J)), tuple(sorted(B | C | J))
    )
    if not J:
        return True, outer
    inner = Condition(Marginalize(base, W - (C | J)), tuple(sorted(C)))
    return True, Compose(outer, inner, tuple(sorted(J)))


ALL_NO = "AllNo"
SOME_YES = "SomeYes"


def causal_relation(g, a: str, b: str, kind: str, cls=None) -> str:
    """Whether a single-pair causal relation is absent in every represented
    graph (AllNo) or present in at least one (SomeYes)."""
    g = _plain(g)
    if a == b:
        raise ValueError("need two distinct nodes")
    for v in (a, b):
        if not g.has_node(v):
            raise KeyError(v)
    cls = cls or _graph_class(g)
    if kind == "sel_ancestor":
        arrow = any(ma is ARROW for _, ma, _, _ in g.edges_at(a))
        return ALL_NO if arrow else SOME_YES
    if kind == "direct":
        rest = set(g.outputs) - {a, b}
        mg = manipulate(g, [a], sorted(rest), cls)
        sep = id_separated(mg, [b], [regime_id(a)], sorted(rest))
    elif kind == "total":
        mg = manipulate(g, [a], (), cls)
        sep = id_separated(mg, [b], [regime_id(a)], ())
    elif kind == "confounding":
        mg = manipulate(g, [a], (), cls)
        sep = id_separated(mg, [b], [regime_id(a)], [a])
    else:
        raise ValueError(f"unknown relation kind {kind!r}")
    return ALL_NO if sep else SOME_YES


def s_recoverability_check(g, A, B, cls=None) -> bool:
    """Whether the unselected interventional kernel is recoverable: the
    selected one must be identifiable and A must be id-separated, given B,
    from the arrowhead-free nodes after hard manipulation of B."""
    g = _plain(g)
    A, B = frozenset(A), frozenset(B)
    cls = cls or _graph_class(g)
    if isinstance(sidp(g, A, B, cls), FailCertificate):
        return False
    free = [
        v
        for v in g.outputs
        if all(mv is not ARROW for _, mv, _, _ in g.edges_at(v))
    ]
    mg = hard_manipulate(g, sorted(B), cls)
    return id_separated(mg, sorted(A), free, sorted(B))


# -- hedges ------------------------------------------------------------------


@dataclass(frozen=True)
class Hedge:
    H: frozenset
    Hprime: frozenset
    R: frozenset
    forest_edges: tuple = ()
    forest_prime_edges: tuple = ()


def _as_output_graph(g: MixedGraph) -> MixedGraph:
    """Selection nodes recast as outputs, so they can be manipulated and
    conditioned on like ordinary nodes."""
    sel = {s: OUTPUT for s in g.selections}
    return g.relabel_kinds(sel) if sel else g


def _is_cforest(g: MixedGraph, nodes, edges, R) -> bool:
    nodes = set(nodes)
    R = set(R)
    if not nodes or not R <= nodes:
        return False
    children = {v: 0 for v in nodes}
    bi_adj = {v: set() for v in nodes}
    for e in edges:
        if e not in g.edges or not {e.a, e.b} <= nodes:
            return False
        if e.mark_a is ARROW and e.mark_b is ARROW:
            bi_adj[e.a].add(e.b)
            bi_adj[e.b].add(e.a)
        elif TAIL in (e.mark_a, e.mark_b) and ARROW in (e.mark_a, e.mark_b):
            tail = e.a if e.mark_a is TAIL else e.b
            children[tail] += 1
        else:
            return False
    if any(children[v] > 1 for v in nodes):
        return False
    if any(children[r] != 0 for r in R):
        return False
    if any(children[v] == 0 for v in nodes - R):
        return False
    # single district via the kept bidirected edges
    seen = {min(nodes)}
    frontier = [min(nodes)]
    while frontier:
        v = frontier.pop()
        for w in bi_adj[v]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    if seen != nodes:
        return False
    # every node reaches R along the kept directed edges
    dir_child = {}
    for e in edges:
        if TAIL in (e.mark_a, e.mark_b) and ARROW in (e.mark_a, e.mark_b):
            tail = e.a if e.mark_a is TAIL else e.b
            dir_child[tail] = e.other(tail)
    for v in nodes:
        cur, hops = v, 0
        while cur not in R:
            if cur not in dir_child or hops > len(nodes):
                return False
            cur = dir_child[cur]
            hops += 1
    return True


def verify_hedge(g, A, B, h: Hedge) -> bool:
    """Structural check of a hedge for (A, B) in the graph g: nested node
    sets meeting/missing B, both kept edge sets forming forests rooted at R,
    and R ancestral to A once B is hard-manipulated."""
    g = _plain(g)
    A, B = set(A), set(B)
    if not h.Hprime <= h.H or not h.R <= h.Hprime:
        return False
    if not h.H & B or h.Hprime & B:
        return False
    if not h.H <= set(g.node_ids):
        return False
    if not _is_cforest(g, h.H, h.forest_edges, h.R):
        return False
    if not _is_cforest(g, h.Hprime, h.forest_prime_edges, h.R):
        return False
    go = _as_output_graph(g)
    mg = hard_manipulate(go, sorted(B & set(go.node_ids)), GraphClass.ADMG)
    return h.R <= mg.graph.ancestors(A)


def _forest_edges(g: MixedGraph, nodes, R):
    """A forest edge selection on the node set: all bidirected edges plus
    one directed edge per non-root, aimed at the smallest child."""
    nodes = set(nodes)
    edges = []
    for e in sorted(g.edges, key=lambda e: e.sort_key()):
        if not {e.a, e.b} <= nodes:
            continue
        if e.mark_a is ARROW and e.mark_b is ARROW:
            edges.append(e)
    for v in sorted(nodes - set(R)):
        best = None
        for w, mv, mw, e in g.edges_at(v):
            if mv is TAIL and mw is ARROW and w in nodes:
                if best is None or w < best.other(v):
                    best = e
        if best is None:
            return None
        edges.append(best)
    return tuple(edges)


def _find_hedge(wit: MixedGraph, A, B):
    """Exhaustive search for a hedge for (A, B) among subsets of the output
    nodes of the witness graph."""
    go = _as_output_graph(wit)
    A = set(A) & set(go.node_ids)
    B = set(B) & set(go.node_ids)
    mg = hard_manipulate(go, sorted(B), GraphClass.ADMG)
    anc = mg.graph.ancestors(A)
    pool = sorted(set(wit.outputs))
    for hsize in range(2, len(pool) + 1):
        for H in itertools.combinations(pool, hsize):
            hset = set(H)
            if not hset & B:
                continue
            sub = go.induced(hset)
            sinks = {
                v
                for v in hset
                if not any(
                    mv is TAIL and mw is ARROW
                    for _, mv, mw, _ in sub.edges_at(v)
                )
            }
            for psize in range(1, hsize):
                for Hp in itertools.combinations(sorted(hset), psize):
                    pset = set(Hp)
                    if pset & B:
                        continue
                    psub = go.induced(pset)
                    R = {
                        v
                        for v in pset
                        if not any(
                            mv is TAIL and mw is ARROW
                            for _, mv, mw, _ in psub.edges_at(v)
                        )
                    }
                    if not R or not R <= anc or not sinks <= R:
                        continue
                    fe = _forest_edges(go, hset, R)
                    fpe = _forest_edges(go, pset, R)
                    if fe is None or fpe is None:
                        continue
                    h = Hedge(
                        H=frozenset(hset),
                        Hprime=frozenset(pset),
                        R=frozenset(R),
                        forest_edges=fe,
                        forest_prime_edges=fpe,
                    )
                    if verify_hedge(wit, A, B, h):
                        return h
    return None


def _anterior_violation(p: MixedGraph, A, B):
    """A proper potentially anterior path from B to A whose first edge is
    not a visible directed edge, as a node list; None if all such paths
    start with visible directed edges."""
    A, B = set(A), set(B)
    for b in sorted(B):
        starts = []
        for w, mb, mw, e in p.edges_at(b):
            if mb is ARROW or w in B:
                continue
            if mb is TAIL and mw is ARROW and is_visible(p, b, w):
                continue
            starts.append((w, e))
        parent = {}
        queue = []
        for w, e in starts:
            if w not in parent:
                parent[w] = (b, e)
                queue.append(w)
        i = 0
        while i < len(queue):
            v = queue[i]
            i += 1
            if v in A:
                path = [v]
                while path[-1] != b:
                    path.append(parent[path[-1]][0])
                return list(reversed(path))
            for w, mv, _mw, e in p.edges_at(v):
                if mv is ARROW or w in B or w == b or w in parent:
                    continue
                parent[w] = (v, e)
                queue.append(w)
    return None


def _orient_copag(p: MixedGraph, protect=()):
    """A maximal ancestral orientation of the circle marks: partially
    oriented edges become directed or undirected by their one fixed mark,
    and plain circle components become a source-first acyclic order that
    adds no arrowheads at the protected nodes."""
    protect = list(protect)
    fixed = []
    circle_pairs = []
    for e in p.edges:
        ma, mb = e.mark_a, e.mark_b
        if CIRCLE not in (ma, mb):
            fixed.append(e)
        elif ARROW in (ma, mb):
            # one arrowhead: the circle end becomes a tail
            fixed.append(
                Edge(
                    e.a,
                    TAIL if ma is CIRCLE else ma,
                    e.b,
                    TAIL if mb is CIRCLE else mb,
                )
            )
        elif TAIL in (ma, mb):
            fixed.append(Edge(e.a, TAIL, e.b, TAIL))
        else:
            circle_pairs.append(e)

    head_at = {v: False for v in p.node_ids}
    for e in p.edges:
        for v in (e.a, e.b):
            if e.mark_at(v) is ARROW:
                head_at[v] = True
    plain = [
        e for e in circle_pairs if not head_at[e.a] and not head_at[e.b]
    ]
    rest = [e for e in circle_pairs if e not in plain]
    fixed.extend(Edge(e.a, TAIL, e.b, TAIL) for e in plain)

    # orient the remaining circle components by a maximum-cardinality
    # search started at a protected node: edges point from earlier to
    # later in the visit order, which avoids new unshielded colliders
    adj = {}
    for e in rest:
        adj.setdefault(e.a, set()).add(e.b)
        adj.setdefault(e.b, set()).add(e.a)
    order = {}
    unvisited = set(adj)
    weight = {v: 0 for v in adj}
    rank = 0
    while unvisited:
        cand = [v for v in protect if v in unvisited]
        if cand:
            v = cand[0]
        else:
            top = max(weight[v] for v in unvisited)
            v = min(u for u in unvisited if weight[u] == top)
        order[v] = rank
        rank += 1
        unvisited.discard(v)
        for w in adj[v]:
            if w in unvisited:
                weight[w] += 1
    for e in rest:
        x, y = (e.a, e.b) if order[e.a] < order[e.b] else (e.b, e.a)
        fixed.append(Edge(x, TAIL, y, ARROW))
    m = MixedGraph(p.nodes, fixed)
    if validate(m, GraphClass.MAG):
        raise ValueError("could not orient the graph into a valid MAG")
    return m


def _direct_witness(m: MixedGraph, path):
    """Represented graph in which the first edge of the path gains a
    parallel bidirected edge, path-borne undirected edges become directed
    along the path, and every undirected edge keeps a split selection
    child."""
    forward = {(path[i], path[i + 1]) for i in range(len(path) - 1)}
    nodes = {v: m.kind(v) for v in m.node_ids}
    edges = []
    for e in m.edges:
        if e.mark_a is TAIL and e.mark_b is TAIL:
            s = split_id(e.a, e.b)
            if s in nodes:
                raise ValueError(f"node id {s} collides")
            nodes[s] = SELECTION
            edges.append(Edge(e.a, TAIL, s, ARROW))
            edges.append(Edge(e.b, TAIL, s, ARROW))
            for x, y in ((e.a, e.b), (e.b, e.a)):
                if (x, y) in forward:
                    edges.append(Edge(x, TAIL, y, ARROW))
        else:
            edges.append(e)
    edges.append(Edge(path[0], ARROW, path[1], ARROW))
    wit = MixedGraph(nodes, edges)
    if validate(wit, GraphClass.ADMG):
        raise ValueError("path witness is not a valid represented graph")
    return wit


def maximal_regime_separated(wit: MixedGraph, A, B):
    """The largest subset D of the selection nodes whose regime indicators
    are id-separated from A given B and all selection nodes, after soft
    manipulation of D and hard manipulation of B."""
    go = _as_output_graph(wit)
    S = sorted(wit.selections)
    A, B = sorted(set(A)), sorted(set(B))
    cond = sorted(set(B) | set(S))
    for size in range(len(S), 0, -1):
        for D in itertools.combinations(S, size):
            mg = manipulate(go, list(D), B, GraphClass.ADMG)
            regimes = [regime_id(v) for v in D]
            if id_separated(mg, A, regimes, cond):
                return frozenset(D)
    return frozenset()


def hedge_witness(p, A, B, cert):
    """Hedge construction for a failed identification: a MAG represented by
    the input graph, a represented graph of that MAG, and a hedge in it for
    the target pair extended by the non-separated selection nodes."""
    p = _plain(p)
    if not isinstance(cert, FailCertificate):
        raise ValueError("hedge witness needs a failure certificate")
    A, B = frozenset(A), frozenset(B)
    V = set(p.outputs)
    if not (cert.C <= cert.T <= V):
        raise ValueError("certificate does not match the graph")
    has_circles = any(
        CIRCLE in (e.mark_a, e.mark_b) for e in p.edges
    )
    viol = _anterior_violation(p, A, B)
    direct = None
    if viol is not None:
        mag = p if not has_circles else _orient_copag(p, protect=[viol[0]])
        path = viol if not has_circles else _anterior_violation(mag, A, B)
        if path is not None:
            wit = _direct_witness(mag, path)
            v0, v1 = path[0], path[1]
            direct = (
                mag,
                wit,
                Hedge(
                    H=frozenset((v0, v1)),
                    Hprime=frozenset((v1,)),
                    R=frozenset((v1,)),
                    forest_edges=(
                        Edge(v0, TAIL, v1, ARROW),
                        Edge(v0, ARROW, v1, ARROW),
                    ),
                    forest_prime_edges=(),
                ),
            )
    if direct is not None:
        mag, wit, h = direct
        D = maximal_regime_separated(wit, A, B)
        Ap = A | (set(wit.selections) - D)
        Bp = B | D
        if verify_hedge(wit, Ap, Bp, h):
            return mag, wit, h
        found = _find_hedge(wit, Ap, Bp)
        if found is not None:
            return mag, wit, found
        raise ValueError("constructed witness admits no verifiable hedge")

    mag = p if not has_circles else _orient_copag(p)
    for wit in itertools.chain([canonical_isadmg(mag)], _witness_pool(mag)):
        D = maximal_regime_separated(wit, A, B)
        Ap = A | (set(wit.selections) - D)
        Bp = B | D
        found = _find_hedge(wit, Ap, Bp)
        if found is not None:
            return mag, wit, found
    raise ValueError("no verifiable hedge found for the certificate")


# -- serialization -----------------------------------------------------------


def _names(xs) -> str:
    return "(" + " ".join(sorted(xs)) + ")"


def format_estimand(e) -> str:
    if isinstance(e, Base):
        return f"(Q {_names(e.over)})"
    if isinstance(e, Marginalize):
        return f"(marg {_names(e.over)} {format_estimand(e.child)})"
    if isinstance(e, Condition):
        return f"(cond {_names(e.on)} {format_estimand(e.child)})"
    if isinstance(e, OrderedProduct):
        inner = " ".join(format_estimand(c) for c in e.children)
        return f"(prod {inner})"
    if isinstance(e, BoxProduct):
        order = " ".join("(" + " ".join(bu) + ")" for bu in e.bucket_order)
        return (
            f"(box ({order}) {format_estimand(e.left)}"
            f" {format_estimand(e.right)})"
        )
    if isinstance(e, Compose):
        return (
            f"(compose {_names(e.over)} {format_estimand(e.outer)}"
            f" {format_estimand(e.inner)})"
        )
    if isinstance(e, (FailCertificate, ExchangeFail)):
        return str(e)
    raise ValueError(f"not an estimand: {e!r}")


def _tokenize(text: str):
    return text.replace("(", " ( ").replace(")", " ) ").split()


class _Reader:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.tokens):
            raise ValueError("unexpected end of expression")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, tok: str):
        got = self.next()
        if got != tok:
            raise ValueError(f"expected {tok!r}, got {got!r}")

    def names(self) -> tuple:
        self.expect("(")
        out = []
        while True:
            tok = self.next()
            if tok == ")":
                return tuple(out)
            if tok == "(":
                raise ValueError("unexpected nested list")
            out.append(tok)


def _parse_node(r: _Reader):
    r.expect("(")
    head = r.next()
    if head == "Q":
        node = Base(frozenset(r.names()))
    elif head == "marg":
        over = r.names()
        node = Marginalize(_parse_node(r), frozenset(over))
    elif head == "cond":
        on = r.names()
        node = Condition(_parse_node(r), tuple(sorted(on)))
    elif head == "prod":
        children = []
        while r.tokens[r.pos] != ")":
            children.append(_parse_node(r))
        node = OrderedProduct(tuple(children))
    elif head == "box":
        r.expect("(")
        order = []
        while r.tokens[r.pos] == "(":
            order.append(r.names())
        r.expect(")")
        left = _parse_node(r)
        right = _parse_node(r)
        node = BoxProduct(
            left, right, left.outputs | right.outputs, tuple(order)
        )
    elif head == "compose":
        over = r.names()
        outer = _parse_node(r)
        inner = _parse_node(r)
        node = Compose(outer, inner, tuple(sorted(over)))
    else:
        raise ValueError(f"unknown estimand head {head!r}")
    r.expect(")")
    return node


def parse_estimand(text: str):
    text = text.strip()
    if text.startswith("FAIL"):
        return parse_certificate(text)
    r = _Reader(_tokenize(text))
    node = _parse_node(r)
    if r.pos != len(r.tokens):
        raise ValueError("trailing tokens after expression")
    return node


def parse_certificate(text: str) -> FailCertificate:
    parts = text.split()
    if len(parts) != 3 or parts[0] != "FAIL":
        raise ValueError(f"not a failure certificate: {text!r}")
    sets = {}
    for part in parts[1:]:
        name, _, body = part.partition("=")
        if name not in ("C", "T") or not body.startswith("{"):
            raise ValueError(f"bad certificate field {part!r}")
        inner = body.strip("{}")
        sets[name] = frozenset(x for x in inner.split(",") if x)
    return FailCertificate(C=sets["C"], T=sets["T"])
