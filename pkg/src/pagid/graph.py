"""Mixed-graph data model: nodes with kinds, edges with per-endpoint marks,
and the structural queries everything else is built on (reachability closures,
buckets, pc-components, regions, inducing paths, discriminating paths)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Mark(Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


class NodeKind(Enum):
    INPUT = "input"
    OUTPUT = "output"
    LATENT = "latent"
    SELECTION = "selection"


TAIL, ARROW, CIRCLE = Mark.TAIL, Mark.ARROW, Mark.CIRCLE
INPUT, OUTPUT, LATENT, SELECTION = (
    NodeKind.INPUT,
    NodeKind.OUTPUT,
    NodeKind.LATENT,
    NodeKind.SELECTION,
)


@dataclass(frozen=True)
class Edge:
    """Edge with one mark per endpoint, stored with a <= b lexicographically."""

    a: str
    mark_a: Mark = None  # type: ignore[assignment]
    b: str = ""
    mark_b: Mark = None  # type: ignore[assignment]

    def sort_key(self):
        return (self.a, self.b, self.mark_a.value, self.mark_b.value)

    def __lt__(self, other: "Edge"):
        return self.sort_key() < other.sort_key()

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self loop at {self.a}")
        if self.a > self.b:
            a, ma, b, mb = self.a, self.mark_a, self.b, self.mark_b
            object.__setattr__(self, "a", b)
            object.__setattr__(self, "mark_a", mb)
            object.__setattr__(self, "b", a)
            object.__setattr__(self, "mark_b", ma)

    def mark_at(self, v: str) -> Mark:
        if v == self.a:
            return self.mark_a
        if v == self.b:
            return self.mark_b
        raise KeyError(v)

    def other(self, v: str) -> str:
        if v == self.a:
            return self.b
        if v == self.b:
            return self.a
        raise KeyError(v)

    def pair(self) -> tuple[str, str]:
        return (self.a, self.b)


def edge(x: str, mx: Mark, y: str, my: Mark) -> Edge:
    return Edge(x, mx, y, my)


def directed(x: str, y: str) -> Edge:
    """x --> y"""
    return Edge(x, TAIL, y, ARROW)


def bidirected(x: str, y: str) -> Edge:
    return Edge(x, ARROW, y, ARROW)


def undirected(x: str, y: str) -> Edge:
    return Edge(x, TAIL, y, TAIL)


class GraphClass(Enum):
    RAW = "raw"
    ADMG = "admg"
    MAG = "mag"
    PAG = "pag"


class MixedGraph:
    """Immutable mixed graph. Raw/ADMG graphs may carry parallel edges between
    a pair (e.g. both a --> b and a <-> b); MAG/PAG validation rejects that."""

    __slots__ = ("_nodes", "_edges", "_adj", "_eat", "_anc", "_hash")

    def __init__(self, nodes: dict[str, NodeKind], edges=()):
        self._nodes = dict(sorted(nodes.items()))
        es = set()
        for e in edges:
            if e.a not in self._nodes or e.b not in self._nodes:
                raise ValueError(f"edge {e} references unknown node")
            es.add(e)
        self._edges = frozenset(es)
        adj: dict[str, dict[str, list[Edge]]] = {v: {} for v in self._nodes}
        for e in self._edges:
            adj[e.a].setdefault(e.b, []).append(e)
            adj[e.b].setdefault(e.a, []).append(e)
        for v in adj:
            for w in adj[v]:
                adj[v][w].sort()
        self._adj = adj
        self._eat: dict[str, tuple] = {}
        self._anc: dict[str, frozenset[str]] = {}
        self._hash = None

    # -- basic accessors ---------------------------------------------------

    @property
    def nodes(self) -> dict[str, NodeKind]:
        return dict(self._nodes)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    def kind(self, v: str) -> NodeKind:
        return self._nodes[v]

    def has_node(self, v: str) -> bool:
        return v in self._nodes

    def of_kind(self, kind: NodeKind) -> tuple[str, ...]:
        return tuple(v for v, k in self._nodes.items() if k is kind)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self.of_kind(INPUT)

    @property
    def outputs(self) -> tuple[str, ...]:
        return self.of_kind(OUTPUT)

    @property
    def latents(self) -> tuple[str, ...]:
        return self.of_kind(LATENT)

    @property
    def selections(self) -> tuple[str, ...]:
        return self.of_kind(SELECTION)

    def adjacent(self, v: str, w: str) -> bool:
        return w in self._adj.get(v, {})

    def neighbors(self, v: str) -> tuple[str, ...]:
        return tuple(sorted(self._adj[v]))

    def edges_between(self, v: str, w: str) -> tuple[Edge, ...]:
        return tuple(self._adj.get(v, {}).get(w, ()))

    def edges_at(self, v: str):
        """All (other, mark_at_v, mark_at_other, edge) incident to v, sorted."""
        cached = self._eat.get(v)
        if cached is None:
            out = []
            for w in sorted(self._adj[v]):
                for e in self._adj[v][w]:
                    out.append((w, e.mark_at(v), e.mark_at(w), e))
            cached = self._eat[v] = tuple(out)
        return cached

    def parents(self, v: str) -> set[str]:
        """u with u --> v (tail at u, arrowhead at v)."""
        return {
            w
            for w, mv, mw, _ in self.edges_at(v)
            if mv is ARROW and mw is TAIL
        }

    def children(self, v: str) -> set[str]:
        return {
            w
            for w, mv, mw, _ in self.edges_at(v)
            if mv is TAIL and mw is ARROW
        }

    def spouses(self, v: str) -> set[str]:
        """u with u <-> v."""
        return {
            w
            for w, mv, mw, _ in self.edges_at(v)
            if mv is ARROW and mw is ARROW
        }

    def undirected_neighbors(self, v: str) -> set[str]:
        return {
            w for w, mv, mw, _ in self.edges_at(v) if mv is TAIL and mw is TAIL
        }

    # -- structural edits (return new graphs) ------------------------------

    def with_edges(self, extra) -> "MixedGraph":
        return MixedGraph(self._nodes, set(self._edges) | set(extra))

    def without_edges(self, gone) -> "MixedGraph":
        return MixedGraph(self._nodes, set(self._edges) - set(gone))

    def with_nodes(self, extra: dict[str, NodeKind]) -> "MixedGraph":
        nodes = dict(self._nodes)
        nodes.update(extra)
        return MixedGraph(nodes, self._edges)

    def relabel_kinds(self, kinds: dict[str, NodeKind]) -> "MixedGraph":
        nodes = dict(self._nodes)
        for v, k in kinds.items():
            if v not in nodes:
                raise KeyError(v)
            nodes[v] = k
        return MixedGraph(nodes, self._edges)

    def induced(self, keep) -> "MixedGraph":
        keep = set(keep)
        unknown = keep - set(self._nodes)
        if unknown:
            raise KeyError(f"unknown nodes {sorted(unknown)}")
        nodes = {v: k for v, k in self._nodes.items() if v in keep}
        edges = {e for e in self._edges if e.a in keep and e.b in keep}
        return MixedGraph(nodes, edges)

    def without_nodes(self, drop) -> "MixedGraph":
        return self.induced(set(self._nodes) - set(drop))

    # -- equality ----------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, MixedGraph)
            and self._nodes == other._nodes
            and self._edges == other._edges
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(self._nodes.items()), self._edges))
        return self._hash

    def __repr__(self):
        return f"MixedGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"

    # -- reachability closures ---------------------------------------------

    def _closure(self, X, step) -> set[str]:
        for v in X:
            if v not in self._nodes:
                raise KeyError(v)
        seen = set(X)
        frontier = list(X)
        while frontier:
            v = frontier.pop()
            for w in step(v):
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
        return seen

    def ancestors(self, X) -> set[str]:
        """Reflexive-transitive closure along directed edges into X."""
        out = set()
        for v in X:
            cached = self._anc.get(v)
            if cached is None:
                cached = frozenset(self._closure((v,), self.parents))
                self._anc[v] = cached
            out |= cached
        return out

    def descendants(self, X) -> set[str]:
        return self._closure(X, self.children)

    def anteriors(self, X) -> set[str]:
        """u anterior to X: path of --> / --- edges from u into X."""

        def preds(w):
            return {
                u
                for u, mw, mu, _ in self.edges_at(w)
                if mu is TAIL and mw in (TAIL, ARROW)
            }

        return self._closure(X, preds)

    def possible_ancestors(self, X) -> set[str]:
        """Closure along potentially directed paths into X: each edge has no
        arrowhead at the near end and no tail at the far end."""

        def preds(w):
            return {
                u
                for u, mw, mu, _ in self.edges_at(w)
                if mu is not ARROW and mw is not TAIL
            }

        return self._closure(X, preds)

    def possible_anteriors(self, X) -> set[str]:
        """Closure along potentially anterior paths into X: each edge merely
        has no arrowhead at the near end."""

        def preds(w):
            return {u for u, _mw, mu, _ in self.edges_at(w) if mu is not ARROW}

        return self._closure(X, preds)

    def possible_descendants(self, X) -> set[str]:
        def succs(u):
            return {
                w
                for w, mu, mw, _ in self.edges_at(u)
                if mu is not ARROW and mw is not TAIL
            }

        return self._closure(X, succs)


# -- validation --------------------------------------------------------------


def _directed_cycle(g: MixedGraph) -> list[str] | None:
    """Return a cycle of definite directed edges, or None."""
    color: dict[str, int] = {}
    stack: list[str] = []

    def dfs(v: str):
        color[v] = 1
        stack.append(v)
        for w in sorted(g.children(v)):
            c = color.get(w, 0)
            if c == 1:
                return stack[stack.index(w):] + [w]
            if c == 0:
                found = dfs(w)
                if found:
                    return found
        color[v] = 2
        stack.pop()
        return None

    for v in g.node_ids:
        if color.get(v, 0) == 0:
            found = dfs(v)
            if found:
                return found
    return None


def validate(g: MixedGraph, cls: GraphClass) -> list[str]:
    """Check the invariants of the requested graph class; empty list = valid."""
    bad: list[str] = []
    inputs = set(g.inputs)
    for e in g.edges:
        for v in (e.a, e.b):
            if v in inputs and e.mark_at(v) is ARROW:
                bad.append(f"arrowhead at input {v} on {format_edge(e)}")
        if e.a in inputs and e.b in inputs:
            bad.append(f"edge between inputs {e.a}, {e.b}")
    if cls is GraphClass.RAW:
        return bad

    if cls is GraphClass.ADMG:
        for e in g.edges:
            if CIRCLE in (e.mark_a, e.mark_b):
                bad.append(f"circle mark on {format_edge(e)}")
            if e.mark_a is TAIL and e.mark_b is TAIL:
                bad.append(f"undirected edge {format_edge(e)}")
        cyc = _directed_cycle(g)
        if cyc:
            bad.append("directed cycle " + ",".join(cyc))
        return bad

    # MAG / PAG
    for v in g.node_ids:
        for w in g.neighbors(v):
            if v < w and len(g.edges_between(v, w)) > 1:
                bad.append(f"parallel edges between {v}, {w}")
    if cls is GraphClass.MAG:
        for e in g.edges:
            if CIRCLE in (e.mark_a, e.mark_b):
                bad.append(f"circle mark on {format_edge(e)}")
    cyc = _directed_cycle(g)
    if cyc:
        bad.append("directed cycle " + ",".join(cyc))
    else:
        for v in g.node_ids:
            anc = g.ancestors({v})
            for w in g.spouses(v):
                if w in anc and w != v:
                    bad.append(f"almost directed cycle {w} in Anc({v}), {v}<->{w}")
    for v in g.node_ids:
        has_arrow_in = any(mv is ARROW for _, mv, _, _ in g.edges_at(v))
        if has_arrow_in and g.undirected_neighbors(v):
            u = sorted(g.undirected_neighbors(v))[0]
            bad.append(f"arrowhead into {v} which has undirected edge {v}---{u}")
    # maximality: no inducing path (relative to nothing, given nothing)
    # between distinct non-adjacent nodes
    ids = g.node_ids
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if g.adjacent(a, b):
                continue
            if a in inputs and b in inputs:
                continue
            if inducing_path_exists(g, a, b, set(), set()):
                bad.append(f"inducing path between non-adjacent {a}, {b}")
    return bad


# -- inducing paths ----------------------------------------------------------


def inducing_path_exists(g: MixedGraph, a: str, b: str, L, S) -> bool:
    """Walk from a to b whose non-endnodes are each in L or colliders, with
    every collider an ancestor of {a, b} union S."""
    if a == b:
        raise ValueError("endpoints must differ")
    L = set(L)
    anc = g.ancestors({a, b} | set(S))
    # state: (node, incoming mark at node); search from a
    seen: set[tuple[str, Mark]] = set()
    frontier: list[tuple[str, Mark]] = []
    for w, _ma, mw, _e in g.edges_at(a):
        if w == b:
            return True
        st = (w, mw)
        if st not in seen:
            seen.add(st)
            frontier.append(st)
    while frontier:
        v, m_in = frontier.pop()
        for w, mv, mw, _e in g.edges_at(v):
            collider = m_in is ARROW and mv is ARROW
            if collider:
                if v not in anc:
                    continue
            elif v not in L:
                continue
            if w == b:
                return True
            if w == a:
                continue
            st = (w, mw)
            if st not in seen:
                seen.add(st)
                frontier.append(st)
    return False


# -- buckets / pc-components / regions ---------------------------------------


def buckets(g: MixedGraph, D) -> list[tuple[str, ...]]:
    """Partition of D by connectivity via arrowhead-free paths within g_D."""
    D = sorted(set(D))
    idx = {v: v for v in D}

    def find(v):
        while idx[v] != v:
            idx[v] = idx[idx[v]]
            v = idx[v]
        return v

    def union(v, w):
        rv, rw = find(v), find(w)
        if rv != rw:
            idx[max(rv, rw)] = min(rv, rw)

    dset = set(D)
    for e in g.edges:
        if e.a in dset and e.b in dset:
            if e.mark_a is not ARROW and e.mark_b is not ARROW:
                union(e.a, e.b)
    groups: dict[str, list[str]] = {}
    for v in D:
        groups.setdefault(find(v), []).append(v)
    return [tuple(sorted(groups[r])) for r in sorted(groups)]


def bucket_of(g: MixedGraph, D, b: str) -> tuple[str, ...]:
    for bu in buckets(g, D):
        if b in bu:
            return bu
    raise KeyError(b)


def _is_visible(g: MixedGraph, a: str, b: str) -> bool:
    """Directed edge a --> b is visible: a is an input, or some c not adjacent
    to b has an arrowhead into a, or an arrowhead into the far end of a
    bidirected chain of parents of b ending at a."""
    found = False
    for e in g.edges_between(a, b):
        if e.mark_at(a) is TAIL and e.mark_at(b) is ARROW:
            found = True
    if not found:
        raise ValueError(f"no directed edge {a} --> {b}")
    if g.kind(a) is INPUT:
        return True
    adj_b = set(g.neighbors(b)) | {b}
    pa_b = g.parents(b)
    # nodes reachable from a through bidirected edges among Pa(b)
    chain = {a}
    frontier = [a]
    while frontier:
        v = frontier.pop()
        for w in g.spouses(v):
            if w in pa_b and w not in chain:
                chain.add(w)
                frontier.append(w)
    for v in chain:
        for c, mv, _mc, _e in g.edges_at(v):
            if mv is ARROW and c not in adj_b:
                return True
    return False


def pc_component(
    g: MixedGraph, D, b: str, directed_visible: bool = False
) -> tuple[str, ...]:
    """All a in D connected to b in g_D by a single non-visible edge or by a
    collider path with arrowheads throughout and no visible edge.  With
    directed_visible every directed edge counts as visible, which is the
    reading for graphs whose directed edges are known exactly."""
    D = set(D)
    if b not in D:
        raise ValueError(f"{b} not in D")
    h = g.induced(D)

    def visible(e: Edge) -> bool:
        for x, y in ((e.a, e.b), (e.b, e.a)):
            if e.mark_at(x) is TAIL and e.mark_at(y) is ARROW:
                return True if directed_visible else _is_visible(h, x, y)
        return False

    out = {b}
    # clause (i): single non-visible edge
    for w, _mb, _mw, e in h.edges_at(b):
        if not visible(e):
            out.add(w)
    # clause (ii): b <-* v ... v *-> a collider path, no visible edge.
    # traverse states (node, ok) where the incoming edge had an arrowhead at
    # the node; interior edges must be bidirected.
    starts = [
        (w, e)
        for w, _mb, mw, e in h.edges_at(b)
        if mw is ARROW and not visible(e)
    ]
    seen = {w for w, _ in starts}
    frontier = [w for w, _ in starts]
    while frontier:
        v = frontier.pop()
        for w, mv, mw, e in h.edges_at(v):
            if mv is not ARROW or visible(e):
                continue
            if mw is ARROW:
                # interior bidirected step keeps the chain alive
                out.add(w)
                if w not in seen:
                    seen.add(w)
                    frontier.append(w)
            else:
                # terminal edge v <-* w with tail/circle at w: w = endpoint a
                out.add(w)
    return tuple(sorted(out))


def pc_component_set(
    g: MixedGraph, D, B, directed_visible: bool = False
) -> set[str]:
    out: set[str] = set()
    for b in sorted(set(B)):
        out.update(pc_component(g, D, b, directed_visible))
    return out


def region(g: MixedGraph, D, B, directed_visible: bool = False) -> tuple[str, ...]:
    """Bucket closure of the pc-components of B within g_D."""
    D = set(D)
    out: set[str] = set()
    part = buckets(g, D)
    lookup = {v: bu for bu in part for v in bu}
    for c in pc_component_set(g, D, B, directed_visible):
        out.update(lookup[c])
    return tuple(sorted(out))


def bucket_topological_order(g: MixedGraph, D) -> list[tuple[str, ...]]:
    """Total order of g_D-buckets refining: A wholly potentially-ancestral to B
    puts A before B. Ties broken by smallest contained node id."""
    part = buckets(g, D)
    if not part:
        return []
    h = g.induced(set(D))
    poan = {bu: h.possible_ancestors(set(bu)) for bu in part}
    lookup = {v: bu for bu in part for v in bu}
    succs: dict[tuple[str, ...], set[tuple[str, ...]]] = {bu: set() for bu in part}
    indeg = {bu: 0 for bu in part}

    def add(x, y):
        if y not in succs[x]:
            succs[x].add(y)
            indeg[y] += 1

    for x in part:
        for y in part:
            if x != y and set(x) <= poan[y]:
                add(x, y)
    # a potentially directed edge between buckets also orders them; for
    # SOPAG-derived graphs this refinement cannot create cycles
    for e in h.edges:
        for u, w in ((e.a, e.b), (e.b, e.a)):
            if e.mark_at(u) is not ARROW and e.mark_at(w) is not TAIL:
                bu, bw = lookup[u], lookup[w]
                if bu != bw:
                    add(bu, bw)
    order: list[tuple[str, ...]] = []
    ready = sorted([bu for bu in part if indeg[bu] == 0])
    while ready:
        bu = ready.pop(0)
        order.append(bu)
        for nxt in sorted(succs[bu]):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(part):
        raise ValueError("cycle among buckets; graph is not SOPAG-derived")
    return order


def circle_components(g: MixedGraph, D) -> list[tuple[str, ...]]:
    """Connected components of g_D restricted to o-o edges."""
    D = sorted(set(D))
    dset = set(D)
    adj: dict[str, set[str]] = {v: set() for v in D}
    for e in g.edges:
        if (
            e.a in dset
            and e.b in dset
            and e.mark_a is CIRCLE
            and e.mark_b is CIRCLE
        ):
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
    seen: set[str] = set()
    comps = []
    for v in D:
        if v in seen:
            continue
        comp = {v}
        frontier = [v]
        seen.add(v)
        while frontier:
            u = frontier.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.add(w)
                    frontier.append(w)
        comps.append(tuple(sorted(comp)))
    return comps


def discriminating_paths(g: MixedGraph, y: str, z: str) -> list[tuple[str, ...]]:
    """All paths <a, q1..qk, y, z> (k >= 1) where a is non-adjacent to z,
    every q_i is a collider on the path and a parent of z, the path starts
    with an arrowhead into q1, and y is adjacent to both q_k and z."""
    if not g.adjacent(y, z):
        return []
    pa_z = g.parents(z)
    results: list[tuple[str, ...]] = []

    # build backwards from y: chains q_k, ..., q_1 of colliders in Pa(z)
    def extend(chain: list[str]):
        qk = chain[0]
        # the edge chain[0] ~ next-toward-y must have an arrowhead at chain[0]
        # (ensured by construction); try to close with an endpoint a, or grow.
        for w, mq, mw, _e in g.edges_at(qk):
            if w in chain or w in (y, z):
                continue
            if mq is not ARROW:
                continue
            # w could be the endpoint a (if non-adjacent to z)
            if not g.adjacent(w, z):
                results.append(tuple([w] + chain + [y, z]))
            # or another collider q (needs arrowhead at w too and w in Pa(z))
            if mw is ARROW and w in pa_z:
                extend([w] + chain)

    for q, my_, mq, _e in g.edges_at(y):
        # edge between q_k and y must have an arrowhead at q_k
        if q in (z,):
            continue
        if mq is ARROW and q in pa_z:
            extend([q])
    return sorted(set(results))


# -- text format -------------------------------------------------------------

_LEFT = {"<": ARROW, "o": CIRCLE, "-": TAIL}
_RIGHT = {">": ARROW, "o": CIRCLE, "-": TAIL}
_LEFT_INV = {v: k for k, v in _LEFT.items()}
_RIGHT_INV = {v: k for k, v in _RIGHT.items()}
_KINDS = {k.value: k for k in NodeKind}


class ParseError(ValueError):
    pass


def parse_graph(text: str) -> MixedGraph:
    """Parse the line-oriented graph format:

        node <id> <kind>
        edge <id1> <tok> <id2>   with tok like -->, <->, o->, o-o, ---, o--
    """
    g, extra = parse_graph_with_headers(text)
    if extra["soft"] or extra["hard"]:
        raise ParseError("unexpected soft/hard header in plain graph file")
    return g


def parse_graph_with_headers(text: str):
    nodes: dict[str, NodeKind] = {}
    edges: set[Edge] = set()
    soft: list[str] = []
    hard: list[str] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node":
            if len(parts) != 3:
                raise ParseError(f"line {ln}: expected 'node <id> <kind>'")
            _, vid, kind = parts
            if kind not in _KINDS:
                raise ParseError(f"line {ln}: unknown kind {kind!r}")
            if vid in nodes:
                raise ParseError(f"line {ln}: duplicate node {vid}")
            nodes[vid] = _KINDS[kind]
        elif parts[0] == "edge":
            if len(parts) != 4:
                raise ParseError(f"line {ln}: expected 'edge <id> <tok> <id>'")
            _, x, tok, y = parts
            if len(tok) != 3 or tok[1] != "-" or tok[0] not in _LEFT or tok[2] not in _RIGHT:
                raise ParseError(f"line {ln}: bad edge token {tok!r}")
            if x not in nodes or y not in nodes:
                raise ParseError(f"line {ln}: edge references undeclared node")
            try:
                e = Edge(x, _LEFT[tok[0]], y, _RIGHT[tok[2]])
            except ValueError as exc:
                raise ParseError(f"line {ln}: {exc}") from None
            if e in edges:
                raise ParseError(f"line {ln}: duplicate edge {x} {tok} {y}")
            edges.add(e)
        elif parts[0] == "soft" and len(parts) == 2:
            soft.append(parts[1])
        elif parts[0] == "hard" and len(parts) == 2:
            hard.append(parts[1])
        else:
            raise ParseError(f"line {ln}: unrecognized statement {line!r}")
    return MixedGraph(nodes, edges), {"soft": soft, "hard": hard}


def format_edge(e: Edge) -> str:
    return f"{e.a} {_LEFT_INV[e.mark_a]}-{_RIGHT_INV[e.mark_b]} {e.b}"


def format_graph(g: MixedGraph, headers: dict | None = None) -> str:
    lines = []
    if headers:
        for d in headers.get("soft", ()):
            lines.append(f"soft {d}")
        for t in headers.get("hard", ()):
            lines.append(f"hard {t}")
    for v, k in sorted(g.nodes.items()):
        lines.append(f"node {v} {k.value}")
    for e in sorted(g.edges):
        lines.append("edge " + format_edge(e))
    return "\n".join(lines) + "\n"
