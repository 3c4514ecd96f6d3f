"""Edge visibility and the hard/soft manipulation operators, including the
combined form: soft manipulation first, then hard manipulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .graph import (
    ARROW,
    CIRCLE,
    TAIL,
    Edge,
    GraphClass,
    INPUT,
    MixedGraph,
    OUTPUT,
    _is_visible,
    format_graph,
    parse_graph_with_headers,
)

REGIME_PREFIX = "I__"


def regime_id(d: str) -> str:
    return REGIME_PREFIX + d


@dataclass(frozen=True)
class ManipulatedGraph:
    """A graph together with its manipulation bookkeeping.

    regime_nodes maps each soft target d to its regime indicator node I__d.
    hard_targets have been turned into input-kind nodes with no incoming
    arrowheads; soft_targets keep their kind but gained a regime parent."""

    graph: MixedGraph
    regime_nodes: tuple[tuple[str, str], ...] = ()
    hard_targets: tuple[str, ...] = ()
    soft_targets: tuple[str, ...] = ()
    base_class: GraphClass = GraphClass.MAG

    @property
    def regime_map(self) -> dict[str, str]:
        return dict(self.regime_nodes)

    @property
    def regime_ids(self) -> tuple[str, ...]:
        return tuple(i for _, i in self.regime_nodes)

    def original_inputs(self) -> tuple[str, ...]:
        """Input nodes of the unmanipulated graph."""
        skip = set(self.regime_ids) | set(self.hard_targets)
        return tuple(v for v in self.graph.inputs if v not in skip)


def as_manipulated(g, cls: GraphClass = GraphClass.MAG) -> ManipulatedGraph:
    if isinstance(g, ManipulatedGraph):
        return g
    return ManipulatedGraph(graph=g, base_class=cls)


@lru_cache(maxsize=1 << 16)
def _visible_cached(g: MixedGraph, a: str, b: str) -> bool:
    return _is_visible(g, a, b)


def is_visible(g: MixedGraph, a: str, b: str) -> bool:
    """Whether the directed edge a --> b is visible: its directedness is
    certified by an input origin or a qualifying non-adjacent witness."""
    if isinstance(g, ManipulatedGraph):
        g = g.graph
    return _visible_cached(g, a, b)


def _check_regime_collision(g: MixedGraph):
    for v in g.node_ids:
        if v.startswith(REGIME_PREFIX):
            raise ValueError(
                f"node id {v!r} collides with the regime-node namespace"
            )


def soft_manipulate(g, D, cls: GraphClass | None = None) -> ManipulatedGraph:
    """Add a regime indicator I_d for each d in D with edges determined by
    the local structure around d (arrowheads, undirected edges, invisible
    directed edges, circle marks)."""
    mg = as_manipulated(g, cls or _infer_class(g))
    if cls is None:
        cls = mg.base_class
    if not mg.regime_nodes and not mg.hard_targets:
        _check_regime_collision(mg.graph)
    graph = mg.graph
    existing = mg.regime_map
    new_regimes = list(mg.regime_nodes)
    new_soft = list(mg.soft_targets)
    for d in sorted(set(D)):
        if not graph.has_node(d):
            raise KeyError(d)
        if graph.kind(d) is not OUTPUT:
            raise ValueError(f"soft target {d} is not an output node")
        if d in existing:
            continue
        graph = _soft_one(graph, d, cls)
        existing[d] = regime_id(d)
        new_regimes.append((d, regime_id(d)))
        new_soft.append(d)
    return ManipulatedGraph(
        graph=graph,
        regime_nodes=tuple(new_regimes),
        hard_targets=mg.hard_targets,
        soft_targets=tuple(sorted(new_soft)),
        base_class=mg.base_class,
    )


def _soft_one(g: MixedGraph, a: str, cls: GraphClass) -> MixedGraph:
    ia = regime_id(a)
    out = g.with_nodes({ia: INPUT})
    new_edges = []
    if cls is GraphClass.ADMG:
        return out.with_edges([Edge(ia, TAIL, a, ARROW)])

    arrow_into_a = any(ma is ARROW for _, ma, _, _ in g.edges_at(a))
    undirected_at_a = bool(g.undirected_neighbors(a))
    if arrow_into_a:
        new_edges.append(Edge(ia, TAIL, a, ARROW))
    if undirected_at_a:
        new_edges.append(Edge(ia, TAIL, a, TAIL))
    if not arrow_into_a and not undirected_at_a:
        new_edges.append(Edge(ia, TAIL, a, CIRCLE))

    outputs = set(g.outputs)
    for b, ma, mb, _e in g.edges_at(a):
        if b not in outputs:
            continue
        if mb is ARROW and ma in (TAIL, CIRCLE):
            # a --> b invisible, or a o-> b
            if ma is CIRCLE or not is_visible(g, a, b):
                new_edges.append(Edge(ia, TAIL, b, ARROW))
        elif ma is TAIL and mb is TAIL:
            new_edges.append(Edge(ia, TAIL, b, TAIL))
        elif ma is CIRCLE and mb is TAIL:
            # a o-- b: undirected company at b decides tail vs circle
            if g.undirected_neighbors(b) - {a}:
                new_edges.append(Edge(ia, TAIL, b, TAIL))
            else:
                new_edges.append(Edge(ia, TAIL, b, CIRCLE))
        elif mb is CIRCLE and ma in (TAIL, CIRCLE):
            # a --o b or a o-o b
            new_edges.append(Edge(ia, TAIL, b, CIRCLE))
    return out.with_edges(new_edges)


def hard_manipulate(g, T, cls: GraphClass | None = None) -> ManipulatedGraph:
    """Delete incoming arrowheads at the targets, turn them into inputs, and
    (for ancestral-graph classes) drop edges among inputs and targets."""
    mg = as_manipulated(g, cls or _infer_class(g))
    if cls is None:
        cls = mg.base_class
    if not mg.regime_nodes and not mg.hard_targets:
        _check_regime_collision(mg.graph)
    graph = mg.graph
    T = sorted(set(T))
    for t in T:
        if not graph.has_node(t):
            raise KeyError(t)
        if graph.kind(t) not in (INPUT, OUTPUT):
            raise ValueError(f"hard target {t} is not an input or output node")
    inputs = set(graph.inputs)
    tset = set(T)
    non_input_targets = tset - inputs
    gone = set()
    add = set()
    for e in graph.edges:
        for x, y in ((e.a, e.b), (e.b, e.a)):
            if y in non_input_targets and e.mark_at(y) is ARROW:
                gone.add(e)
        if cls in (GraphClass.MAG, GraphClass.PAG):
            if e.a in tset | inputs and e.b in tset | inputs:
                gone.add(e)
        if cls is GraphClass.PAG and e not in gone:
            for x, y in ((e.a, e.b), (e.b, e.a)):
                if (
                    y in non_input_targets
                    and e.mark_at(y) is CIRCLE
                    and x not in tset
                    and x not in inputs
                    and graph.kind(x) is OUTPUT
                ):
                    gone.add(e)
                    add.add(Edge(x, e.mark_at(x), y, TAIL))
    graph = graph.without_edges(gone).with_edges(add)
    graph = graph.relabel_kinds({t: INPUT for t in T})
    return ManipulatedGraph(
        graph=graph,
        regime_nodes=mg.regime_nodes,
        hard_targets=tuple(sorted(set(mg.hard_targets) | tset)),
        soft_targets=mg.soft_targets,
        base_class=mg.base_class,
    )


def manipulate(g, D=(), T=(), cls: GraphClass | None = None) -> ManipulatedGraph:
    """Combined manipulation: soft on D, then hard on T."""
    if set(D) & set(T):
        raise ValueError(f"overlapping targets {sorted(set(D) & set(T))}")
    mg = as_manipulated(g, cls or _infer_class(g))
    mg = soft_manipulate(mg, D, cls)
    mg = hard_manipulate(mg, T, cls)
    return mg


def _infer_class(g) -> GraphClass:
    if isinstance(g, ManipulatedGraph):
        return g.base_class
    for e in g.edges:
        if CIRCLE in (e.mark_a, e.mark_b):
            return GraphClass.PAG
    return GraphClass.MAG


# -- serialization -----------------------------------------------------------


def format_manipulated(mg: ManipulatedGraph) -> str:
    return format_graph(
        mg.graph,
        headers={"soft": mg.soft_targets, "hard": mg.hard_targets},
    )


def parse_manipulated(text: str, cls: GraphClass = GraphClass.MAG) -> ManipulatedGraph:
    g, headers = parse_graph_with_headers(text)
    soft = tuple(sorted(headers["soft"]))
    regimes = tuple((d, regime_id(d)) for d in soft)
    for _, i in regimes:
        if not g.has_node(i):
            raise ValueError(f"missing regime node {i} for soft target")
    return ManipulatedGraph(
        graph=g,
        regime_nodes=regimes,
        hard_targets=tuple(sorted(headers["hard"])),
        soft_targets=soft,
        base_class=cls,
    )
