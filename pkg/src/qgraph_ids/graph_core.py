"""Combinatorial, topological and metric graphs, periodic lattices and boxes.

Vertex and edge labels are arbitrary hashable objects. Lattice graphs use
labels ``(orbit, gamma)`` with ``gamma`` an integer tuple, so a translation
acts as a shift of the second entry.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

Label = Hashable


class GraphError(ValueError):
    """Raised for malformed graph descriptions."""


@dataclass(frozen=True, eq=False)
class CombinatorialGraph:
    """Finite multigraph ``(V, E, boundary)``.

    ``ends[i]`` holds the two endpoint labels of edge ``edges[i]``. For a
    combinatorial graph the order inside the pair carries no meaning.
    Loops are allowed and count twice towards the degree.
    """

    vertices: tuple
    edges: tuple
    ends: tuple

    def __post_init__(self):
        vidx = {v: i for i, v in enumerate(self.vertices)}
        if len(vidx) != len(self.vertices):
            raise GraphError("duplicate vertex label")
        eidx = {e: i for i, e in enumerate(self.edges)}
        if len(eidx) != len(self.edges):
            raise GraphError("duplicate edge label")
        if len(self.ends) != len(self.edges):
            raise GraphError("ends must match edges")
        tail = np.empty(len(self.edges), dtype=np.int64)
        head = np.empty(len(self.edges), dtype=np.int64)
        for i, (e, (u, w)) in enumerate(zip(self.edges, self.ends)):
            if u not in vidx or w not in vidx:
                bad = u if u not in vidx else w
                raise GraphError(f"edge {e!r} has undeclared endpoint {bad!r}")
            tail[i] = vidx[u]
            head[i] = vidx[w]
        object.__setattr__(self, "_vidx", vidx)
        object.__setattr__(self, "_eidx", eidx)
        object.__setattr__(self, "tail_index", tail)
        object.__setattr__(self, "head_index", head)
        # slot 2i is the tail end of edge i, slot 2i+1 its head end
        slots: list[list[int]] = [[] for _ in self.vertices]
        for i in range(len(self.edges)):
            slots[tail[i]].append(2 * i)
            slots[head[i]].append(2 * i + 1)
        object.__setattr__(self, "vertex_slots", tuple(tuple(s) for s in slots))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def vertex_index(self, v: Label) -> int:
        return self._vidx[v]

    def edge_index(self, e: Label) -> int:
        return self._eidx[e]

    def has_vertex(self, v: Label) -> bool:
        return v in self._vidx

    def has_edge(self, e: Label) -> bool:
        return e in self._eidx

    def degree(self, v: Label) -> int:
        return len(self.vertex_slots[self._vidx[v]])

    def degrees(self) -> np.ndarray:
        return np.array([len(s) for s in self.vertex_slots], dtype=np.int64)

    def incident_edges(self, v: Label) -> list:
        """Edge labels at ``v``, one entry per edge end (a loop appears twice)."""
        return [self.edges[s // 2] for s in self.vertex_slots[self._vidx[v]]]

    def neighbors(self, v: Label) -> list:
        out = []
        for s in self.vertex_slots[self._vidx[v]]:
            i = s // 2
            other = self.head_index[i] if s % 2 == 0 else self.tail_index[i]
            out.append(self.vertices[other])
        return out

    def adjacency_matrix(self) -> np.ndarray:
        """Adjacency with multiplicities; a loop adds 2 on the diagonal."""
        a = np.zeros((self.num_vertices, self.num_vertices))
        np.add.at(a, (self.tail_index, self.head_index), 1.0)
        np.add.at(a, (self.head_index, self.tail_index), 1.0)
        return a

    def is_connected(self) -> bool:
        if self.num_vertices == 0:
            return True
        seen = {self.vertices[0]}
        todo = [self.vertices[0]]
        while todo:
            v = todo.pop()
            for w in self.neighbors(v):
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.num_vertices


@dataclass(frozen=True, eq=False)
class TopologicalGraph(CombinatorialGraph):
    """Combinatorial graph with a direction: ``ends[i] = (tail, head)``."""

    def out_edges(self, v: Label) -> list:
        """Edges starting at ``v`` (their tail is ``v``)."""
        return [self.edges[s // 2] for s in self.vertex_slots[self._vidx[v]] if s % 2 == 0]

    def in_edges(self, v: Label) -> list:
        """Edges ending at ``v`` (their head is ``v``)."""
        return [self.edges[s // 2] for s in self.vertex_slots[self._vidx[v]] if s % 2 == 1]

    def tail(self, e: Label) -> Label:
        return self.ends[self._eidx[e]][0]

    def head(self, e: Label) -> Label:
        return self.ends[self._eidx[e]][1]


def build_topological_graph(vertices: Iterable[Label],
                            directed_edges: Iterable) -> TopologicalGraph:
    """Build a topological graph.

    Parameters
    ----------
    vertices : iterable of labels
    directed_edges : iterable of ``(label, tail, head)`` triples

    Raises
    ------
    GraphError
        If an edge refers to an undeclared vertex.
    """
    verts = tuple(vertices)
    labels, ends = [], []
    for item in directed_edges:
        e, t, h = item
        labels.append(e)
        ends.append((t, h))
    return TopologicalGraph(verts, tuple(labels), tuple(ends))


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Topological graph with positive edge lengths.

    Edge ``e`` is identified with ``[0, length(e)]``, running from its tail
    to its head.
    """

    graph: TopologicalGraph
    lengths: np.ndarray

    def __post_init__(self):
        ls = np.asarray(self.lengths, dtype=float).copy()
        if ls.shape != (self.graph.num_edges,):
            raise GraphError("one length per edge required")
        if ls.size and not np.all(ls > 0):
            raise GraphError("edge lengths must be positive")
        ls.setflags(write=False)
        object.__setattr__(self, "lengths", ls)

    @property
    def l_min(self) -> float:
        return float(self.lengths.min())

    @property
    def l_max(self) -> float:
        return float(self.lengths.max())

    def length(self, e: Label) -> float:
        return float(self.lengths[self.graph.edge_index(e)])

    def with_lengths(self, lengths) -> "MetricGraph":
        return MetricGraph(self.graph, np.asarray(lengths, dtype=float))


def metric_graph(graph: TopologicalGraph, lengths=1.0) -> MetricGraph:
    """Attach lengths given as a scalar, sequence, mapping or callable on labels."""
    n = graph.num_edges
    if np.isscalar(lengths):
        arr = np.full(n, float(lengths))
    elif isinstance(lengths, Mapping):
        arr = np.array([float(lengths[e]) for e in graph.edges])
    elif callable(lengths):
        arr = np.array([float(lengths(e)) for e in graph.edges])
    else:
        arr = np.asarray(lengths, dtype=float)
    return MetricGraph(graph, arr)


# ---------------------------------------------------------------- lattices

@dataclass(frozen=True)
class EdgeOrbit:
    """Edge ``(j, gamma)`` runs from ``(tail, gamma + tail_shift)`` to
    ``(head, gamma + head_shift)``."""

    tail: int
    tail_shift: tuple
    head: int
    head_shift: tuple


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: tuple, b: tuple) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True, eq=False)
class PeriodicGraph:
    """Infinite ``Z^d``-periodic topological graph given by orbit data.

    The group acts by ``T_gamma (orbit, delta) = (orbit, delta + gamma)`` on
    vertices and edges alike, so orientations are preserved. The
    combinatorial fundamental domain ``Q`` is the set of vertices with
    ``gamma = 0``, the topological one ``F`` the set of edges with
    ``gamma = 0``.
    """

    name: str
    rank: int
    vertex_orbits: tuple
    edge_orbits: tuple
    cell_cycles: tuple = ()
    positions: tuple = ()
    lattice_vectors: tuple = ()

    def __post_init__(self):
        zero = (0,) * self.rank
        inc: list[list[tuple]] = [[] for _ in self.vertex_orbits]
        for j, eo in enumerate(self.edge_orbits):
            # incident edge at (orbit, gamma) is (j, gamma - shift)
            inc[eo.tail].append((j, eo.tail_shift, 0))
            inc[eo.head].append((j, eo.head_shift, 1))
        object.__setattr__(self, "_inc", tuple(tuple(x) for x in inc))
        object.__setattr__(self, "zero", zero)

    @property
    def fundamental_vertices(self) -> tuple:
        return tuple((o, self.zero) for o in range(len(self.vertex_orbits)))

    @property
    def fundamental_edges(self) -> tuple:
        return tuple((j, self.zero) for j in range(len(self.edge_orbits)))

    def translate(self, label: tuple, gamma: Sequence[int]) -> tuple:
        return (label[0], _add(label[1], tuple(gamma)))

    def edge_ends(self, e: tuple) -> tuple:
        eo = self.edge_orbits[e[0]]
        return ((eo.tail, _add(e[1], eo.tail_shift)), (eo.head, _add(e[1], eo.head_shift)))

    def incident_edges(self, v: tuple) -> list:
        """``(edge, other_end)`` pairs at ``v``, one entry per edge end."""
        out = []
        for j, shift, side in self._inc[v[0]]:
            e = (j, _sub(v[1], shift))
            t, h = self.edge_ends(e)
            out.append((e, h if side == 0 else t))
        return out

    def degree(self, v: tuple) -> int:
        return len(self._inc[v[0]])

    def position(self, v: tuple) -> complex:
        """Planar embedding of a vertex (rank-2 lattices with positions)."""
        if not self.positions:
            raise GraphError(f"{self.name} carries no embedding")
        p = complex(self.positions[v[0]])
        for g, w in zip(v[1], self.lattice_vectors):
            p += g * complex(w)
        return p

    def cells(self, n: int | Sequence[int]) -> list:
        dims = (n,) * self.rank if np.isscalar(n) else tuple(n)
        if len(dims) != self.rank or min(dims) < 1:
            raise GraphError("box sizes must be positive, one per lattice direction")
        return [tuple(g) for g in product(*(range(k) for k in dims))]

    def cell_cycle(self, k: int, gamma: tuple) -> list:
        """Vertices of the ``k``-th distinguished cycle attached to cell ``gamma``."""
        return [(o, _add(gamma, s)) for o, s in self.cell_cycles[k]]


def kagome_lattice() -> PeriodicGraph:
    """The Kagome lattice with unit edges.

    Vertices ``a = 0``, ``b = w1``, ``c = w2`` with ``w1 = 1``,
    ``w2 = exp(i pi/3)``; translations by ``2 g1 w1 + 2 g2 w2``.
    Every vertex has degree four.
    """
    z = (0, 0)
    orbits = (
        EdgeOrbit(0, z, 1, z),          # a -> b
        EdgeOrbit(1, z, 2, z),          # b -> c
        EdgeOrbit(2, z, 0, z),          # c -> a
        EdgeOrbit(1, z, 0, (1, 0)),     # b -> a + e1
        EdgeOrbit(2, z, 0, (0, 1)),     # c -> a + e2
        EdgeOrbit(2, z, 1, (-1, 1)),    # c -> b - e1 + e2
    )
    w2 = np.exp(1j * np.pi / 3)
    # hexagon H_gamma: vertex k sits at centre + exp(i k pi/3), sign (-1)^k
    hexagon = ((2, (1, 0)), (1, (0, 1)), (0, (0, 1)), (2, (0, 0)), (1, (0, 0)), (0, (1, 0)))
    return PeriodicGraph("kagome", 2, ("a", "b", "c"), orbits, (hexagon,),
                         positions=(0j, 1 + 0j, complex(w2)),
                         lattice_vectors=(2 + 0j, complex(2 * w2)))


def chain_lattice() -> PeriodicGraph:
    """The integer line: one vertex and one edge per cell."""
    return PeriodicGraph("chain", 1, ("v",), (EdgeOrbit(0, (0,), 0, (1,)),),
                         positions=(0j,), lattice_vectors=(1 + 0j,))


def square_lattice() -> PeriodicGraph:
    """The square lattice ``Z^2``, 4-regular."""
    z = (0, 0)
    return PeriodicGraph("square", 2, ("v",),
                         (EdgeOrbit(0, z, 0, (1, 0)), EdgeOrbit(0, z, 0, (0, 1))),
                         positions=(0j,), lattice_vectors=(1 + 0j, 1j))


LATTICES: dict[str, Callable[[], PeriodicGraph]] = {
    "kagome": kagome_lattice,
    "chain": chain_lattice,
    "square": square_lattice,
}


# ---------------------------------------------------------------- subgraphs

@dataclass(frozen=True, eq=False)
class Subgraph:
    """Edge-aligned subgraph of a parent graph.

    ``parent`` is either a finite :class:`TopologicalGraph` or a
    :class:`PeriodicGraph`. The boundary consists of the vertices of the
    subgraph that touch a parent edge outside the subgraph.
    """

    parent: object
    vertices: tuple
    edges: tuple
    boundary: frozenset

    def __post_init__(self):
        vs = set(self.vertices)
        for e in self.edges:
            for v in _edge_ends(self.parent, e):
                if v not in vs:
                    raise GraphError(f"edge {e!r} leaves the vertex set")
        if not set(self.boundary) <= vs:
            raise GraphError("boundary must lie in the vertex set")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def graph(self) -> TopologicalGraph:
        """The subgraph as a standalone topological graph."""
        ends = tuple(_edge_ends(self.parent, e) for e in self.edges)
        return TopologicalGraph(self.vertices, self.edges, ends)

    def metric(self, lengths=1.0) -> MetricGraph:
        return metric_graph(self.graph(), lengths)

    def thickened_boundary(self, r: int) -> frozenset:
        """``{v in parent : d(v, boundary) <= r}`` in combinatorial distance."""
        dist = {v: 0 for v in self.boundary}
        todo = deque(self.boundary)
        while todo:
            v = todo.popleft()
            if dist[v] == r:
                continue
            for _, w in _incident(self.parent, v):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    todo.append(w)
        return frozenset(dist)

    def interior_edges(self) -> tuple:
        """Edges with no endpoint on the boundary (the closure of the
        complement of the unit-thickened boundary, for unit lengths)."""
        return tuple(e for e in self.edges
                     if not any(v in self.boundary for v in _edge_ends(self.parent, e)))

    def van_hove_ratio(self) -> float:
        """``|boundary| / vol`` with unit lengths."""
        return len(self.boundary) / self.num_edges


def _edge_ends(parent, e) -> tuple:
    if isinstance(parent, PeriodicGraph):
        return parent.edge_ends(e)
    i = parent.edge_index(e)
    return parent.ends[i]


def _incident(parent, v) -> list:
    if isinstance(parent, PeriodicGraph):
        return parent.incident_edges(v)
    out = []
    for s in parent.vertex_slots[parent.vertex_index(v)]:
        i = s // 2
        other = parent.head_index[i] if s % 2 == 0 else parent.tail_index[i]
        out.append((parent.edges[i], parent.vertices[other]))
    return out


def subgraph_from_edges(parent, edges: Iterable) -> Subgraph:
    """Edge-aligned subgraph spanned by ``edges``, with its boundary."""
    es = tuple(dict.fromkeys(edges))
    eset = set(es)
    verts = []
    seen = set()
    for e in es:
        for v in _edge_ends(parent, e):
            if v not in seen:
                seen.add(v)
                verts.append(v)
    bd = frozenset(v for v in verts if any(e not in eset for e, _ in _incident(parent, v)))
    return Subgraph(parent, tuple(verts), es, bd)


def induced_subgraph(parent, vertices: Iterable) -> Subgraph:
    """Subgraph induced by a vertex set (all parent edges between them)."""
    vs = tuple(dict.fromkeys(vertices))
    vset = set(vs)
    es = []
    seen = set()
    for v in vs:
        for e, w in _incident(parent, v):
            if w in vset and e not in seen:
                seen.add(e)
                es.append(e)
    eset = set(es)
    bd = frozenset(v for v in vs if any(e not in eset for e, _ in _incident(parent, v)))
    return Subgraph(parent, vs, tuple(es), bd)


def folner_box(lattice: PeriodicGraph, n: int | Sequence[int]) -> Subgraph:
    """``Lambda(I_n)``: union of the translates ``gamma F`` for ``gamma`` in the box."""
    cells = lattice.cells(n)
    edges = [(j, g) for g in cells for j in range(len(lattice.edge_orbits))]
    return subgraph_from_edges(lattice, edges)


def combinatorial_box(lattice: PeriodicGraph, n: int | Sequence[int]) -> Subgraph:
    """Induced subgraph on the translates ``Q_gamma`` for ``gamma`` in the box."""
    cells = lattice.cells(n)
    verts = [(o, g) for g in cells for o in range(len(lattice.vertex_orbits))]
    return induced_subgraph(lattice, verts)


@dataclass(frozen=True, eq=False)
class LatticePatch:
    """Finite piece of a periodic graph over a box of cells.

    ``subgraph`` is induced by the translated combinatorial fundamental
    domains. ``edge_slots`` counts all translates of ``F``; ``crossing_slots``
    lists the slots with an endpoint outside the patch.
    """

    lattice: PeriodicGraph
    shape: tuple
    subgraph: Subgraph
    edge_slots: int
    crossing_slots: tuple

    def hexagons(self) -> list:
        """Cycles ``H_gamma`` for every cell, as ``(gamma, vertex list)``."""
        return [(g, self.lattice.cell_cycle(0, g)) for g in self.lattice.cells(self.shape)]

    def contained_hexagons(self, allowed: Iterable | None = None) -> list:
        """Hexagons (over all of ``Z^2``) whose six vertices lie in ``allowed``.

        ``allowed`` defaults to the patch vertices. Every hexagon through a
        patch vertex is attached to a cell at most one step outside the box.
        """
        vs = set(self.subgraph.vertices if allowed is None else allowed)
        n1, n2 = self.shape
        out = []
        for g in product(range(-1, n1 + 1), range(-1, n2 + 1)):
            cyc = self.lattice.cell_cycle(0, g)
            if all(v in vs for v in cyc):
                out.append((g, cyc))
        return out


def kagome_patch(n1: int, n2: int | None = None) -> LatticePatch:
    """Kagome vertices ``Q_gamma`` for ``gamma`` in ``{0..n1-1} x {0..n2-1}``."""
    n2 = n1 if n2 is None else n2
    if n1 < 1 or n2 < 1:
        raise GraphError("patch sizes must be at least 1")
    lat = kagome_lattice()
    sub = combinatorial_box(lat, (n1, n2))
    vs = set(sub.vertices)
    crossing = []
    for g in lat.cells((n1, n2)):
        for j in range(len(lat.edge_orbits)):
            if not all(v in vs for v in lat.edge_ends((j, g))):
                crossing.append((j, g))
    return LatticePatch(lat, (n1, n2), sub, 6 * n1 * n2, tuple(crossing))


def volume(metric: MetricGraph, subgraph: Subgraph | None = None) -> float:
    """Total length of the subgraph's edges (all edges if ``subgraph`` is None)."""
    if subgraph is None:
        return float(metric.lengths.sum())
    return float(sum(metric.length(e) for e in subgraph.edges))


def graph_from_dict(data: Mapping) -> MetricGraph:
    """Metric graph from a JSON-style description.

    ``{"vertices": [...], "edges": [{"id": .., "tail": .., "head": .., "length": ..}]}``;
    ``id`` defaults to the list position and ``length`` to 1.
    """
    if "vertices" not in data or "edges" not in data:
        raise GraphError("graph description needs 'vertices' and 'edges'")
    verts = [_hashable(v) for v in data["vertices"]]
    triples, lengths = [], []
    for i, e in enumerate(data["edges"]):
        triples.append((_hashable(e.get("id", i)), _hashable(e["tail"]), _hashable(e["head"])))
        lengths.append(float(e.get("length", 1.0)))
    g = build_topological_graph(verts, triples)
    return MetricGraph(g, np.array(lengths))


def _hashable(x):
    return tuple(_hashable(y) for y in x) if isinstance(x, list) else x
