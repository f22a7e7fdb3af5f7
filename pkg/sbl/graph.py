"""
Simple undirected graphs on dense integer vertex ids.

This module holds the graph type shared by every other module, the basic measurements the
constructions are certified with (densities, distances, components after removing a
separator, bipartitions) and the two file formats (edge list and annotated JSON).
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import networkx as nx
import numpy as np
from ska_helpers.utils import LazyVal

from sbl.utils import ParameterError, atomic_write_text, dumps, read_json

__all__ = [
    "ROLES",
    "Graph",
    "AnnotatedGraph",
    "vertex_set",
    "density",
    "bfs_distance",
    "components_after_removal",
    "bipartition",
    "is_connected",
    "read_edge_list",
    "write_edge_list",
    "read_annotated_json",
    "write_annotated_json",
    "read_graph",
    "write_graph",
]

# role names allowed in the annotated JSON format
ROLES = ("sa", "sb", "first", "last", "leaf", "path")


def vertex_set(vertices, n=None):
    """
    Normalize a collection of vertex ids into a sorted array of distinct ids.

    Parameters
    ----------
    vertices : iterable of int
        Vertex ids, possibly repeated and unsorted.
    n : int, optional
        If given, all ids must be in ``range(n)``.

    Returns
    -------
    numpy.ndarray
        Sorted int64 array without repetitions.
    """
    if not isinstance(vertices, np.ndarray):
        vertices = list(vertices)
    arr = np.unique(np.asarray(vertices, dtype=np.int64).ravel())
    if n is not None and arr.size and (arr[0] < 0 or arr[-1] >= n):
        raise ParameterError(f"vertex ids must be in [0, {n}), got {arr[0]}..{arr[-1]}")
    return arr


class Graph:
    """
    Immutable simple undirected graph with vertices ``0..n-1``.

    Edges are normalized at construction: each pair is stored once as ``(u, v)`` with
    ``u < v``, duplicates are dropped and the edge array is sorted. Adjacency is kept in
    compressed form with sorted neighbor lists. A networkx view and a dense adjacency matrix
    are built lazily, only when an algorithm needs them.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : iterable of pairs or numpy.ndarray of shape (m, 2)
        Edges, in any order, possibly repeated. Self-loops are rejected.
    """

    def __init__(self, n, edges=()):
        n = int(n)
        if n < 0:
            raise ParameterError(f"vertex count must be non-negative, got {n}")
        if not isinstance(edges, np.ndarray):
            edges = list(edges)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ParameterError(f"edge endpoints must be in [0, {n})")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ParameterError("self-loops are not allowed")
        edges = np.unique(np.sort(edges, axis=1), axis=0).reshape(-1, 2)
        edges.flags.writeable = False

        self.n = n
        self.edges = edges
        self.degrees = np.bincount(edges.ravel(), minlength=n)
        self.degrees.flags.writeable = False

        heads = np.concatenate([edges[:, 0], edges[:, 1]])
        tails = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((tails, heads))
        self._indices = tails[order]
        self._indices.flags.writeable = False
        self._indptr = np.concatenate([[0], np.cumsum(self.degrees)])
        self._init_lazy()

    def _init_lazy(self):
        self._nx = LazyVal(self._build_networkx)
        self._matrix = LazyVal(self._build_matrix)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_nx"]
        del state["_matrix"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._init_lazy()

    def _build_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges.tolist())
        return nx.freeze(g)

    def _build_matrix(self):
        matrix = np.zeros((self.n, self.n), dtype=bool)
        matrix[self.edges[:, 0], self.edges[:, 1]] = True
        matrix[self.edges[:, 1], self.edges[:, 0]] = True
        matrix.flags.writeable = False
        return matrix

    @classmethod
    def from_networkx(cls, g):
        """
        Convert a networkx graph; nodes are relabelled ``0..n-1`` in sorted order.
        """
        g = nx.convert_node_labels_to_integers(g, ordering="sorted")
        return cls(g.number_of_nodes(), list(g.edges()))

    @classmethod
    def empty(cls, n):
        return cls(n)

    @classmethod
    def complete(cls, n):
        return cls.from_networkx(nx.complete_graph(n))

    @classmethod
    def path(cls, n):
        return cls.from_networkx(nx.path_graph(n))

    @classmethod
    def cycle(cls, n):
        return cls.from_networkx(nx.cycle_graph(n))

    @classmethod
    def star(cls, leaves):
        """
        Star with center 0 and ``leaves`` leaves.
        """
        return cls.from_networkx(nx.star_graph(leaves))

    @classmethod
    def complete_bipartite(cls, a, b):
        return cls.from_networkx(nx.complete_bipartite_graph(a, b))

    @property
    def m(self):
        return len(self.edges)

    @property
    def max_degree(self):
        return int(self.degrees.max()) if self.n else 0

    @property
    def min_degree(self):
        return int(self.degrees.min()) if self.n else 0

    def degree(self, v):
        return int(self.degrees[v])

    def neighbors(self, v):
        """
        Sorted neighbors of ``v`` (a read-only view).
        """
        return self._indices[self._indptr[v] : self._indptr[v + 1]]

    def has_edge(self, u, v):
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def is_regular(self):
        return self.n == 0 or bool(np.all(self.degrees == self.degrees[0]))

    def to_networkx(self):
        """
        Frozen networkx view of the graph.
        """
        return self._nx.val

    def adjacency_matrix(self):
        """
        Dense read-only boolean adjacency matrix.
        """
        return self._matrix.val

    def edge_list(self):
        return [tuple(edge) for edge in self.edges.tolist()]

    def neighborhood(self, vertices):
        """
        N(S): the vertices having at least one neighbor in S.
        """
        vertices = vertex_set(vertices, self.n)
        if not vertices.size:
            return vertices
        return vertex_set(np.concatenate([self.neighbors(v) for v in vertices]))

    def count_edges(self, xs, ys):
        """
        Number of ordered pairs (x, y) with x in X, y in Y and xy an edge.

        For disjoint X and Y this is the number of edges between them. Edges with both
        endpoints in the intersection are counted twice, so ``count_edges(V, V) = 2 e(G)``.
        """
        xs = vertex_set(xs, self.n)
        ys = vertex_set(ys, self.n)
        if not xs.size or not ys.size:
            return 0
        in_y = np.zeros(self.n, dtype=bool)
        in_y[ys] = True
        nbrs = np.concatenate([self.neighbors(x) for x in xs])
        return int(in_y[nbrs].sum())

    def subgraph(self, vertices):
        """
        Induced subgraph F[A], relabelled.

        Returns
        -------
        graph : Graph
            The induced subgraph; vertex ``i`` corresponds to ``vertices[i]``.
        vertices : numpy.ndarray
            The sorted original ids.
        """
        vertices = vertex_set(vertices, self.n)
        new_id = np.full(self.n, -1, dtype=np.int64)
        new_id[vertices] = np.arange(len(vertices))
        mapped = new_id[self.edges]
        keep = np.all(mapped >= 0, axis=1)
        return Graph(len(vertices), mapped[keep]), vertices

    def remove_edges(self, edges):
        """
        A copy of the graph without the given edges.
        """
        drop = {tuple(sorted(map(int, edge))) for edge in edges}
        kept = [edge for edge in self.edge_list() if edge not in drop]
        return Graph(self.n, kept)

    def add_edges(self, edges):
        if not isinstance(edges, np.ndarray):
            edges = list(edges)
        extra = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return Graph(self.n, np.concatenate([self.edges, extra]))

    def to_dict(self):
        return {"n": self.n, "edges": self.edges.tolist()}

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def density(graph, xs, ys):
    """
    Edge density d(X, Y) = e(X, Y) / (|X| |Y|) between two disjoint vertex sets.

    Parameters
    ----------
    graph : Graph
    xs, ys : iterable of int
        Disjoint, non-empty vertex sets.

    Returns
    -------
    fractions.Fraction
        The exact density, in [0, 1].
    """
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    if not xs.size or not ys.size:
        raise ParameterError("density needs two non-empty vertex sets")
    if np.intersect1d(xs, ys).size:
        raise ParameterError("density needs two disjoint vertex sets")
    return Fraction(graph.count_edges(xs, ys), len(xs) * len(ys))


def bfs_distance(graph, xs, ys):
    """
    Hop distance between two vertex sets, with a shortest path as witness.

    Parameters
    ----------
    graph : Graph
    xs, ys : iterable of int
        Non-empty vertex sets.

    Returns
    -------
    distance : int or float
        ``min dist(x, y)`` over x in X, y in Y; ``math.inf`` if no path exists.
    path : list of int
        A shortest path starting in X and ending in Y (empty when disconnected). Ties are
        broken towards the smallest vertex ids, so the witness is deterministic.
    """
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    if not xs.size or not ys.size:
        raise ParameterError("bfs_distance needs two non-empty vertex sets")
    in_y = np.zeros(graph.n, dtype=bool)
    in_y[ys] = True

    layers = []
    for depth, layer in enumerate(nx.bfs_layers(graph.to_networkx(), xs.tolist())):
        layers.append(layer)
        hits = [v for v in layer if in_y[v]]
        if not hits:
            continue
        path = [min(hits)]
        for previous in reversed(layers[:-1]):
            previous = np.asarray(previous)
            nbrs = np.intersect1d(graph.neighbors(path[-1]), previous)
            path.append(int(nbrs[0]))
        return depth, path[::-1]
    return math.inf, []


def components_after_removal(graph, separator):
    """
    Connected components of G - S.

    Returns
    -------
    list of numpy.ndarray
        Sorted vertex arrays, ordered by their smallest vertex.
    """
    separator = vertex_set(separator, graph.n)
    keep = np.setdiff1d(np.arange(graph.n), separator)
    sub = graph.to_networkx().subgraph(keep.tolist())
    components = [vertex_set(comp) for comp in nx.connected_components(sub)]
    return sorted(components, key=lambda comp: comp[0])


def bipartition(graph):
    """
    Two-coloring of a bipartite graph, or None.

    The smallest vertex of each connected component gets class 0, so the result is
    deterministic.

    Returns
    -------
    tuple of numpy.ndarray or None
        ``(class_0, class_1)`` if the graph is bipartite, None otherwise.
    """
    g = graph.to_networkx()
    try:
        color = nx.bipartite.color(g)
    except nx.NetworkXError:
        return None
    side = np.zeros(graph.n, dtype=bool)
    for comp in nx.connected_components(g):
        root = min(comp)
        for v in comp:
            side[v] = color[v] != color[root]
    return vertex_set(np.flatnonzero(~side)), vertex_set(np.flatnonzero(side))


def is_connected(graph):
    if graph.n == 0:
        return True
    return nx.is_connected(graph.to_networkx())


def write_edge_list(graph, filename):
    """
    Write the ``n m`` header followed by one ``u v`` line per edge (0-based).
    """
    lines = [f"{graph.n} {graph.m}"] + [f"{u} {v}" for u, v in graph.edges.tolist()]
    atomic_write_text(filename, "\n".join(lines) + "\n")


def read_edge_list(filename):
    with open(filename, encoding="utf-8") as fh:
        rows = [line.split() for line in fh if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise ParameterError(f"{filename}: missing 'n m' header")
    n, m = (int(value) for value in rows[0])
    if len(rows) - 1 != m:
        raise ParameterError(f"{filename}: header announces {m} edges, found {len(rows) - 1}")
    return Graph(n, [(int(u), int(v)) for u, v in rows[1:]])


@dataclass
class AnnotatedGraph:
    """
    A graph read from the annotated JSON format.

    Any top-level keys other than ``n``, ``edges``, ``roles`` and ``component`` are kept in
    ``extra``.
    """

    graph: Graph
    roles: dict = field(default_factory=dict)
    component: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def write_annotated_json(filename, graph, roles=None, component=None, extra=None):
    """
    Write a graph with optional vertex roles and component indices as JSON.

    Parameters
    ----------
    filename : str or Path
    graph : Graph
    roles : dict, optional
        Vertex id -> role, with roles from ``ROLES``.
    component : dict, optional
        Vertex id -> component index.
    extra : dict, optional
        Additional top-level entries (e.g. construction parameters).
    """
    data = dict(extra or {})
    data.update(graph.to_dict())
    if roles:
        bad = {role for role in roles.values() if role not in ROLES}
        if bad:
            raise ParameterError(f"unknown vertex roles: {sorted(bad)}")
        data["roles"] = {str(v): roles[v] for v in sorted(roles)}
    if component:
        data["component"] = {str(v): int(component[v]) for v in sorted(component)}
    atomic_write_text(filename, dumps(data))


def read_annotated_json(filename):
    data = read_json(filename)
    try:
        graph = Graph(data.pop("n"), data.pop("edges"))
    except KeyError as exc:
        raise ParameterError(f"{filename}: missing key {exc}") from None
    roles = {int(v): role for v, role in data.pop("roles", {}).items()}
    bad = {role for role in roles.values() if role not in ROLES}
    if bad:
        raise ParameterError(f"{filename}: unknown vertex roles {sorted(bad)}")
    component = {int(v): int(c) for v, c in data.pop("component", {}).items()}
    return AnnotatedGraph(graph=graph, roles=roles, component=component, extra=data)


def read_graph(filename):
    """
    Read a graph in either format, chosen by file suffix (``.json`` or edge list).
    """
    if Path(filename).suffix == ".json":
        return read_annotated_json(filename).graph
    return read_edge_list(filename)


def write_graph(graph, filename):
    if Path(filename).suffix == ".json":
        write_annotated_json(filename, graph)
    else:
        write_edge_list(graph, filename)
