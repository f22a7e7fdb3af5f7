"""
Bandwidth: exact values on small graphs, heuristic orderings, and the short-path lower
bound for H_{r,t} graphs.
"""

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

from sbl.graph import Graph, bfs_distance, vertex_set
from sbl.hrt import HrtGraph
from sbl.utils import LemmaViolation, ParameterError, derive_seed, get_rng, logger

__all__ = [
    "BRUTE_FORCE_MAX",
    "STRATEGIES",
    "Ordering",
    "BandwidthSearchResult",
    "BandwidthBoundReport",
    "ShortPathWitness",
    "ordering_stretch",
    "random_ordering",
    "heuristic_ordering",
    "bandwidth_lower_bounds",
    "bandwidth_search",
    "exact_bandwidth",
    "brute_force_bandwidth",
    "short_path_bound",
    "short_path_witness",
    "probe_set_size",
    "bandwidth_lower_bound",
]

# the all-permutations oracle is limited to this many vertices
BRUTE_FORCE_MAX = 9

STRATEGIES = ("bfs_level", "min_width_greedy")


@dataclass
class Ordering:
    """
    A labelling of the vertices: ``positions[v]`` is the label of vertex ``v``.
    """

    positions: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        n = len(self.positions)
        if not np.array_equal(np.sort(self.positions), np.arange(n)):
            raise ParameterError("ordering positions must be a permutation of 0..n-1")

    @classmethod
    def from_sequence(cls, sequence):
        """
        Ordering that lists ``sequence[0]`` first, ``sequence[1]`` second and so on.
        """
        sequence = np.asarray(list(sequence), dtype=np.int64)
        if not np.array_equal(np.sort(sequence), np.arange(len(sequence))):
            raise ParameterError("ordering sequence must be a permutation of 0..n-1")
        positions = np.empty(len(sequence), dtype=np.int64)
        positions[sequence] = np.arange(len(sequence))
        return cls(positions)

    @property
    def sequence(self):
        return np.argsort(self.positions)

    def __len__(self):
        return len(self.positions)

    def to_dict(self):
        return {"sequence": self.sequence.tolist()}


def ordering_stretch(graph, ordering):
    """
    Largest label difference over the edges; 0 for an edgeless graph.
    """
    if not isinstance(ordering, Ordering):
        ordering = Ordering.from_sequence(ordering)
    if len(ordering) != graph.n:
        raise ParameterError(f"ordering has {len(ordering)} positions for {graph.n} vertices")
    if not graph.m:
        return 0
    pos = ordering.positions
    return int(np.abs(pos[graph.edges[:, 0]] - pos[graph.edges[:, 1]]).max())


def random_ordering(n, seed=0):
    return Ordering.from_sequence(get_rng(seed).permutation(n))


def _min_width_greedy(graph, seed):
    # repeatedly place the unplaced vertex whose earliest placed neighbor is earliest
    rng = get_rng(seed)
    priority = rng.permutation(graph.n)
    key = np.full(graph.n, graph.n, dtype=np.int64)
    placed = np.zeros(graph.n, dtype=bool)
    sequence = []
    for p in range(graph.n):
        free = np.flatnonzero(~placed)
        touched = free[key[free] < graph.n]
        if touched.size:
            best = touched[np.lexsort((priority[touched], key[touched]))[0]]
        else:
            best = free[np.lexsort((priority[free], graph.degrees[free]))[0]]
        placed[best] = True
        sequence.append(int(best))
        nbrs = graph.neighbors(best)
        key[nbrs] = np.minimum(key[nbrs], p)
    return sequence


def heuristic_ordering(graph, strategy="bfs_level", seed=0):
    """
    An ordering with small stretch, as an upper-bound witness.

    Parameters
    ----------
    graph : Graph
    strategy : {"bfs_level", "min_width_greedy"}
        ``bfs_level`` is Cuthill-McKee (BFS layers from a pseudo-peripheral vertex, by
        increasing degree). ``min_width_greedy`` always places the vertex whose earliest
        placed neighbor is earliest, which keeps pending edges short.
    seed : int
        Tie-breaking seed for ``min_width_greedy``.

    Returns
    -------
    ordering : Ordering
    stretch : int
    """
    if strategy == "bfs_level":
        sequence = list(nx.utils.cuthill_mckee_ordering(graph.to_networkx()))
    elif strategy == "min_width_greedy":
        sequence = _min_width_greedy(graph, seed)
    else:
        raise ParameterError(f"unknown ordering strategy {strategy!r}")
    ordering = Ordering.from_sequence(sequence)
    return ordering, ordering_stretch(graph, ordering)


def bandwidth_lower_bounds(graph):
    """
    Simple lower bounds on the bandwidth.

    Returns
    -------
    dict
        ``degree``: ceil(max degree / 2). ``diameter``: max over components C of
        ceil((|C| - 1) / diam(C)).
    """
    bounds = {"degree": -(-graph.max_degree // 2), "diameter": 0}
    g = graph.to_networkx()
    for comp in nx.connected_components(g):
        if len(comp) < 2:
            continue
        diameter = nx.diameter(g.subgraph(comp))
        bounds["diameter"] = max(bounds["diameter"], -(-(len(comp) - 1) // diameter))
    return bounds


class _BudgetExhausted(Exception):
    pass


class _LayoutSearch:
    """
    Decide whether the graph has an ordering of stretch at most ``width``.

    Vertices are placed left to right. Once a neighbor of ``w`` sits at position p, ``w``
    must be placed by position p + width; the pending deadlines, sorted, must leave room
    for one vertex per position.
    """

    def __init__(self, adj, degrees, width, budget):
        self.adj = adj
        self.degrees = degrees
        self.width = width
        self.budget = budget
        self.nodes = 0
        n = len(adj)
        self.deadline = [math.inf] * n
        self.unplaced = set(range(n))
        self.sequence = []

    def run(self):
        return self._place(0)

    def _place(self, p):
        if not self.unplaced:
            return True
        pending = sorted(
            (self.deadline[w], w) for w in self.unplaced if self.deadline[w] < math.inf
        )
        for i, (d, _) in enumerate(pending):
            if d < p + i:
                return False
        if pending and pending[0][0] == p:
            candidates = [pending[0][1]]
        else:
            candidates = sorted(
                self.unplaced, key=lambda w: (self.deadline[w], self.degrees[w], w)
            )
        for v in candidates:
            self.nodes += 1
            if self.nodes > self.budget:
                raise _BudgetExhausted
            self.unplaced.remove(v)
            self.sequence.append(v)
            touched = [
                w for w in self.adj[v] if w in self.unplaced and self.deadline[w] == math.inf
            ]
            for w in touched:
                self.deadline[w] = p + self.width
            if self._place(p + 1):
                return True
            for w in touched:
                self.deadline[w] = math.inf
            self.sequence.pop()
            self.unplaced.add(v)
        return False


@dataclass
class BandwidthSearchResult:
    value: int | None
    lower: int
    upper: int
    nodes: int
    complete: bool
    ordering: Ordering | None = field(default=None, repr=False)


def bandwidth_search(graph, node_limit=1_000_000):
    """
    Branch and bound for the exact bandwidth.

    Widths are tried upwards from the best simple lower bound; the heuristic orderings give
    the initial upper bound. When the node budget runs out the result is incomplete and
    ``value`` is None, with the bounds proven so far.

    Returns
    -------
    BandwidthSearchResult
    """
    if graph.m == 0:
        return BandwidthSearchResult(0, 0, 0, 0, True, Ordering(np.arange(graph.n)))
    lower = max(bandwidth_lower_bounds(graph).values())
    best_ordering, upper = min(
        (heuristic_ordering(graph, strategy) for strategy in STRATEGIES),
        key=lambda item: item[1],
    )
    adj = [graph.neighbors(v).tolist() for v in range(graph.n)]
    degrees = graph.degrees.tolist()
    nodes = 0
    while lower < upper:
        search = _LayoutSearch(adj, degrees, lower, node_limit - nodes)
        try:
            found = search.run()
        except _BudgetExhausted:
            logger.debug(f"bandwidth search stopped with bounds [{lower}, {upper}]")
            return BandwidthSearchResult(None, lower, upper, node_limit, False, best_ordering)
        nodes += search.nodes
        if found:
            upper = lower
            best_ordering = Ordering.from_sequence(search.sequence)
        else:
            lower += 1
    return BandwidthSearchResult(upper, upper, upper, nodes, True, best_ordering)


def exact_bandwidth(graph, node_limit=1_000_000):
    """
    Exact bandwidth, or None if the search exceeds ``node_limit`` nodes.
    """
    return bandwidth_search(graph, node_limit).value


@functools.cache
def _permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int8).reshape(-1, n)


def brute_force_bandwidth(graph):
    """
    Minimum stretch over all n! orderings (oracle for tiny graphs).
    """
    if graph.n > BRUTE_FORCE_MAX:
        raise ParameterError(f"brute force limited to {BRUTE_FORCE_MAX} vertices")
    if graph.m == 0:
        return 0
    perms = _permutations(graph.n)
    stretch = np.abs(perms[:, graph.edges[:, 0]] - perms[:, graph.edges[:, 1]]).max(axis=1)
    return int(stretch.min())


@dataclass
class ShortPathWitness:
    x: int
    y: int
    path: list
    length: int
    x_set_size: int
    y_set_size: int


def short_path_bound(t):
    return 2 * t + 4


def probe_set_size(n):
    """
    floor(0.35 n), the size of the prefix and suffix sets.
    """
    return 7 * n // 20


def short_path_witness(hrt, xs, ys):
    """
    A shortest path between two large disjoint vertex sets of an H_{r,t} graph.

    Any two disjoint sets of at least 0.35n vertices are within distance 2t + 4 in a valid
    H, so a longer (or missing) path raises ``LemmaViolation``.

    Parameters
    ----------
    hrt : HrtGraph
    xs, ys : iterable of int
        Disjoint sets with at least floor(0.35 n) vertices each.

    Returns
    -------
    ShortPathWitness
    """
    graph = hrt.graph
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    size = probe_set_size(graph.n)
    if len(xs) < size or len(ys) < size:
        raise ParameterError(f"sets must have at least {size} vertices, got {len(xs)}, {len(ys)}")
    if np.intersect1d(xs, ys).size:
        raise ParameterError("short_path_witness needs disjoint sets")
    distance, path = bfs_distance(graph, xs, ys)
    bound = short_path_bound(hrt.params.t)
    if distance > bound:
        raise LemmaViolation(f"sets at distance {distance} > 2t + 4 = {bound}")
    return ShortPathWitness(
        x=path[0],
        y=path[-1],
        path=path,
        length=distance,
        x_set_size=len(xs),
        y_set_size=len(ys),
    )


@dataclass
class BandwidthBoundReport:
    """
    Certified bandwidth bounds for an H_{r,t} graph.

    ``lower_bound`` is ceil(0.3 n / (2t + 4)). Every probed ordering was checked to stretch
    some edge of a short prefix-to-suffix path by at least that much.
    """

    n: int
    lower_bound: int
    lower_provenance: str
    upper_bound: int
    upper_witness: Ordering = field(repr=False)
    upper_strategy: str
    exact: int | None = None
    t_used: int | None = None
    probes: int = 0
    min_probe_stretch: int | None = None
    max_witness_length: int = 0

    def __post_init__(self):
        if self.lower_bound > self.upper_bound:
            raise LemmaViolation(f"lower bound {self.lower_bound} > upper {self.upper_bound}")
        if self.exact is not None and not self.lower_bound <= self.exact <= self.upper_bound:
            raise LemmaViolation(f"exact bandwidth {self.exact} outside the bounds")


def bandwidth_lower_bound(hrt, orderings_to_probe=10, seed=0):
    """
    Certify bw(H) >= ceil(0.3 n / (2t + 4)) and probe the argument on concrete orderings.

    For each probed ordering (random ones plus every heuristic) the first and last
    floor(0.35 n) vertices are joined by a short-path witness; its endpoints are at least
    0.3 n positions apart over at most 2t + 4 edges, so one of its edges must be stretched
    by the bound. A probe that does not is a ``LemmaViolation``.

    Parameters
    ----------
    hrt : HrtGraph
    orderings_to_probe : int
        Number of random orderings, in addition to the heuristic ones.
    seed : int

    Returns
    -------
    BandwidthBoundReport
    """
    if not isinstance(hrt, HrtGraph):
        raise ParameterError("bandwidth_lower_bound needs an HrtGraph")
    graph: Graph = hrt.graph
    n, t = graph.n, hrt.params.t
    lower = math.ceil(Fraction(3 * n, 10 * short_path_bound(t)))
    size = probe_set_size(n)

    probes = [
        ("random", random_ordering(n, derive_seed(seed, i))) for i in range(orderings_to_probe)
    ]
    heuristics = []
    for strategy in STRATEGIES:
        ordering, stretch = heuristic_ordering(graph, strategy, seed=derive_seed(seed, 1_000_000))
        heuristics.append((stretch, strategy, ordering))
        probes.append((strategy, ordering))

    min_probe = None
    max_length = 0
    for name, ordering in probes:
        sequence = ordering.sequence
        witness = short_path_witness(hrt, sequence[:size], sequence[n - size :])
        pos = ordering.positions[witness.path]
        along = int(np.abs(np.diff(pos)).max())
        if along < lower:
            raise LemmaViolation(
                f"{name} ordering stretches the witness path by {along} < {lower}"
            )
        min_probe = along if min_probe is None else min(min_probe, along)
        max_length = max(max_length, witness.length)

    upper, strategy, witness_ordering = min(heuristics, key=lambda item: item[0])
    logger.info(f"bandwidth of H (n={n}, t={t}) in [{lower}, {upper}]")
    return BandwidthBoundReport(
        n=n,
        lower_bound=lower,
        lower_provenance="short_path_certificate",
        upper_bound=upper,
        upper_witness=witness_ordering,
        upper_strategy=strategy,
        t_used=t,
        probes=len(probes),
        min_probe_stretch=min_probe,
        max_witness_length=max_length,
    )
