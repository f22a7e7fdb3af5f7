"""
Exact (non-induced) subgraph embedding on small graphs.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from sbl.utils import LemmaViolation, ParameterError

__all__ = [
    "EMBEDS",
    "DOES_NOT_EMBED",
    "INCONCLUSIVE",
    "EmbedResult",
    "EmbeddingMap",
    "guest_order",
    "verify_embedding",
    "exact_embed",
    "all_injections_embed",
]

EMBEDS = "embeds"
DOES_NOT_EMBED = "does_not_embed"
INCONCLUSIVE = "inconclusive"


@dataclass
class EmbeddingMap:
    """
    An injective map guest vertex -> host vertex.

    ``verified`` is set only after ``verify_embedding`` accepted the map.
    """

    map: np.ndarray
    verified: bool = False
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {"map": self.map, "verified": self.verified, "stats": self.stats}


@dataclass
class EmbedResult:
    status: str
    mapping: np.ndarray | None = field(default=None, repr=False)
    nodes: int = 0

    @property
    def embeds(self):
        return self.status == EMBEDS


def verify_embedding(guest, host, mapping):
    """
    Check that ``mapping`` is an injective edge-preserving map from guest into host.

    Parameters
    ----------
    guest, host : Graph
    mapping : sequence or dict
        ``mapping[v]`` is the host image of guest vertex ``v``.

    Returns
    -------
    ok : bool
    violation : str or None
        Description of the first problem found.
    """
    if isinstance(mapping, dict):
        if sorted(mapping) != list(range(guest.n)):
            return False, "mapping does not cover every guest vertex"
        mapping = [mapping[v] for v in range(guest.n)]
    mapping = np.asarray(mapping, dtype=np.int64)
    if mapping.shape != (guest.n,):
        return False, f"mapping has shape {mapping.shape}, expected ({guest.n},)"
    if guest.n and (mapping.min() < 0 or mapping.max() >= host.n):
        return False, "mapping leaves the host vertex range"
    values, counts = np.unique(mapping, return_counts=True)
    if np.any(counts > 1):
        return False, f"host vertex {values[counts > 1][0]} is used twice"
    matrix = host.adjacency_matrix()
    images = mapping[guest.edges]
    missing = ~matrix[images[:, 0], images[:, 1]] if guest.m else np.zeros(0, dtype=bool)
    if np.any(missing):
        u, v = guest.edges[np.flatnonzero(missing)[0]]
        return False, f"guest edge ({u}, {v}) maps to a non-edge"
    return True, None


def _twin_classes(host):
    # closed twins (N[u] = N[v]) first, open twins (N(u) = N(v)) for the rest
    closed = {}
    for v in range(host.n):
        closed.setdefault(frozenset(host.neighbors(v).tolist()) | {v}, []).append(v)
    label = np.arange(host.n)
    for members in closed.values():
        label[members] = members[0]
    open_ = {}
    for v in range(host.n):
        if label[v] == v and len(closed[frozenset(host.neighbors(v).tolist()) | {v}]) == 1:
            open_.setdefault(frozenset(host.neighbors(v).tolist()), []).append(v)
    for members in open_.values():
        label[members] = members[0]
    return label.tolist()


def guest_order(guest):
    # connectivity first: every vertex after the first of its component has a placed neighbor
    order = []
    placed = np.zeros(guest.n, dtype=bool)
    links = np.zeros(guest.n, dtype=np.int64)
    while len(order) < guest.n:
        free = np.flatnonzero(~placed)
        linked = free[links[free] > 0]
        pool = linked if linked.size else free
        v = int(pool[np.lexsort((pool, -guest.degrees[pool], -links[pool]))[0]])
        order.append(v)
        placed[v] = True
        links[guest.neighbors(v)] += 1
    return order


class _Budget(Exception):
    pass


class _EmbedSearch:
    def __init__(self, guest, host, node_limit):
        self.guest = guest
        self.host = host
        self.node_limit = node_limit
        self.nodes = 0
        self.order = guest_order(guest)
        index = {v: i for i, v in enumerate(self.order)}
        self.back = [
            [int(u) for u in guest.neighbors(v) if index[u] < index[v]] for v in self.order
        ]
        self.forward_count = [
            sum(index[u] > index[v] for u in guest.neighbors(v)) for v in self.order
        ]
        self.host_nbrs = [set(host.neighbors(v).tolist()) for v in range(host.n)]
        self.host_deg = host.degrees.tolist()
        self.twin = _twin_classes(host)
        self.image = [-1] * guest.n
        self.used = set()

    def run(self):
        return self._extend(0)

    def _candidates(self, i):
        back = self.back[i]
        if back:
            sets = sorted((self.host_nbrs[self.image[u]] for u in back), key=len)
            pool = set.intersection(*sets) - self.used
        else:
            pool = set(range(self.host.n)) - self.used
        need = self.guest.degree(self.order[i])
        forward = self.forward_count[i]
        seen_twins = set()
        result = []
        for c in sorted(pool):
            if self.host_deg[c] < need:
                continue
            if forward and len(self.host_nbrs[c] - self.used) < forward:
                continue
            if self.twin[c] in seen_twins:
                continue
            seen_twins.add(self.twin[c])
            result.append(c)
        return result

    def _extend(self, i):
        if i == len(self.order):
            return True
        v = self.order[i]
        for c in self._candidates(i):
            self.nodes += 1
            if self.nodes > self.node_limit:
                raise _Budget
            self.image[v] = c
            self.used.add(c)
            if self._extend(i + 1):
                return True
            self.used.remove(c)
            self.image[v] = -1
        return False


def exact_embed(guest, host, node_limit=1_000_000):
    """
    Decide whether ``guest`` is a (not necessarily induced) subgraph of ``host``.

    Backtracking over a connectivity-first guest order. Candidates for a guest vertex are
    the common host neighbors of its already placed neighbors, filtered by degree and by
    room for its unplaced neighbors. Only one unused vertex of each host twin class is
    tried, since twins are interchangeable.

    Parameters
    ----------
    guest, host : Graph
    node_limit : int
        Maximum number of partial assignments.

    Returns
    -------
    EmbedResult
        ``does_not_embed`` is returned only after the search space is exhausted;
        ``inconclusive`` when the node limit is reached first.
    """
    if guest.n > host.n or guest.m > host.m:
        return EmbedResult(DOES_NOT_EMBED)
    guest_deg = np.sort(guest.degrees)[::-1]
    host_deg = np.sort(host.degrees)[::-1][: guest.n]
    if np.any(guest_deg > host_deg):
        return EmbedResult(DOES_NOT_EMBED)

    search = _EmbedSearch(guest, host, node_limit)
    try:
        found = search.run()
    except _Budget:
        return EmbedResult(INCONCLUSIVE, nodes=search.nodes)
    if not found:
        return EmbedResult(DOES_NOT_EMBED, nodes=search.nodes)
    mapping = np.array(search.image, dtype=np.int64)
    ok, violation = verify_embedding(guest, host, mapping)
    if not ok:
        raise LemmaViolation(f"embedding search returned an invalid map: {violation}")
    return EmbedResult(EMBEDS, mapping, search.nodes)


def all_injections_embed(guest, host, max_guest=7):
    """
    Naive oracle: try every injective map.
    """
    if guest.n > max_guest:
        raise ParameterError(f"all_injections_embed is limited to {max_guest} guest vertices")
    if guest.n > host.n:
        return False
    matrix = host.adjacency_matrix()
    us, vs = guest.edges[:, 0], guest.edges[:, 1]
    for images in itertools.permutations(range(host.n), guest.n):
        images = np.asarray(images)
        if np.all(matrix[images[us], images[vs]]):
            return True
    return False
