"""
Assignment of the guest's components to clusters.

Components of H - S are spread over the matching edges of the reduced graph, first vertices
whose separator neighbor landed badly are moved to better clusters, and leaves are shifted
until every cluster holds exactly as many guest vertices as its target.
"""

from dataclasses import dataclass, field

import numpy as np

from sbl.embedding.checks import StageLog
from sbl.utils import EmbeddingFailed, HostDegreeError, ParameterError, get_rng, logger

__all__ = [
    "AssignmentState",
    "AssignmentReport",
    "cluster_targets",
    "assign_components",
    "reassign_first_vertices",
    "rebalance_leaves",
    "typical_vertices",
]


@dataclass
class AssignmentState:
    """
    Where every guest vertex is headed.

    Parameters
    ----------
    cluster_of : numpy.ndarray
        Cluster index of every guest vertex, -1 on the separator S.
    image_of : dict
        Host image of every separator vertex.
    restrictions : dict
        Guest vertex -> allowed host vertices (the sets T_x), inside its cluster.
    ell : int
        Number of clusters.
    reassigned : numpy.ndarray
        First vertices moved into each cluster.
    moved_in : numpy.ndarray
        Leaves moved into each cluster.
    """

    cluster_of: np.ndarray
    image_of: dict
    ell: int
    restrictions: dict = field(default_factory=dict)
    reassigned: np.ndarray = None
    moved_in: np.ndarray = None

    def __post_init__(self):
        if self.reassigned is None:
            self.reassigned = np.zeros(self.ell, dtype=np.int64)
        if self.moved_in is None:
            self.moved_in = np.zeros(self.ell, dtype=np.int64)
        images = list(self.image_of.values())
        if len(set(images)) != len(images):
            raise ParameterError("separator images must be distinct")

    @property
    def load(self):
        assigned = self.cluster_of[self.cluster_of >= 0]
        return np.bincount(assigned, minlength=self.ell)

    def restriction_counts(self):
        counts = np.zeros(self.ell, dtype=np.int64)
        for x in self.restrictions:
            counts[self.cluster_of[x]] += 1
        return counts

    def to_dict(self):
        return {
            "cluster_of": self.cluster_of,
            "image_of": self.image_of,
            "restrictions": {x: len(allowed) for x, allowed in self.restrictions.items()},
            "load": self.load,
            "reassigned": self.reassigned,
            "moved_in": self.moved_in,
        }


@dataclass
class AssignmentReport:
    edge_loads: list
    expected: list
    attempts: int
    accepted: int
    imbalance: int


def cluster_targets(sizes, guest_count):
    """
    Number of guest vertices each cluster should receive.

    When the host has more room than the guest needs, the surplus is taken away from the
    largest clusters first so targets stay as even as possible.
    """
    targets = np.asarray(sizes, dtype=np.int64).copy()
    surplus = int(targets.sum()) - guest_count
    if surplus < 0:
        raise ParameterError(
            f"clusters hold {targets.sum()} vertices, the guest needs {guest_count}"
        )
    for _ in range(surplus):
        targets[np.argmax(targets)] -= 1
    return targets


def _side_counts(t, D):
    # guest vertices a component puts on the first / second side of its matching edge
    path_first = (t + 1) // 2
    leaves_first = D - 1 if t % 2 == 0 else 0
    first = path_first + leaves_first
    return first, t + D - 1 - first


def assign_components(
    hrt, reduced, seed=0, slack=0.1, retries=2000, keep=50, targets=None, image_of=None
):
    """
    Send every component of H - S to a uniformly random matching edge with a random flip.

    Path vertices alternate between the two clusters of the edge starting with the first
    vertex; leaves sit opposite the last vertex. A draw is accepted when every edge load is
    within ``slack`` of its expected share; among the first ``keep`` accepted draws the one
    closest to the cluster targets is kept.

    Returns
    -------
    state : AssignmentState
    report : AssignmentReport
    """
    matching = np.asarray(reduced.matching, dtype=np.int64).reshape(-1, 2)
    if not len(matching):
        raise ParameterError("assign_components needs a non-empty matching")
    ell = reduced.partition.ell
    params = hrt.params
    components = hrt.components
    guest_count = hrt.n - len(hrt.separator)
    if targets is None:
        targets = cluster_targets(reduced.partition.sizes, guest_count)
    targets = np.asarray(targets, dtype=np.int64)
    edge_capacity = targets[matching[:, 0]] + targets[matching[:, 1]]
    expected = guest_count * edge_capacity / edge_capacity.sum()
    first, second = _side_counts(params.t, params.D)
    size = params.component_size

    best = None
    accepted = 0
    attempts = 0
    edge_loads = np.zeros(len(matching))
    for attempt in range(retries):
        attempts = attempt + 1
        rng = get_rng(seed, attempt)
        edges = rng.integers(len(matching), size=len(components))
        flips = rng.integers(2, size=len(components))
        edge_loads = np.bincount(edges, minlength=len(matching)) * size
        if np.any(np.abs(edge_loads - expected) > slack * expected):
            continue
        accepted += 1
        near = matching[edges, flips]
        far = matching[edges, 1 - flips]
        load = np.bincount(near, minlength=ell) * first + np.bincount(far, minlength=ell) * second
        imbalance = int(np.abs(load - targets).sum())
        if best is None or imbalance < best[0]:
            best = (imbalance, near, far, edge_loads)
        if accepted >= keep:
            break
    if best is None:
        raise EmbeddingFailed(
            f"no assignment within the {slack:.0%} load window after {retries} draws",
            {"edge_loads": edge_loads, "expected": expected, "retries": retries},
        )

    imbalance, near, far, edge_loads = best
    cluster_of = np.full(hrt.n, -1, dtype=np.int64)
    for comp, a, b in zip(components, near, far, strict=True):
        sides = (a, b)
        for i, v in enumerate(comp.path):
            cluster_of[v] = sides[i % 2]
        cluster_of[list(comp.leaves)] = sides[params.t % 2]
    state = AssignmentState(cluster_of=cluster_of, image_of=dict(image_of or {}), ell=ell)
    logger.info(
        f"assigned {len(components)} components to {len(matching)} matching edges "
        f"({accepted} accepted of {attempts} draws, imbalance {imbalance})"
    )
    report = AssignmentReport(
        edge_loads=edge_loads.tolist(),
        expected=expected.tolist(),
        attempts=attempts,
        accepted=accepted,
        imbalance=imbalance,
    )
    return state, report


def _neighbors_per_cluster(graph, v, partition):
    row = graph.adjacency_matrix()[v]
    return np.array([row[cluster].sum() for cluster in partition.clusters], dtype=np.int64)


def reassign_first_vertices(
    hrt,
    state,
    graph,
    reduced,
    gamma,
    threshold=None,
    cap=None,
    premise=False,
    log=None,
):
    """
    Make sure every first vertex can reach the image of its separator neighbor.

    For a first vertex y whose separator neighbor x sits on host vertex v: when v has fewer
    than ``threshold`` (3 gamma^(2/3) m) neighbors in C(y), y moves to a cluster W_j where
    v has at least that many neighbors and which is adjacent in the reduced graph to the
    partner of C(y). Picks go to the least-reassigned cluster first. Every first vertex
    ends up restricted to T_y = N(v) & C(y).

    ``state`` is updated in place and returned.
    """
    log = log or StageLog("reassign_first")
    partition = reduced.partition
    ell, m = partition.ell, partition.m
    threshold = 3 * gamma ** (2 / 3) * m if threshold is None else threshold
    cap = gamma ** (2 / 3) * m if cap is None else cap
    partner = reduced.partner
    r_matrix = reduced.graph.adjacency_matrix()
    host_matrix = graph.adjacency_matrix()
    smallest_l = None
    for comp in hrt.components:
        y = comp.first
        v = state.image_of[comp.anchor]
        current = state.cluster_of[y]
        counts = _neighbors_per_cluster(graph, v, partition)
        if counts[current] < threshold:
            choices = np.flatnonzero(counts >= threshold)
            smallest_l = len(choices) if smallest_l is None else min(smallest_l, len(choices))
            options = choices[r_matrix[choices, partner[current]]]
            if not options.size:
                raise HostDegreeError(
                    f"first vertex {y}: no cluster with {threshold:.1f} neighbors of host "
                    f"vertex {v} is adjacent to cluster {partner[current]}"
                )
            target = options[np.argmin(state.reassigned[options])]
            logger.debug(f"first vertex {y} moves from cluster {current} to {target}")
            state.cluster_of[y] = target
            state.reassigned[target] += 1
            current = target
        cluster = partition.clusters[current]
        state.restrictions[y] = cluster[host_matrix[v, cluster]]

    if smallest_l is not None:
        log.record(
            "choices",
            smallest_l >= 2 * gamma ** (1 / 3) * ell,
            smallest_l,
            2 * gamma ** (1 / 3) * ell,
            guaranteed=premise,
            error=HostDegreeError,
        )
        log.record(
            "choices_half",
            smallest_l >= ell / 2,
            smallest_l,
            ell / 2,
            guaranteed=premise,
            error=HostDegreeError,
        )
    log.record(
        "reassignment_cap",
        state.reassigned.max() <= cap,
        int(state.reassigned.max()),
        cap,
        guaranteed=premise,
    )
    log.data.update({"threshold": threshold, "reassigned": state.reassigned, "min_l": smallest_l})
    logger.info(f"reassigned {state.reassigned.sum()} first vertices")
    return state


def typical_vertices(graph, cluster, other, delta):
    """
    Vertices of ``cluster`` with at least delta |other| neighbors in ``other``.
    """
    degree = graph.adjacency_matrix()[np.ix_(cluster, other)].sum(axis=1)
    return cluster[degree >= delta * len(other)]


class _LeafMover:
    def __init__(self, hrt, state, graph, reduced, delta):
        self.state = state
        self.graph = graph
        self.partition = reduced.partition
        self.r_matrix = reduced.graph.adjacency_matrix()
        self.delta = delta
        self.parent = {leaf: comp.last for comp in hrt.components for leaf in comp.leaves}
        self.leaves = np.array(sorted(self.parent), dtype=np.int64)
        self._typical = {}

    def last_cluster(self, leaves):
        return self.state.cluster_of[[self.parent[leaf] for leaf in leaves]]

    def movable(self, source, target):
        # leaves of ``source`` whose last vertex's cluster is adjacent to ``target``
        leaves = self.leaves[self.state.cluster_of[self.leaves] == source]
        if not leaves.size:
            return leaves
        return leaves[self.r_matrix[self.last_cluster(leaves), target]]

    def move(self, leaves, target):
        for leaf in leaves:
            home = self.state.cluster_of[self.parent[leaf]]
            key = (target, home)
            if key not in self._typical:
                self._typical[key] = typical_vertices(
                    self.graph,
                    self.partition.clusters[target],
                    self.partition.clusters[home],
                    self.delta,
                )
            self.state.cluster_of[leaf] = target
            self.state.restrictions[leaf] = self._typical[key]
        self.state.moved_in[target] += len(leaves)


def rebalance_leaves(
    hrt,
    state,
    graph,
    reduced,
    delta,
    targets=None,
    gamma=None,
    cap=None,
    premise=False,
    log=None,
):
    """
    Move leaves until every cluster holds exactly its target number of guest vertices.

    The cluster with the largest surplus is paired with the one with the largest deficit.
    Leaves go directly when their last vertex's cluster is adjacent to the deficit cluster,
    otherwise through a matching edge W_p W_q with the first hop into W_p and the second
    hop from W_p (leaves whose last vertex is in W_q) into the deficit cluster. A moved leaf
    is restricted to the typical vertices of its new cluster.

    ``state`` is updated in place and returned.
    """
    log = log or StageLog("rebalance_leaves")
    partition = reduced.partition
    params = hrt.params
    targets = partition.sizes if targets is None else np.asarray(targets, dtype=np.int64)
    if state.load.sum() != targets.sum():
        raise ParameterError(
            f"guest has {state.load.sum()} vertices to place, targets sum to {targets.sum()}"
        )
    mover = _LeafMover(hrt, state, graph, reduced, delta)
    m = partition.m
    if gamma is not None:
        supply = np.bincount(state.cluster_of[mover.leaves], minlength=partition.ell)
        bound = (params.D - 1) * (1 - gamma) * m / (2 * params.component_size)
        log.record(
            "leaf_supply", supply.min() >= bound, int(supply.min()), bound, guaranteed=premise
        )

    # intermediate clusters of the two-hop route, in matching order
    relays = [p for pair in reduced.matching for p in pair]
    two_hop = 0
    while True:
        diff = state.load - targets
        if not diff.any():
            break
        source = int(np.argmax(diff))
        sink = int(np.argmin(diff))
        amount = int(min(diff[source], -diff[sink]))
        direct = mover.movable(source, sink)
        if direct.size:
            moved = direct[:amount]
            mover.move(moved, sink)
            logger.debug(f"moved {len(moved)} leaves from cluster {source} to {sink}")
            continue
        if not mover.leaves[state.cluster_of[mover.leaves] == source].size:
            raise ParameterError(
                f"cluster {source} is over its target but holds no leaves "
                f"(D={params.D}, t={params.t}, m={m})"
            )
        for p in relays:
            if p in (source, sink):
                continue
            first_hop = mover.movable(source, p)
            second_hop = mover.movable(p, sink)
            count = min(amount, len(first_hop), len(second_hop))
            if count:
                mover.move(second_hop[:count], sink)
                mover.move(first_hop[:count], p)
                two_hop += 1
                logger.debug(
                    f"moved {count} leaves from cluster {source} to {p} and {count} from "
                    f"{p} to {sink}"
                )
                break
        else:
            raise HostDegreeError(
                f"no route for leaves from cluster {source} to cluster {sink} in the "
                "reduced graph"
            )

    log.record("exact_fill", np.array_equal(state.load, targets), state.load, targets)
    if gamma is not None:
        cap = gamma ** (2 / 3) * m if cap is None else cap
    if cap is not None:
        log.record(
            "leaf_move_cap",
            state.moved_in.max() <= cap,
            int(state.moved_in.max()),
            cap,
            guaranteed=premise,
        )
    log.data.update({"moved_in": state.moved_in, "two_hop_routes": two_hop})
    logger.info(f"moved {state.moved_in.sum()} leaves, {two_hop} two-hop route(s)")
    return state
