"""
Greedy stand-in for the blow-up step.

Components of H - S are bounded-size trees. Their paths are placed one component at a time
by a randomized search with short backtracking; the leaves of every cluster are then placed
together with a bipartite maximum matching. Success is always confirmed by
``verify_embedding``.
"""

import networkx as nx
import numpy as np

from sbl.embedding.checks import StageLog
from sbl.subgraph import EmbeddingMap, verify_embedding
from sbl.utils import EmbeddingFailed, LemmaViolation, ParameterError, get_rng, logger

__all__ = ["check_restrictions", "blowup_embed"]


def check_restrictions(state, partition, c, alpha, log=None):
    """
    Validate the restriction sets before any placement.

    Every T_x must lie in the cluster of x and hold at least c |W| vertices, and a cluster
    may carry at most alpha |W| restricted guest vertices.
    """
    log = log or StageLog("restrictions")
    sizes = partition.sizes
    smallest = None
    for x, allowed in state.restrictions.items():
        cluster = state.cluster_of[x]
        if not np.isin(allowed, partition.clusters[cluster]).all():
            raise ParameterError(f"restriction set of guest vertex {x} leaves cluster {cluster}")
        ratio = len(allowed) / sizes[cluster]
        smallest = ratio if smallest is None else min(smallest, ratio)
    if smallest is not None:
        log.record("restriction_size", smallest >= c, smallest, c, error=ParameterError)
    counts = state.restriction_counts()
    worst = float((counts / sizes).max()) if len(sizes) else 0.0
    log.record("restriction_count", worst <= alpha, worst, alpha, error=ParameterError)
    load = state.load
    log.record(
        "cluster_capacity",
        np.all(load <= sizes),
        load,
        sizes,
        error=ParameterError,
        detail="more guest vertices than host vertices in a cluster",
    )
    return log


class _Placement:
    def __init__(self, hrt, state, graph, partition, rng, branch):
        self.hrt = hrt
        self.state = state
        self.matrix = graph.adjacency_matrix()
        self.rng = rng
        self.branch = branch
        n = graph.n
        self.cluster_mask = np.zeros((partition.ell, n), dtype=bool)
        for i, cluster in enumerate(partition.clusters):
            self.cluster_mask[i, cluster] = True
        self.restriction_mask = {}
        for x, allowed in state.restrictions.items():
            mask = np.zeros(n, dtype=bool)
            mask[allowed] = True
            self.restriction_mask[x] = mask
        self.free = np.ones(n, dtype=bool)
        self.image = np.full(hrt.n, -1, dtype=np.int64)
        for x, v in state.image_of.items():
            self.image[x] = v
            self.free[v] = False
        self.dead_ends = 0

    def candidates(self, v, parent_image):
        mask = self.free & self.cluster_mask[self.state.cluster_of[v]]
        mask &= self.matrix[parent_image]
        if v in self.restriction_mask:
            mask &= self.restriction_mask[v]
        return np.flatnonzero(mask)

    def room(self, candidates, needs):
        # candidates keeping enough free neighbors for every cluster of their children
        keep = np.ones(len(candidates), dtype=bool)
        rows = self.matrix[candidates] & self.free
        for cluster, count in needs.items():
            keep &= (rows & self.cluster_mask[cluster]).sum(axis=1) >= count
        return candidates[keep]

    def place_path(self, comp):
        anchor_image = self.image[comp.anchor]
        leaves = list(comp.leaves)
        leaf_needs = {}
        for cluster in self.state.cluster_of[leaves]:
            leaf_needs[cluster] = leaf_needs.get(cluster, 0) + 1
        path = comp.path
        needs = [
            {self.state.cluster_of[path[i + 1]]: 1} if i + 1 < len(path) else leaf_needs
            for i in range(len(path))
        ]
        return self._extend(path, needs, 0, anchor_image)

    def _extend(self, path, needs, i, parent_image):
        if i == len(path):
            return True
        v = path[i]
        options = self.room(self.candidates(v, parent_image), needs[i])
        if not options.size:
            self.dead_ends += 1
            return False
        for c in self.rng.permutation(options)[: self.branch]:
            self.image[v] = c
            self.free[c] = False
            if self._extend(path, needs, i + 1, c):
                return True
            self.free[c] = True
            self.image[v] = -1
        return False

    def release(self, comp):
        for v in comp.path:
            if self.image[v] >= 0:
                self.free[self.image[v]] = True
                self.image[v] = -1

    def place_leaves(self, cluster, leaves, parent):
        graph = nx.Graph()
        top = [("guest", int(x)) for x in leaves]
        graph.add_nodes_from(top)
        for x in leaves:
            for h in self.candidates(x, self.image[parent[x]]):
                graph.add_edge(("guest", int(x)), ("host", int(h)))
        matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=top)
        unmatched = [x for x in leaves if ("guest", int(x)) not in matching]
        if unmatched:
            return len(unmatched)
        for x in leaves:
            h = matching[("guest", int(x))][1]
            self.image[x] = h
            self.free[h] = False
        return 0


def _occupancy(state, partition, placement):
    used = [int((~placement.free[cluster]).sum()) for cluster in partition.clusters]
    return {"cluster_size": partition.sizes, "used": used, "load": state.load}


def blowup_embed(
    hrt,
    state,
    graph,
    partition,
    c=0.2,
    alpha=0.5,
    seed=0,
    reseeds=5,
    restarts=20,
    branch=8,
):
    """
    Place every component of H - S inside its assigned clusters.

    Components go in decreasing size. Each path is rooted at its first vertex (inside its
    restriction set, next to the image of its anchor) and extended vertex by vertex on a
    random unused common candidate, backtracking over at most ``branch`` choices per path
    position and restarting the component up to ``restarts`` times. Leaves are then matched
    to the free vertices of their cluster. Any failure reseeds the whole placement.

    Parameters
    ----------
    hrt : HrtGraph
    state : AssignmentState
        Separator images, clusters and restriction sets.
    graph : Graph
        Host.
    partition : RegularPartition
    c, alpha : float
        Minimum restriction-set fraction and maximum restricted fraction per cluster.
    seed : int
    reseeds, restarts, branch : int

    Returns
    -------
    EmbeddingMap
    """
    log = check_restrictions(state, partition, c, alpha)
    components = sorted(hrt.components, key=lambda comp: (-len(comp.vertices), comp.index))
    parent = {leaf: comp.last for comp in hrt.components for leaf in comp.leaves}
    leaves_by_cluster = {}
    for leaf in sorted(parent):
        leaves_by_cluster.setdefault(int(state.cluster_of[leaf]), []).append(leaf)

    stats = {"reseeds": 0, "dead_ends": 0, "failed_stage": None}
    for attempt in range(reseeds):
        stats["reseeds"] = attempt + 1
        placement = _Placement(hrt, state, graph, partition, get_rng(seed, attempt), branch)
        failed = None
        for comp in components:
            for _ in range(restarts):
                if placement.place_path(comp):
                    break
                placement.release(comp)
            else:
                failed = f"path of component {comp.index}"
                break
        if failed is None:
            for cluster, leaves in sorted(leaves_by_cluster.items()):
                missing = placement.place_leaves(cluster, leaves, parent)
                if missing:
                    failed = f"{missing} leaves of cluster {cluster}"
                    break
        stats["dead_ends"] += placement.dead_ends
        if failed is not None:
            stats["failed_stage"] = failed
            stats["occupancy"] = _occupancy(state, partition, placement)
            logger.debug(f"blow-up attempt {attempt} failed at {failed}")
            continue

        ok, violation = verify_embedding(hrt.graph, graph, placement.image)
        if not ok:
            raise LemmaViolation(f"blow-up produced an invalid map: {violation}")
        stats["checks"] = log.checks
        logger.info(f"blow-up placed {hrt.n} guest vertices after {attempt + 1} attempt(s)")
        return EmbeddingMap(map=placement.image, verified=True, stats=stats)
    raise EmbeddingFailed(f"blow-up failed after {reseeds} attempts", stats)
