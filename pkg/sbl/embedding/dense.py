"""
Greedy embedding of a bounded-degree bipartite graph into a dense host.
"""

import math

import numpy as np

from sbl.embedding.checks import StageLog
from sbl.graph import bipartition
from sbl.subgraph import EmbeddingMap, guest_order, verify_embedding
from sbl.utils import EmbeddingFailed, LemmaViolation, ParameterError, get_rng, logger

__all__ = ["host_density", "dense_premise", "dense_embed_separator"]


def host_density(graph):
    """
    e(G) / C(N, 2).
    """
    pairs = graph.n * (graph.n - 1) // 2
    return graph.m / pairs if pairs else 0.0


def dense_premise(guest, host, rho):
    """
    Whether N >= 8 Delta rho^(-Delta) n, the size condition under which a graph of density
    rho contains every bipartite graph on n vertices with maximum degree Delta.
    """
    delta = guest.max_degree
    # compare logarithms; rho^(-Delta) overflows for realistic Delta
    needed = math.log(8 * max(delta, 1)) - delta * math.log(rho) + math.log(max(guest.n, 1))
    return math.log(max(host.n, 1)) >= needed


def _attempt(guest, host, order, back, rho, rng, stats):
    host_nbrs = [host.neighbors(v) for v in range(host.n)]
    free = np.ones(host.n, dtype=bool)
    image = np.full(guest.n, -1, dtype=np.int64)
    for i, v in enumerate(order):
        if back[i]:
            pool = host_nbrs[image[back[i][0]]]
            for u in back[i][1:]:
                pool = np.intersect1d(pool, host_nbrs[image[u]], assume_unique=True)
            pool = pool[free[pool]]
        else:
            pool = np.flatnonzero(free)
        stats["min_candidates"] = min(stats["min_candidates"], len(pool))
        if not pool.size:
            stats["dead_end_position"] = i
            return None
        # prefer candidates that keep a (rho / 2) share of the free vertices as neighbors
        surviving = host.adjacency_matrix()[pool][:, free].sum(axis=1)
        good = pool[surviving >= rho / 2 * free.sum()]
        if not good.size:
            stats["fallbacks"] += 1
            good = pool
        image[v] = good[rng.integers(len(good))]
        free[image[v]] = False
    return image


def dense_embed_separator(guest, host, rho=0.5, seed=0, retries=20):
    """
    Embed a bipartite bounded-degree graph into a host of density at least rho.

    Vertices are placed in BFS order, each one uniformly among the unused common neighbors
    of its placed neighbors' images that still see a rho/2 share of the unused vertices.
    A dead end restarts the whole attempt with a fresh substream.

    Parameters
    ----------
    guest : Graph
        Bipartite guest (H[S] in the pipeline).
    host : Graph
        Host with density at least ``rho``.
    rho : float
    seed : int
    retries : int

    Returns
    -------
    EmbeddingMap
        Verified map; ``stats`` holds the density, the size-premise flag and candidate-set
        statistics.
    """
    if bipartition(guest) is None:
        raise ParameterError("dense_embed_separator needs a bipartite guest")
    if guest.n > host.n:
        raise ParameterError(f"guest has {guest.n} vertices, host only {host.n}")
    log = StageLog("dense_embed")
    density = host_density(host)
    log.record("host_density", density >= rho, density, rho, error=ParameterError)
    premise = dense_premise(guest, host, rho)
    if not premise:
        logger.warning(
            f"host has {host.n} vertices, below 8 Delta rho^-Delta n for Delta="
            f"{guest.max_degree}; attempting the greedy embedding anyway"
        )

    order = guest_order(guest)
    index = {v: i for i, v in enumerate(order)}
    back = [[int(u) for u in guest.neighbors(v) if index[u] < index[v]] for v in order]
    stats = {
        "host_density": density,
        "premise": premise,
        "min_candidates": host.n,
        "fallbacks": 0,
        "attempts": 0,
    }
    for attempt in range(retries):
        stats["attempts"] = attempt + 1
        image = _attempt(guest, host, order, back, rho, get_rng(seed, attempt), stats)
        if image is None:
            logger.debug(f"dense embedding attempt {attempt} hit a dead end")
            continue
        ok, violation = verify_embedding(guest, host, image)
        if not ok:
            raise LemmaViolation(f"dense embedding produced an invalid map: {violation}")
        stats["checks"] = log.checks
        logger.info(f"embedded {guest.n}-vertex separator graph after {attempt + 1} attempt(s)")
        return EmbeddingMap(map=image, verified=True, stats=stats)
    raise EmbeddingFailed(f"dense embedding failed after {retries} attempts", stats)
