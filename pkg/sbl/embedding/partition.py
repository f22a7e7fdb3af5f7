"""
Regular partitions of the host: planted hosts, regularity sampling, the reduced graph and
its matching, super-regularization and the distribution of exceptional vertices.

The regularity lemma itself is never run. Partitions are planted (or supplied by the
user) and only the properties the embedding needs are checked.
"""

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from sbl.embedding.checks import StageLog
from sbl.graph import Graph, vertex_set
from sbl.utils import (
    HostDegreeError,
    ParameterError,
    get_rng,
    logger,
    read_json,
    write_json,
)

__all__ = [
    "RegularPartition",
    "ReducedGraph",
    "RegularityResult",
    "SuperRegularReport",
    "DistributionReport",
    "pair_densities",
    "planted_regular_host",
    "sample_regularity",
    "atypical_vertices",
    "restrict_partition",
    "reduced_graph_and_matching",
    "make_super_regular",
    "distribute_exceptional",
    "partition_from_dict",
    "write_partition",
    "read_partition",
]


def _indicator(n, clusters):
    indicator = np.zeros((n, len(clusters)), dtype=np.int64)
    for i, cluster in enumerate(clusters):
        indicator[cluster, i] = 1
    return indicator


def pair_densities(graph, clusters):
    """
    Matrix of densities d(W_i, W_j) between clusters; the diagonal is 0.
    """
    if not clusters:
        return np.zeros((0, 0))
    indicator = _indicator(graph.n, clusters)
    counts = indicator.T @ graph.adjacency_matrix().astype(np.int64) @ indicator
    sizes = np.array([len(cluster) for cluster in clusters], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(np.outer(sizes, sizes) > 0, counts / np.outer(sizes, sizes), 0.0)
    np.fill_diagonal(density, 0.0)
    return density


@dataclass
class RegularPartition:
    """
    Clusters W_1..W_l and the exceptional set W_0 of a host graph.

    The partition may cover only part of the host (vertices already used by an earlier
    stage are left out).

    Parameters
    ----------
    n : int
        Host vertex count.
    clusters : list of numpy.ndarray
    exceptional : numpy.ndarray
    eps, d : float
        Regularity and density parameters.
    pair_density : numpy.ndarray
        l x l matrix of cluster-pair densities.
    planted : bool
    """

    n: int
    clusters: list
    exceptional: np.ndarray
    eps: float
    d: float
    pair_density: np.ndarray = field(repr=False)
    planted: bool = False

    def __post_init__(self):
        self.clusters = [vertex_set(cluster, self.n) for cluster in self.clusters]
        self.exceptional = vertex_set(self.exceptional, self.n)
        parts = [*self.clusters, self.exceptional]
        total = sum(len(part) for part in parts)
        if len(vertex_set(np.concatenate(parts))) != total:
            raise ParameterError("partition parts overlap")
        ell = len(self.clusters)
        self.pair_density = np.asarray(self.pair_density, dtype=float).reshape(ell, ell)
        if not np.allclose(self.pair_density, self.pair_density.T):
            raise ParameterError("pair densities must be symmetric")

    @property
    def ell(self):
        return len(self.clusters)

    @property
    def sizes(self):
        return np.array([len(cluster) for cluster in self.clusters], dtype=np.int64)

    @property
    def m(self):
        """
        Smallest cluster size (the common size when clusters are equal).
        """
        return int(self.sizes.min()) if self.ell else 0

    @property
    def covered(self):
        return vertex_set(np.concatenate([*self.clusters, self.exceptional]))

    def cluster_index(self):
        """
        Array mapping host vertex -> cluster index, -1 outside the clusters.
        """
        index = np.full(self.n, -1, dtype=np.int64)
        for i, cluster in enumerate(self.clusters):
            index[cluster] = i
        return index

    def with_clusters(self, graph, clusters, exceptional):
        return RegularPartition(
            n=self.n,
            clusters=clusters,
            exceptional=exceptional,
            eps=self.eps,
            d=self.d,
            pair_density=pair_densities(graph, [vertex_set(c) for c in clusters]),
            planted=self.planted,
        )

    def to_dict(self):
        return {
            "n": self.n,
            "clusters": self.clusters,
            "exceptional": self.exceptional,
            "eps": self.eps,
            "d": self.d,
            "planted": self.planted,
        }


def write_partition(filename, partition):
    write_json(filename, partition)


def partition_from_dict(data, graph):
    """
    Partition from its ``to_dict`` form; densities are recomputed from ``graph``.
    """
    try:
        clusters = [vertex_set(cluster, graph.n) for cluster in data["clusters"]]
        return RegularPartition(
            n=graph.n,
            clusters=clusters,
            exceptional=data.get("exceptional", []),
            eps=float(data["eps"]),
            d=float(data["d"]),
            pair_density=pair_densities(graph, clusters),
            planted=bool(data.get("planted", False)),
        )
    except KeyError as exc:
        raise ParameterError(f"partition is missing {exc}") from None


def read_partition(filename, graph):
    return partition_from_dict(read_json(filename), graph)


def _bipartite_block(rng, rows, cols, p, min_degree, max_rounds=200):
    # random rows x cols block; rows and columns below min_degree are redrawn
    block = rng.random((rows, cols)) < p
    for _ in range(max_rounds):
        bad_rows = block.sum(axis=1) <= min_degree
        bad_cols = block.sum(axis=0) <= min_degree
        if not bad_rows.any() and not bad_cols.any():
            return block
        block[bad_rows] = rng.random((bad_rows.sum(), cols)) < p
        block[:, bad_cols] = rng.random((rows, bad_cols.sum())) < p
    raise ParameterError(
        f"could not reach minimum cross-degree {min_degree} at density {p} in {max_rounds} rounds"
    )


def planted_regular_host(
    n,
    ell,
    d,
    delta_super,
    seed=0,
    density=None,
    inner_density=0.0,
    exceptional=0,
    pairs=None,
    eps=0.1,
):
    """
    A host graph with a known regular partition.

    Vertices are split into ``ell`` contiguous clusters of size m = (n - exceptional) // ell;
    the rest is W_0. Each designated cluster pair is a random bipartite graph of density
    ``density`` (default ``d``) in which every vertex has more than ``delta_super * m``
    neighbors on the other side. Clusters get internal edges with probability
    ``inner_density`` and exceptional vertices are joined to everything with probability
    ``density``.

    Parameters
    ----------
    n, ell : int
    d : float
        Density threshold of the partition.
    delta_super : float
        Super-regularity degree fraction.
    seed : int
    density : float, optional
    inner_density : float
    exceptional : int
        Minimum size of W_0.
    pairs : iterable of (int, int), optional
        Designated pairs; all pairs by default.
    eps : float
        Regularity parameter recorded in the partition.

    Returns
    -------
    graph : Graph
    partition : RegularPartition
    """
    p = d if density is None else density
    if not 0 < d <= 1 or not 0 <= delta_super < 1 or not 0 < p <= 1:
        raise ParameterError("need d, density in (0, 1] and delta_super in [0, 1)")
    if p < d:
        raise ParameterError(f"density {p} is below the threshold d={d}")
    if delta_super >= p and p < 1:
        raise ParameterError(f"minimum cross-degree {delta_super} needs density above it")
    if ell < 1 or n - exceptional < ell:
        raise ParameterError(f"cannot split {n - exceptional} vertices into {ell} clusters")
    m = (n - exceptional) // ell
    clusters = [np.arange(i * m, (i + 1) * m, dtype=np.int64) for i in range(ell)]
    w0 = np.arange(ell * m, n, dtype=np.int64)
    if pairs is None:
        pairs = [(i, j) for i in range(ell) for j in range(i + 1, ell)]

    rng = get_rng(seed)
    matrix = np.zeros((n, n), dtype=bool)
    for i, j in pairs:
        block = _bipartite_block(rng, m, m, p, delta_super * m)
        matrix[np.ix_(clusters[i], clusters[j])] = block
    if inner_density > 0:
        for cluster in clusters:
            matrix[np.ix_(cluster, cluster)] |= rng.random((m, m)) < inner_density
        matrix[np.ix_(w0, w0)] |= rng.random((len(w0), len(w0))) < inner_density
    if len(w0):
        matrix[w0, : ell * m] |= rng.random((len(w0), ell * m)) < p
    upper = np.triu(matrix | matrix.T, k=1)
    graph = Graph(n, np.argwhere(upper))
    partition = RegularPartition(
        n=n,
        clusters=clusters,
        exceptional=w0,
        eps=eps,
        d=d,
        pair_density=pair_densities(graph, clusters),
        planted=True,
    )
    logger.info(
        f"planted host: n={n}, l={ell}, m={m}, |W_0|={len(w0)}, {len(pairs)} dense pairs, "
        f"min degree {graph.min_degree}"
    )
    return graph, partition


@dataclass
class RegularityResult:
    """
    Outcome of a regularity probe. ``not_falsified`` is evidence, not a proof.
    """

    status: str
    density: float
    worst_deviation: float
    samples: int
    x: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)

    @property
    def violated(self):
        return self.status == "violated"


def sample_regularity(graph, xs, ys, eps, samples=1000, seed=0):
    """
    Look for X in A, Y in B with |X| > eps |A|, |Y| > eps |B| and |d(X, Y) - d(A, B)| >= eps.

    Candidates are random subsets of random sizes plus, for the smallest admissible sizes,
    the vertices of highest and of lowest degree into the other side.

    Returns
    -------
    RegularityResult
        ``violated`` with the witness pair, or ``not_falsified``.
    """
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    if np.intersect1d(xs, ys).size:
        raise ParameterError("sample_regularity needs disjoint sets")
    if not xs.size or not ys.size:
        raise ParameterError("sample_regularity needs non-empty sets")
    block = graph.adjacency_matrix()[np.ix_(xs, ys)]
    base = block.mean()
    lo_x = min(math.ceil(eps * len(xs)) + 1, len(xs))
    lo_y = min(math.ceil(eps * len(ys)) + 1, len(ys))

    candidates = []
    row_order = np.argsort(block.sum(axis=1), kind="stable")
    col_order = np.argsort(block.sum(axis=0), kind="stable")
    candidates.append((row_order[-lo_x:], col_order[-lo_y:]))
    candidates.append((row_order[:lo_x], col_order[:lo_y]))
    candidates.append((row_order[-lo_x:], np.arange(len(ys))))
    candidates.append((row_order[:lo_x], np.arange(len(ys))))
    for trial in range(samples):
        rng = get_rng(seed, trial)
        size_x = int(rng.integers(lo_x, len(xs) + 1))
        size_y = int(rng.integers(lo_y, len(ys) + 1))
        candidates.append(
            (rng.choice(len(xs), size_x, replace=False), rng.choice(len(ys), size_y, replace=False))
        )

    worst = 0.0
    for rows, cols in candidates:
        deviation = abs(block[np.ix_(rows, cols)].mean() - base)
        worst = max(worst, deviation)
        if deviation >= eps:
            return RegularityResult(
                "violated", float(base), float(deviation), len(candidates), xs[rows], ys[cols]
            )
    return RegularityResult("not_falsified", float(base), float(worst), len(candidates))


def atypical_vertices(graph, xs, ys, d, eps):
    """
    Vertices x of A with |N(x) & Y| <= (d - eps) |Y|.
    """
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    degrees = graph.adjacency_matrix()[np.ix_(xs, ys)].sum(axis=1)
    return xs[degrees <= (d - eps) * len(ys)]


def restrict_partition(graph, partition, removed):
    """
    Drop ``removed`` host vertices and trim clusters back to a common size.

    Trimmed vertices (the highest ids of each cluster) join W_0.
    """
    removed = vertex_set(removed, graph.n)
    clusters = [np.setdiff1d(cluster, removed) for cluster in partition.clusters]
    w0 = [np.setdiff1d(partition.exceptional, removed)]
    size = min(len(cluster) for cluster in clusters)
    w0 += [cluster[size:] for cluster in clusters]
    clusters = [cluster[:size] for cluster in clusters]
    return partition.with_clusters(graph, clusters, np.concatenate(w0))


@dataclass
class ReducedGraph:
    """
    Cluster graph: i ~ j when (W_i, W_j) is dense and not shown irregular.

    ``partner[i]`` is the cluster matched with i, or -1.
    """

    graph: Graph
    partition: RegularPartition = field(repr=False)
    matching: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)

    @property
    def partner(self):
        partner = np.full(self.graph.n, -1, dtype=np.int64)
        for i, j in self.matching:
            partner[i] = j
            partner[j] = i
        return partner

    def to_dict(self):
        return {
            "ell": self.graph.n,
            "edges": self.graph.edges,
            "matching": self.matching,
            "uncovered": self.uncovered,
        }


def _reduced_edges(partition, d, graph, samples, seed):
    edges = []
    irregular = 0
    for i in range(partition.ell):
        for j in range(i + 1, partition.ell):
            if partition.pair_density[i, j] < d:
                continue
            if samples and graph is not None:
                result = sample_regularity(
                    graph,
                    partition.clusters[i],
                    partition.clusters[j],
                    partition.eps,
                    samples=samples,
                    seed=seed + i * partition.ell + j,
                )
                if result.violated:
                    logger.debug(f"pair ({i}, {j}) dropped: irregular by {result.worst_deviation}")
                    irregular += 1
                    continue
            edges.append((i, j))
    return edges, irregular


def reduced_graph_and_matching(
    partition,
    graph=None,
    d=None,
    samples=0,
    seed=0,
    min_degree_fraction=None,
    premise=False,
    log=None,
):
    """
    Build the reduced graph and a maximum matching of it.

    If the matching misses exactly one cluster (odd l) that cluster is moved to W_0.

    Parameters
    ----------
    partition : RegularPartition
    graph : Graph, optional
        Host; needed for regularity sampling and for moving a cluster to W_0.
    d : float, optional
        Density threshold, the partition's by default.
    samples : int
        Regularity samples per dense pair (0 skips sampling).
    seed : int
    min_degree_fraction : float, optional
        delta(G) / |G|; enables the check delta(G_r) >= (c - 2 eps - d) l.
    premise : bool
        Whether the host satisfies the minimum-degree premise, which makes the degree check
        binding.
    log : StageLog, optional

    Returns
    -------
    ReducedGraph
    """
    d = partition.d if d is None else d
    log = log or StageLog("reduced_graph")
    edges, irregular = _reduced_edges(partition, d, graph, samples, seed)
    reduced = Graph(partition.ell, edges)
    if min_degree_fraction is not None:
        theta = 2 * partition.eps + d
        bound = (min_degree_fraction - theta) * partition.ell
        log.record(
            "reduced_min_degree",
            reduced.min_degree >= bound - 1e-9,
            reduced.min_degree,
            bound,
            guaranteed=premise,
            error=HostDegreeError,
        )

    matching = sorted(
        tuple(sorted((int(a), int(b))))
        for a, b in nx.max_weight_matching(reduced.to_networkx(), maxcardinality=True)
    )
    covered = {v for pair in matching for v in pair}
    uncovered = [i for i in range(partition.ell) if i not in covered]
    detail = (
        f"({irregular} dense pairs rejected as not {partition.eps:g}-regular by sampling)"
        if irregular
        else ""
    )
    log.record(
        "matching_coverage",
        len(uncovered) <= 1,
        len(uncovered),
        1,
        detail=detail,
        error=HostDegreeError,
    )
    if uncovered:
        if graph is None:
            raise ParameterError("moving an unmatched cluster to W_0 needs the host graph")
        drop = uncovered[0]
        logger.info(f"cluster {drop} is unmatched and joins W_0")
        keep = [i for i in range(partition.ell) if i != drop]
        partition = partition.with_clusters(
            graph,
            [partition.clusters[i] for i in keep],
            np.concatenate([partition.exceptional, partition.clusters[drop]]),
        )
        new_id = {old: new for new, old in enumerate(keep)}
        reduced, _ = reduced.subgraph(keep)
        matching = sorted((new_id[a], new_id[b]) for a, b in matching)
    log.data.update(
        {"ell": partition.ell, "matching_size": len(matching), "irregular_pairs": irregular}
    )
    return ReducedGraph(graph=reduced, partition=partition, matching=matching, uncovered=uncovered)


@dataclass
class SuperRegularReport:
    removed_bad: list
    removed_total: int
    m_before: int
    m_after: int
    rounds: int


def make_super_regular(graph, reduced, delta, seed=0, max_rounds=50, log=None):
    """
    Make every matched pair (eps, delta)-super-regular.

    Vertices with at most delta |W_j| neighbors in their partner cluster W_j move to W_0,
    then every cluster is trimmed (randomly) to the same size, until no vertex is left
    with a low cross-degree. More than eps m low-degree vertices in a cluster means the
    pair was not regular.

    Returns
    -------
    reduced : ReducedGraph
        Same reduced graph and matching over the updated partition.
    report : SuperRegularReport
    """
    log = log or StageLog("super_regular")
    partition = reduced.partition
    partner = reduced.partner
    matrix = graph.adjacency_matrix()
    rng = get_rng(seed)
    clusters = [cluster.copy() for cluster in partition.clusters]
    w0 = [partition.exceptional]
    m_before = partition.m
    removed_bad = [0] * len(clusters)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        bad = []
        for i, cluster in enumerate(clusters):
            other = clusters[partner[i]]
            degree = matrix[np.ix_(cluster, other)].sum(axis=1)
            bad.append(degree <= delta * len(other))
        if any(mask.any() for mask in bad):
            for i, mask in enumerate(bad):
                removed_bad[i] += int(mask.sum())
                w0.append(clusters[i][mask])
                clusters[i] = clusters[i][~mask]
            continue
        size = min(len(cluster) for cluster in clusters)
        if all(len(cluster) == size for cluster in clusters):
            break
        for i, cluster in enumerate(clusters):
            extra = len(cluster) - size
            if extra:
                drop = np.zeros(len(cluster), dtype=bool)
                drop[rng.choice(len(cluster), extra, replace=False)] = True
                w0.append(cluster[drop])
                clusters[i] = cluster[~drop]
    else:
        raise HostDegreeError(f"super-regularization did not settle in {max_rounds} rounds")

    limit = partition.eps * m_before
    log.record(
        "low_degree_vertices",
        max(removed_bad) <= limit,
        max(removed_bad),
        limit,
        guaranteed=True,
        error=HostDegreeError,
    )
    new_partition = partition.with_clusters(graph, clusters, np.concatenate(w0))
    for i, j in reduced.matching:
        for a, b in ((i, j), (j, i)):
            degree = matrix[np.ix_(new_partition.clusters[a], new_partition.clusters[b])].sum(1)
            log.record(
                f"super_regular_{a}_{b}",
                degree.min() > delta * len(new_partition.clusters[b]),
                int(degree.min()),
                delta * len(new_partition.clusters[b]),
            )
    report = SuperRegularReport(
        removed_bad=removed_bad,
        removed_total=len(new_partition.exceptional) - len(partition.exceptional),
        m_before=m_before,
        m_after=new_partition.m,
        rounds=rounds,
    )
    log.data.update({"m_after": new_partition.m, "removed_bad": removed_bad})
    result = ReducedGraph(
        graph=reduced.graph,
        partition=new_partition,
        matching=reduced.matching,
        uncovered=reduced.uncovered,
    )
    return result, report


@dataclass
class DistributionReport:
    gains: list
    j_degrees: list
    spread: int


def distribute_exceptional(graph, reduced, delta, gamma_dprime=None, premise=False, log=None):
    """
    Move every vertex of W_0 into a cluster.

    v may join W_i when it has at least delta m neighbors in the partner of W_i (an edge
    vW_i of the auxiliary graph J). Each vertex joins its least loaded J-neighbor, ties
    going to the lowest cluster id.

    Parameters
    ----------
    graph : Graph
    reduced : ReducedGraph
    delta : float
    gamma_dprime : float, optional
        Enables the check deg_J(v) >= (1/2 + gamma'') l.
    premise : bool
        Whether the host meets the minimum-degree premise (makes the bounds binding).
    log : StageLog, optional

    Returns
    -------
    reduced : ReducedGraph
        Over the partition with empty W_0.
    report : DistributionReport
    """
    log = log or StageLog("distribute_exceptional")
    partition = reduced.partition
    partner = reduced.partner
    ell, m = partition.ell, partition.m
    w0 = partition.exceptional
    if not len(w0):
        return reduced, DistributionReport(gains=[0] * ell, j_degrees=[], spread=0)

    indicator = _indicator(graph.n, partition.clusters)
    to_cluster = graph.adjacency_matrix()[w0].astype(np.int64) @ indicator
    j_adjacent = to_cluster[:, partner] >= delta * m
    j_degrees = j_adjacent.sum(axis=1)
    if gamma_dprime is not None:
        bound = (0.5 + gamma_dprime) * ell
        log.record(
            "j_degree",
            j_degrees.min() >= bound - 1e-9,
            int(j_degrees.min()),
            bound,
            guaranteed=premise,
            error=HostDegreeError,
        )
    gains = np.zeros(ell, dtype=np.int64)
    joins = [[] for _ in range(ell)]
    for v, row in zip(w0, j_adjacent, strict=True):
        options = np.flatnonzero(row)
        if not options.size:
            raise HostDegreeError(f"exceptional vertex {v} has no cluster to join")
        target = options[np.argmin(gains[options])]
        gains[target] += 1
        joins[target].append(v)

    clusters = [
        np.concatenate([cluster, np.asarray(extra, dtype=np.int64)])
        for cluster, extra in zip(partition.clusters, joins, strict=True)
    ]
    sizes = [len(cluster) for cluster in clusters]
    spread = max(sizes) - min(sizes)
    gain_bound = 2 * len(w0) / ell
    log.record(
        "gain", gains.max() <= gain_bound, int(gains.max()), gain_bound, guaranteed=premise
    )
    spread_bound = 3 * partition.eps * m
    log.record("size_spread", spread < spread_bound, spread, spread_bound, guaranteed=premise)
    new_partition = partition.with_clusters(graph, clusters, [])
    log.data.update({"gains": gains, "w0": len(w0)})
    logger.info(f"distributed {len(w0)} exceptional vertices, max gain {gains.max()}")
    result = ReducedGraph(
        graph=reduced.graph,
        partition=new_partition,
        matching=reduced.matching,
        uncovered=reduced.uncovered,
    )
    return result, DistributionReport(
        gains=gains.tolist(), j_degrees=j_degrees.tolist(), spread=spread
    )
