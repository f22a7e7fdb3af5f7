"""
Host graphs: the layered robust expander, the two-clique host, robust-neighborhood
diagnostics and non-embeddability certificates.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from sbl.bandwidth import short_path_bound
from sbl.graph import Graph, bfs_distance, components_after_removal, vertex_set
from sbl.subgraph import exact_embed
from sbl.utils import LemmaViolation, ParameterError, get_rng, logger

__all__ = [
    "N_LAYERS",
    "LAYERED_X",
    "LAYERED_Y",
    "LAYERED_DISTANCE",
    "SAMPLING_CAVEAT",
    "RobustExpanderParams",
    "RobustProbeReport",
    "LayeredHost",
    "TwoCliqueHost",
    "NonEmbeddabilityCertificate",
    "SeparationCheck",
    "robust_neighborhood",
    "robust_expander_probe",
    "build_layered_host",
    "layered_non_embeddability",
    "two_clique_graph",
    "build_two_clique_host",
    "mini_two_sided_guest",
    "two_clique_separation_check",
    "exhaustive_non_embedding",
]

N_LAYERS = 100
# the blocks A_1..A_35 and A_66..A_100 (1-based layer indices, inclusive)
LAYERED_X = (1, 35)
LAYERED_Y = (66, 100)
LAYERED_DISTANCE = LAYERED_Y[0] - LAYERED_X[1]

SAMPLING_CAVEAT = "sampling only: finding no violation does not prove robust expansion"


@dataclass(frozen=True)
class RobustExpanderParams:
    nu: float
    tau: float

    def __post_init__(self):
        if not 0 < self.nu <= self.tau < 1:
            raise ParameterError(f"need 0 < nu <= tau < 1, got nu={self.nu}, tau={self.tau}")

    def layered_regime_ok(self, n):
        """
        Whether (n, nu, tau) lies in the regime where the layered host is a robust expander.
        """
        return 1 / n < self.nu and self.tau >= 100 * self.nu - 1e-12

    def size_window(self, n):
        return math.ceil(self.tau * n - 1e-9), math.floor((1 - self.tau) * n + 1e-9)


def _rn_counts(graph, vertices):
    in_s = np.zeros(graph.n, dtype=bool)
    in_s[vertices] = True
    return graph.adjacency_matrix()[:, in_s].sum(axis=1)


def robust_neighborhood(graph, vertices, nu):
    """
    RN_nu(S): the vertices with at least nu n neighbors in S.

    Parameters
    ----------
    graph : Graph
    vertices : iterable of int
        The set S.
    nu : float
        In (0, 1).

    Returns
    -------
    numpy.ndarray
    """
    if not 0 < nu < 1:
        raise ParameterError(f"nu must be in (0, 1), got {nu}")
    vertices = vertex_set(vertices, graph.n)
    counts = _rn_counts(graph, vertices)
    return np.flatnonzero(counts >= nu * graph.n - 1e-9)


@dataclass
class RobustProbeReport:
    """
    Outcome of a robust-expansion probe.

    ``min_slack`` is the smallest |RN(S)| - |S| - nu n seen; a violation has negative slack.
    """

    n: int
    params: RobustExpanderParams
    trials: int
    adversarial_checked: int
    violation: dict | None
    min_slack: float
    regime_ok: bool | None = None
    caveat: str = SAMPLING_CAVEAT

    @property
    def holds(self):
        return self.violation is None


def _blocks_of(host):
    return getattr(host, "blocks", None)


def robust_expander_probe(host, params, trials=1000, seed=0):
    """
    Look for a set S with tau n <= |S| <= (1 - tau) n and |RN_nu(S)| < |S| + nu n.

    Random sets (uniform size in the window, uniform members) are tried first, then every
    union of consecutive blocks of a structured host (layers of a ``LayeredHost``, the
    clique parts of a ``TwoCliqueHost``) whose size is in the window. The probe stops at the
    first violation.

    Parameters
    ----------
    host : Graph, LayeredHost or TwoCliqueHost
    params : RobustExpanderParams
    trials : int
    seed : int

    Returns
    -------
    RobustProbeReport
    """
    if trials < 1:
        raise ParameterError(f"trials must be at least 1, got {trials}")
    graph = host if isinstance(host, Graph) else host.graph
    n = graph.n
    lo, hi = params.size_window(n)
    if lo > hi or hi < 1:
        raise ParameterError(f"empty size window [{lo}, {hi}] for tau={params.tau}, n={n}")
    threshold = params.nu * n - 1e-9
    matrix = graph.adjacency_matrix()

    min_slack = math.inf
    violation = None

    def record(kind, size, rn_size, members):
        nonlocal min_slack, violation
        slack = rn_size - size - params.nu * n
        min_slack = min(min_slack, slack)
        if slack < -1e-9 and violation is None:
            violation = {
                "kind": kind,
                "size": int(size),
                "rn_size": int(rn_size),
                "required": size + params.nu * n,
                "set": vertex_set(members),
            }

    done = 0
    for trial in range(trials):
        rng = get_rng(seed, trial)
        size = int(rng.integers(lo, hi + 1))
        members = rng.choice(n, size=size, replace=False)
        in_s = np.zeros(n, dtype=bool)
        in_s[members] = True
        rn_size = int((matrix[:, in_s].sum(axis=1) >= threshold).sum())
        record("random", size, rn_size, members)
        done += 1
        if violation is not None:
            break

    checked = 0
    blocks = _blocks_of(host)
    if violation is None and blocks:
        indicator = np.zeros((n, len(blocks)), dtype=np.int64)
        for j, block in enumerate(blocks):
            indicator[block, j] = 1
        per_block = matrix.astype(np.int64) @ indicator
        cumulative = np.concatenate(
            [np.zeros((n, 1), dtype=np.int64), np.cumsum(per_block, axis=1)], axis=1
        )
        sizes = np.concatenate([[0], np.cumsum([len(block) for block in blocks])])
        for i, j in itertools.combinations(range(len(blocks) + 1), 2):
            size = int(sizes[j] - sizes[i])
            if not lo <= size <= hi:
                continue
            counts = cumulative[:, j] - cumulative[:, i]
            rn_size = int((counts >= threshold).sum())
            checked += 1
            record("block_union", size, rn_size, np.concatenate(blocks[i:j]))
            if violation is not None:
                violation["blocks"] = (i, j - 1)
                break

    regime_ok = params.layered_regime_ok(n) if isinstance(host, LayeredHost) else None
    report = RobustProbeReport(
        n=n,
        params=params,
        trials=done,
        adversarial_checked=checked,
        violation=violation,
        min_slack=float(min_slack),
        regime_ok=regime_ok,
    )
    if violation is not None:
        logger.info(
            f"robust expansion violated by a {violation['kind']} set of size {violation['size']}"
        )
    else:
        logger.info(f"no robust expansion violation in {done} random and {checked} block sets")
    return report


@dataclass
class LayeredHost:
    """
    The layered host: n / 100 vertices per layer, consecutive layers completely joined,
    cliques on the first and last layer.
    """

    graph: Graph
    layers: list = field(repr=False)

    @property
    def n(self):
        return self.graph.n

    @property
    def blocks(self):
        return self.layers

    @property
    def layer_of(self):
        layer_of = np.empty(self.n, dtype=np.int64)
        for i, layer in enumerate(self.layers):
            layer_of[layer] = i + 1
        return layer_of

    def layer(self, i):
        """
        Layer A_i, 1-based.
        """
        return self.layers[i - 1]

    def layer_union(self, i, j):
        """
        A_i + ... + A_j, 1-based and inclusive.
        """
        return np.concatenate(self.layers[i - 1 : j])

    @classmethod
    def from_graph(cls, graph):
        host = build_layered_host(graph.n)
        if host.graph != graph:
            raise ParameterError("graph is not the layered host on its vertex count")
        return host


def _clique_edges(vertices):
    vertices = np.asarray(vertices, dtype=np.int64)
    i, j = np.triu_indices(len(vertices), k=1)
    return np.column_stack([vertices[i], vertices[j]])


def build_layered_host(n):
    """
    Build the 100-layer host on n vertices (100 must divide n).

    Layer A_i (1-based) holds vertices (i - 1) n/100 .. i n/100 - 1.

    Returns
    -------
    LayeredHost
    """
    if n <= 0 or n % N_LAYERS:
        raise ParameterError(f"layered host needs n divisible by {N_LAYERS}, got {n}")
    size = n // N_LAYERS
    layers = [np.arange(i * size, (i + 1) * size, dtype=np.int64) for i in range(N_LAYERS)]
    edges = [_clique_edges(layers[0]), _clique_edges(layers[-1])]
    for a, b in itertools.pairwise(layers):
        us, vs = np.meshgrid(a, b, indexing="ij")
        edges.append(np.column_stack([us.ravel(), vs.ravel()]))
    graph = Graph(n, np.concatenate(edges))
    return LayeredHost(graph=graph, layers=layers)


@dataclass
class NonEmbeddabilityCertificate:
    host_x: np.ndarray = field(repr=False)
    host_y: np.ndarray = field(repr=False)
    host_distance: int
    guest_short_path_bound: int
    conclusion: bool
    method: str = "distance_obstruction"
    path: list = field(default_factory=list, repr=False)


def layered_non_embeddability(t, host):
    """
    Distance obstruction: no H_{r,t} graph embeds into the layered host when 2t + 4 < 31.

    In any H two disjoint sets of 0.35 n vertices are within distance 2t + 4, while in the
    layered host the sets A_1..A_35 and A_66..A_100 are at distance 31.

    Parameters
    ----------
    t : int
        Path length of the guest family.
    host : LayeredHost

    Returns
    -------
    NonEmbeddabilityCertificate
    """
    if not isinstance(host, LayeredHost):
        raise ParameterError("layered_non_embeddability needs a LayeredHost")
    if t < 1:
        raise ParameterError(f"path length must be at least 1, got {t}")
    xs = host.layer_union(*LAYERED_X)
    ys = host.layer_union(*LAYERED_Y)
    distance, path = bfs_distance(host.graph, xs, ys)
    if distance != LAYERED_DISTANCE:
        raise LemmaViolation(
            f"layered host blocks at distance {distance}, expected {LAYERED_DISTANCE}"
        )
    bound = short_path_bound(t)
    return NonEmbeddabilityCertificate(
        host_x=xs,
        host_y=ys,
        host_distance=distance,
        guest_short_path_bound=bound,
        conclusion=distance > bound,
        path=path,
    )


@dataclass
class TwoCliqueHost:
    """
    Two cliques sharing ``overlap`` vertices.

    Vertices are numbered interior of the first clique, then the shared part, then the
    interior of the second clique.
    """

    graph: Graph
    size_a: int
    size_b: int
    overlap_size: int
    deviation: float = 0.0

    @property
    def n(self):
        return self.graph.n

    @property
    def interior_a(self):
        return np.arange(self.size_a - self.overlap_size, dtype=np.int64)

    @property
    def overlap(self):
        start = self.size_a - self.overlap_size
        return np.arange(start, self.size_a, dtype=np.int64)

    @property
    def interior_b(self):
        return np.arange(self.size_a, self.n, dtype=np.int64)

    @property
    def clique_a(self):
        return np.arange(self.size_a, dtype=np.int64)

    @property
    def clique_b(self):
        return np.arange(self.size_a - self.overlap_size, self.n, dtype=np.int64)

    @property
    def blocks(self):
        return [self.interior_a, self.overlap, self.interior_b]

    @property
    def min_degree_formula(self):
        return min(self.size_a, self.size_b) - 1


def two_clique_graph(size_a, size_b, overlap):
    """
    Union of cliques on ``size_a`` and ``size_b`` vertices sharing ``overlap`` of them.
    """
    if not 0 <= overlap <= min(size_a, size_b):
        raise ParameterError(
            f"overlap must be in [0, {min(size_a, size_b)}], got {overlap}"
        )
    n = size_a + size_b - overlap
    start_b = size_a - overlap
    edges = np.concatenate(
        [_clique_edges(np.arange(size_a)), _clique_edges(np.arange(start_b, n))]
    )
    return TwoCliqueHost(
        graph=Graph(n, edges), size_a=size_a, size_b=size_b, overlap_size=overlap
    )


def build_two_clique_host(n, gamma):
    """
    Two cliques on n/2 + gamma n/100 vertices sharing gamma n/50 vertices.

    The clique size is rounded to the nearest integer and the overlap is set to make the
    total exactly n; ``deviation`` records how far the overlap is from gamma n / 50.

    Returns
    -------
    TwoCliqueHost
        Minimum degree n/2 + gamma n/100 - 1 (after rounding).
    """
    if n < 2 or not 0 < gamma < 1:
        raise ParameterError(f"need n >= 2 and 0 < gamma < 1, got n={n}, gamma={gamma}")
    size = round(n / 2 + gamma * n / 100)
    overlap = 2 * size - n
    if overlap < 1:
        suggested = math.ceil(50 / gamma)
        raise ParameterError(
            f"overlap rounds to {overlap} for n={n}, gamma={gamma}; use n >= {suggested}"
        )
    host = two_clique_graph(size, size, overlap)
    host.deviation = abs(overlap - gamma * n / 50)
    if host.deviation:
        logger.debug(f"two-clique overlap {overlap} deviates by {host.deviation:g}")
    return host


def mini_two_sided_guest(width):
    """
    A 16-vertex guest: two 8-vertex brooms joined by ``width`` disjoint bridge edges.

    Each broom is a path on three vertices whose last vertex carries five leaves. The
    bridge edges join vertex i of the first broom to vertex i of the second.
    """
    if not 1 <= width <= 8:
        raise ParameterError(f"bridge width must be in [1, 8], got {width}")
    broom = [(0, 1), (1, 2)] + [(2, leaf) for leaf in range(3, 8)]
    edges = broom + [(u + 8, v + 8) for u, v in broom] + [(i, i + 8) for i in range(width)]
    return Graph(16, edges)


@dataclass
class SeparationCheck:
    embeds: bool
    separator: np.ndarray | None
    candidates_checked: int


def _packs(sizes, cap_a, cap_b):
    total = sum(sizes)
    reachable = np.zeros(cap_a + 1, dtype=bool)
    reachable[0] = True
    for size in sizes:
        if size <= cap_a:
            reachable[size:] |= reachable[: cap_a + 1 - size].copy()
    sums = np.flatnonzero(reachable)
    return bool(np.any(total - sums <= cap_b))


def two_clique_separation_check(guest, host):
    """
    Decide embeddability into a two-clique host by separators.

    ``guest`` embeds iff for some set Z of at most ``overlap`` vertices the components of
    guest - Z can be split between the two clique interiors.

    Returns
    -------
    SeparationCheck
    """
    cap_a = len(host.interior_a)
    cap_b = len(host.interior_b)
    checked = 0
    for z in range(min(host.overlap_size, guest.n) + 1):
        if guest.n - z > cap_a + cap_b:
            continue
        for sep in itertools.combinations(range(guest.n), z):
            checked += 1
            sizes = [len(comp) for comp in components_after_removal(guest, sep)]
            if _packs(sizes, cap_a, cap_b):
                return SeparationCheck(True, np.array(sep, dtype=np.int64), checked)
    return SeparationCheck(False, None, checked)


def exhaustive_non_embedding(guest, host, node_limit=1_000_000):
    """
    Exact spanning-embedding search; see ``sbl.subgraph.exact_embed``.
    """
    if isinstance(host, (LayeredHost, TwoCliqueHost)):
        host = host.graph
    return exact_embed(guest, host, node_limit)
