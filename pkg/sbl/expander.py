"""
Random regular expanders, their spectral certificate and the bipartite double cover.

Explicit Ramanujan constructions are replaced by random regular graphs whose second
eigenvalue is measured and, when needed, resampled until it is close to 2 sqrt(r - 1).
"""

import math
from collections import defaultdict, namedtuple
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from sbl.graph import Graph, is_connected, vertex_set
from sbl.utils import (
    GenerationFailed,
    LemmaViolation,
    ParameterError,
    derive_seed,
    get_rng,
    logger,
)

__all__ = [
    "MAX_DENSE_EIGEN",
    "RegularGraphReport",
    "DoubleCover",
    "MixingDeviation",
    "ExpansionResult",
    "ThirdsReport",
    "MixingSampleReport",
    "ramanujan_threshold",
    "random_regular",
    "second_eigenvalue",
    "generate_regular_report",
    "mixing_bound_lambda",
    "mixing_deviation",
    "mixing_sample_check",
    "kov_margin",
    "kov_threshold_r",
    "thirds_edge_check",
    "double_cover_with_matching",
    "expansion_check",
]

# largest graph handed to the dense eigensolver
MAX_DENSE_EIGEN = 4000

MixingDeviation = namedtuple("MixingDeviation", ["observed", "expected", "bound", "holds"])
ExpansionResult = namedtuple("ExpansionResult", ["neighborhood_size", "holds"])


def ramanujan_threshold(r):
    return 2 * math.sqrt(r - 1)


def random_regular(k, r, seed=0, max_retries=100):
    """
    Uniform-ish random simple r-regular graph on k vertices.

    Stubs are paired at random; pairs that would create a loop or a multi-edge are returned
    to the pool and re-paired (Steger and Wormald). An attempt fails when no suitable pair
    remains, and is then restarted from scratch.

    Parameters
    ----------
    k : int
        Number of vertices, k > r.
    r : int
        Degree, r >= 3.
    seed : int
        Random seed; the output is a deterministic function of (k, r, seed).
    max_retries : int
        Number of attempts before giving up.

    Returns
    -------
    Graph
    """
    if r < 3:
        raise ParameterError(f"expander degree must be at least 3, got {r}")
    if r >= k:
        raise ParameterError(f"random_regular needs r < k, got r={r}, k={k}")
    if (k * r) % 2:
        raise ParameterError(f"k * r must be even, got k={k}, r={r}")

    rng = get_rng(seed)
    for attempt in range(max_retries):
        edges = _try_pairing(k, r, rng)
        if edges is not None:
            if attempt:
                logger.debug(f"random_regular(k={k}, r={r}): {attempt} failed attempts")
            return Graph(k, sorted(edges))
    raise GenerationFailed(
        f"no simple {r}-regular graph on {k} vertices after {max_retries} attempts",
        retries=max_retries,
    )


def _suitable(edges, potential):
    # some pair of pending stubs can still become a new edge
    if not potential:
        return True
    for s1 in potential:
        for s2 in potential:
            if s1 == s2:
                break
            if (min(s1, s2), max(s1, s2)) not in edges:
                return True
    return False


def _try_pairing(k, r, rng):
    edges = set()
    stubs = np.repeat(np.arange(k), r)
    while stubs.size:
        potential = defaultdict(int)
        rng.shuffle(stubs)
        for s1, s2 in stubs.reshape(-1, 2).tolist():
            pair = (min(s1, s2), max(s1, s2))
            if s1 != s2 and pair not in edges:
                edges.add(pair)
            else:
                potential[s1] += 1
                potential[s2] += 1
        if not _suitable(edges, potential):
            return None
        stubs = np.array(
            [v for v, count in potential.items() for _ in range(count)], dtype=np.int64
        )
    return edges


def second_eigenvalue(graph):
    """
    Second largest absolute adjacency eigenvalue of a connected regular graph.

    One copy of the trivial eigenvalue r is removed and the largest absolute value of the
    rest is returned. For a bipartite graph this is r itself, since -r is an eigenvalue.

    Parameters
    ----------
    graph : Graph
        Connected regular graph with at most ``MAX_DENSE_EIGEN`` vertices.

    Returns
    -------
    float
    """
    if graph.n > MAX_DENSE_EIGEN:
        raise ParameterError(
            f"dense eigensolver limited to {MAX_DENSE_EIGEN} vertices, got {graph.n}"
        )
    if graph.n < 2:
        raise ParameterError("second_eigenvalue needs at least two vertices")
    if not graph.is_regular():
        raise ParameterError("second_eigenvalue needs a regular graph")
    if not is_connected(graph):
        raise ParameterError("second_eigenvalue needs a connected graph")
    r = graph.degree(0)
    eigs = scipy.linalg.eigvalsh(graph.adjacency_matrix().astype(float))
    rest = np.delete(eigs, np.argmin(np.abs(eigs - r)))
    return float(np.max(np.abs(rest)))


@dataclass
class RegularGraphReport:
    """
    A random r-regular graph together with its spectral certificate.

    ``is_ramanujan`` is true when the measured ``lam`` is within ``eig_tolerance`` of the
    Ramanujan threshold. ``near_ramanujan`` is false when no sample met that bound, in which
    case downstream bounds use the measured eigenvalue.
    """

    graph: Graph = field(metadata={"json": False})
    r: int
    k: int
    lam: float
    threshold: float
    is_ramanujan: bool
    eig_tolerance: float
    seed: int = 0
    resamples: int = 0

    def __post_init__(self):
        if self.graph.n != self.k or not np.all(self.graph.degrees == self.r):
            raise ParameterError(f"graph is not {self.r}-regular on {self.k} vertices")
        if self.lam < 0:
            raise ParameterError(f"eigenvalue must be non-negative, got {self.lam}")

    @property
    def near_ramanujan(self):
        return self.is_ramanujan

    def to_dict(self):
        return {
            "r": self.r,
            "k": self.k,
            "lambda": self.lam,
            "ramanujan_threshold": self.threshold,
            "is_ramanujan": self.is_ramanujan,
            "near_ramanujan": self.near_ramanujan,
            "eig_tolerance": self.eig_tolerance,
            "seed": self.seed,
            "resamples": self.resamples,
            "graph": self.graph.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            graph = Graph(data["graph"]["n"], data["graph"]["edges"])
            return cls(
                graph=graph,
                r=int(data["r"]),
                k=int(data["k"]),
                lam=float(data["lambda"]),
                threshold=float(data["ramanujan_threshold"]),
                is_ramanujan=bool(data["is_ramanujan"]),
                eig_tolerance=float(data["eig_tolerance"]),
                seed=int(data.get("seed", 0)),
                resamples=int(data.get("resamples", 0)),
            )
        except KeyError as exc:
            raise ParameterError(f"regular graph report is missing {exc}") from None

    @classmethod
    def from_graph(cls, graph, eig_tolerance=None, seed=0):
        """
        Certify an existing regular graph.
        """
        r = graph.degree(0) if graph.n else 0
        threshold = ramanujan_threshold(r)
        tol = _default_tolerance(r) if eig_tolerance is None else eig_tolerance
        lam = second_eigenvalue(graph)
        return cls(
            graph=graph,
            r=r,
            k=graph.n,
            lam=lam,
            threshold=threshold,
            is_ramanujan=lam <= threshold + tol,
            eig_tolerance=tol,
            seed=seed,
        )


def _default_tolerance(r):
    return 0.05 * math.sqrt(max(r - 1, 0))


def generate_regular_report(k, r, seed=0, eig_tolerance=None, max_resamples=20, max_retries=100):
    """
    Sample r-regular graphs until one is connected and near-Ramanujan.

    Each resample uses its own seed stream. If none of ``max_resamples`` samples satisfies
    ``lam <= 2 sqrt(r - 1) + eig_tolerance``, the sample with the smallest eigenvalue is
    returned with ``is_ramanujan = False``.

    Parameters
    ----------
    k, r : int
        Vertex count and degree (k > r >= 3, k r even).
    seed : int
    eig_tolerance : float, optional
        Defaults to 0.05 sqrt(r - 1).
    max_resamples : int
    max_retries : int
        Passed to ``random_regular``.

    Returns
    -------
    RegularGraphReport
    """
    if r < 3:
        raise ParameterError(f"expander degree must be at least 3, got {r}")
    threshold = ramanujan_threshold(r)
    tol = _default_tolerance(r) if eig_tolerance is None else eig_tolerance

    best = None
    for attempt in range(max_resamples):
        graph = random_regular(k, r, derive_seed(seed, attempt), max_retries)
        if not is_connected(graph):
            logger.debug(f"sample {attempt} of {r}-regular graph on {k} vertices disconnected")
            continue
        lam = second_eigenvalue(graph)
        logger.debug(f"sample {attempt}: lambda={lam:.6f} (threshold {threshold:.6f})")
        if best is None or lam < best[1]:
            best = (graph, lam, attempt)
        if lam <= threshold + tol:
            break
    if best is None:
        raise GenerationFailed(
            f"no connected {r}-regular sample on {k} vertices", retries=max_resamples
        )

    graph, lam, attempt = best
    report = RegularGraphReport(
        graph=graph,
        r=r,
        k=k,
        lam=lam,
        threshold=threshold,
        is_ramanujan=lam <= threshold + tol,
        eig_tolerance=tol,
        seed=seed,
        resamples=attempt,
    )
    if not report.is_ramanujan:
        logger.warning(
            f"best {r}-regular sample on {k} vertices has lambda={lam:.4f} > "
            f"{threshold:.4f} + {tol:.4f}; using the measured value in bounds"
        )
    else:
        logger.info(f"{r}-regular graph on {k} vertices: lambda={lam:.4f}")
    return report


def mixing_bound_lambda(report):
    """
    The eigenvalue used in mixing bounds: 2 sqrt(r - 1), or the measured one if larger.
    """
    return report.threshold if report.lam <= report.threshold else report.lam


def mixing_deviation(graph_or_report, xs, ys):
    """
    Compare e(A, B) with its expected value r |A| |B| / k.

    The edge count is ``Graph.count_edges`` (ordered pairs), so for A = B = V it is
    2 e(G) = r k. The allowed deviation is lam sqrt(|A| |B|) with lam from
    ``mixing_bound_lambda``.

    Parameters
    ----------
    graph_or_report : Graph or RegularGraphReport
    xs, ys : iterable of int
        Non-empty vertex sets.

    Returns
    -------
    MixingDeviation
        ``(observed, expected, bound, holds)``.
    """
    if isinstance(graph_or_report, RegularGraphReport):
        report = graph_or_report
    else:
        report = RegularGraphReport.from_graph(graph_or_report)
    graph = report.graph
    xs = vertex_set(xs, graph.n)
    ys = vertex_set(ys, graph.n)
    if not xs.size or not ys.size:
        raise ParameterError("mixing_deviation needs non-empty vertex sets")
    observed = graph.count_edges(xs, ys)
    expected = len(xs) * len(ys) * report.r / report.k
    bound = mixing_bound_lambda(report) * math.sqrt(len(xs) * len(ys))
    return MixingDeviation(observed, expected, bound, abs(observed - expected) <= bound + 1e-9)


@dataclass
class MixingSampleReport:
    trials: int
    violations: int
    max_ratio: float
    lam_used: float


def mixing_sample_check(report, trials=10_000, seed=0):
    """
    Check the mixing inequality on random pairs of vertex sets.

    Set sizes are uniform in 1..k and the sets are uniform given their size. Any violation
    means the eigenvalue or the edge count is wrong, so it raises ``LemmaViolation``.

    Returns
    -------
    MixingSampleReport
        ``max_ratio`` is the largest |observed - expected| / bound seen.
    """
    graph = report.graph
    k = report.k
    matrix = graph.adjacency_matrix().astype(np.int64)
    lam = mixing_bound_lambda(report)
    violations = 0
    max_ratio = 0.0
    for trial in range(trials):
        rng = get_rng(seed, trial)
        in_a = np.zeros(k, dtype=np.int64)
        in_b = np.zeros(k, dtype=np.int64)
        in_a[rng.choice(k, size=rng.integers(1, k + 1), replace=False)] = 1
        in_b[rng.choice(k, size=rng.integers(1, k + 1), replace=False)] = 1
        observed = int(in_a @ matrix @ in_b)
        size_a, size_b = int(in_a.sum()), int(in_b.sum())
        expected = size_a * size_b * report.r / k
        bound = lam * math.sqrt(size_a * size_b)
        deviation = abs(observed - expected)
        if deviation > bound + 1e-9:
            violations += 1
        max_ratio = max(max_ratio, deviation / bound if bound else 0.0)
    if violations:
        raise LemmaViolation(f"mixing inequality failed in {violations} of {trials} trials")
    return MixingSampleReport(trials=trials, violations=0, max_ratio=max_ratio, lam_used=lam)


def kov_margin(r, a=1 / 3, b=1 / 3):
    """
    Per-vertex lower bound a b r - 2 sqrt(r - 1) sqrt(a b) on e(A, B) / k.

    Positive margin means any two sets of relative sizes a and b in a Ramanujan r-regular
    graph span at least one edge once k is large enough.
    """
    return a * b * r - 2 * math.sqrt(r - 1) * math.sqrt(a * b)


def kov_threshold_r(a=1 / 3, b=1 / 3, r_max=100_000):
    """
    Least degree r >= 3 for which ``kov_margin`` is positive (35 for thirds).
    """
    for r in range(3, r_max + 1):
        if kov_margin(r, a, b) > 0:
            return r
    raise ParameterError(f"margin is not positive for any r <= {r_max}")


@dataclass
class ThirdsReport:
    mode: str
    trials: int
    size: int
    violations: int
    min_edges: int
    r: int
    warning: str = ""


def thirds_edge_check(graph_or_cover, mode="plain", trials=1000, seed=0):
    """
    Sample pairs of sets of size floor(k / 3) and count the edges between them.

    In ``plain`` mode A and B are disjoint subsets of a regular graph; the count is
    guaranteed positive for Ramanujan graphs with r >= 35. In ``double_cover`` mode A is
    taken in the first class of a ``DoubleCover`` and B in the second, and the count is
    always positive.

    Parameters
    ----------
    graph_or_cover : Graph, RegularGraphReport or DoubleCover
    mode : {"plain", "double_cover"}
    trials : int
    seed : int

    Returns
    -------
    ThirdsReport
    """
    if mode == "double_cover":
        if not isinstance(graph_or_cover, DoubleCover):
            raise ParameterError("double_cover mode needs a DoubleCover")
        graph = graph_or_cover.graph
        k = graph_or_cover.k
        r = graph_or_cover.r
    elif mode == "plain":
        graph = graph_or_cover
        if isinstance(graph, RegularGraphReport):
            graph = graph.graph
        elif isinstance(graph, DoubleCover):
            raise ParameterError("plain mode needs a regular graph, not a double cover")
        if not graph.is_regular():
            raise ParameterError("plain mode needs a regular graph")
        k = graph.n
        r = graph.degree(0) if k else 0
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    size = k // 3
    if size < 1:
        raise ParameterError(f"thirds of {k} vertices are empty")
    warning = ""
    if mode == "plain" and r < kov_threshold_r():
        warning = f"r={r} < {kov_threshold_r()}: the edge bound is not guaranteed"
        logger.warning(warning)

    matrix = graph.adjacency_matrix()
    violations = 0
    min_edges = None
    for trial in range(trials):
        rng = get_rng(seed, trial)
        if mode == "plain":
            perm = rng.permutation(k)
            xs, ys = perm[:size], perm[size : 2 * size]
        else:
            xs = rng.choice(k, size=size, replace=False)
            ys = k + rng.choice(k, size=size, replace=False)
        edges = int(matrix[np.ix_(xs, ys)].sum())
        violations += edges < 1
        min_edges = edges if min_edges is None else min(min_edges, edges)

    if mode == "double_cover" and violations:
        raise LemmaViolation(f"{violations} pairs of double-cover thirds span no edge")
    return ThirdsReport(
        mode=mode,
        trials=trials,
        size=size,
        violations=int(violations),
        min_edges=int(min_edges or 0),
        r=r,
        warning=warning,
    )


@dataclass
class DoubleCover:
    """
    Bipartite double cover of U plus the perfect matching {x1 x2}.

    Vertex ``x`` of U has copies ``x`` (first class) and ``k + x`` (second class).
    """

    graph: Graph
    class_v1: np.ndarray
    class_v2: np.ndarray
    source: RegularGraphReport = field(metadata={"json": False})

    @property
    def k(self):
        return len(self.class_v1)

    @property
    def r(self):
        return self.source.r

    def copy_of(self, x, side):
        return int(x) + (self.k if side == 2 else 0)


def double_cover_with_matching(report):
    """
    Build F: edges x1 y2 and x2 y1 for every edge xy of U, and x1 x2 for every x.

    Parameters
    ----------
    report : RegularGraphReport or Graph
        The r-regular graph U.

    Returns
    -------
    DoubleCover
        An (r + 1)-regular bipartite graph on 2k vertices with 2 e(U) + k edges.
    """
    if isinstance(report, Graph):
        if not report.is_regular():
            raise ParameterError("double cover needs a regular graph")
        report = RegularGraphReport.from_graph(report)
    u = report.graph
    k = u.n
    xs, ys = u.edges[:, 0], u.edges[:, 1]
    identity = np.arange(k)
    edges = np.concatenate(
        [
            np.column_stack([xs, k + ys]),
            np.column_stack([ys, k + xs]),
            np.column_stack([identity, k + identity]),
        ]
    )
    graph = Graph(2 * k, edges)
    if graph.m != 2 * u.m + k or not np.all(graph.degrees == report.r + 1):
        raise LemmaViolation("double cover is not (r + 1)-regular with 2e + k edges")
    return DoubleCover(
        graph=graph,
        class_v1=np.arange(k, dtype=np.int64),
        class_v2=np.arange(k, 2 * k, dtype=np.int64),
        source=report,
    )


def expansion_check(cover, xs):
    """
    |N_F(A)| for A inside one class of the double cover, and whether it is at least |A|.

    The matching edges make this always true, so a failure raises ``LemmaViolation``.
    """
    xs = vertex_set(xs, cover.graph.n)
    if not xs.size:
        return ExpansionResult(0, True)
    if not (xs[-1] < cover.k or xs[0] >= cover.k):
        raise ParameterError("expansion_check needs a set within one class")
    size = len(cover.graph.neighborhood(xs))
    if size < len(xs):
        raise LemmaViolation(f"|N(A)| = {size} < |A| = {len(xs)} in a double cover")
    return ExpansionResult(size, True)
