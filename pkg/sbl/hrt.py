"""
The H_{r,t} graphs: a double-cover separator S with one broom hanging off every vertex.

Each broom is a path on t vertices whose first vertex is attached to its anchor in S and
whose last vertex carries D - 1 leaves.
"""

import dataclasses
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from sbl.expander import (
    DoubleCover,
    RegularGraphReport,
    double_cover_with_matching,
    generate_regular_report,
)
from sbl.graph import (
    Graph,
    bipartition,
    components_after_removal,
    is_connected,
    read_annotated_json,
    vertex_set,
    write_annotated_json,
)
from sbl.utils import InfeasibleParameters, ParameterError, derive_seed, logger

__all__ = [
    "ConstructionParams",
    "BroomComponent",
    "HrtGraph",
    "SeparatorCertificate",
    "StructureCheck",
    "StructureReport",
    "gamma_nominal",
    "solve_params",
    "build_hrt",
    "make_hrt",
    "broom_template",
    "verify_separator",
    "verify_structure",
    "hrt_to_json",
    "hrt_from_json",
]


def gamma_nominal(r):
    """
    The separability constant 1 / (8 r 2^r) for which the non-embedding theorem is proved.
    """
    return 1 / (8 * r * 2**r)


@dataclass(frozen=True)
class ConstructionParams:
    """
    Parameters of one H_{r,t} graph, with n = 2k (t + D).
    """

    n: int
    r: int
    t: int
    k: int
    D: int
    seed: int = 0

    def __post_init__(self):
        if self.t < 1:
            raise ParameterError(f"path length t must be at least 1, got {self.t}")
        if self.D < 2:
            raise ParameterError(f"broom degree D must be at least 2, got {self.D}")
        if self.k <= self.r:
            raise ParameterError(f"need k > r, got k={self.k}, r={self.r}")
        if self.n != 2 * self.k * (self.t + self.D):
            raise ParameterError(
                f"n={self.n} differs from 2k(t + D) = {2 * self.k * (self.t + self.D)}"
            )

    @property
    def gamma_nominal(self):
        return gamma_nominal(self.r)

    @property
    def gamma_achieved(self):
        return 2 * self.k / self.n

    @property
    def component_size(self):
        return self.t + self.D - 1

    @property
    def max_degree(self):
        return max(self.r + 2, self.D)

    def to_dict(self):
        return {
            "n": self.n,
            "r": self.r,
            "t": self.t,
            "k": self.k,
            "D": self.D,
            "seed": self.seed,
            "gamma_nominal": self.gamma_nominal,
            "gamma_achieved": self.gamma_achieved,
        }

    @classmethod
    def from_dict(cls, data):
        names = [f.name for f in dataclasses.fields(cls)]
        return cls(**{name: int(data[name]) for name in names if name in data})


def _k_is_feasible(n, r, t, k):
    return k > r and n % (2 * k) == 0 and n // (2 * k) - t >= 2


def _largest_k(n, r, t, gamma_target):
    for k in range(int(n * gamma_target / 2), r, -1):
        if _k_is_feasible(n, r, t, k):
            return k
    return None


def _nearest_n(n, r, t, k_hint, gamma_target):
    if k_hint is not None:
        multiple = max(t + 2, round(n / (2 * k_hint)))
        return 2 * k_hint * multiple
    for delta in range(1, 10 * n + 1):
        for candidate in (n - delta, n + delta):
            if candidate > 0 and _largest_k(candidate, r, t, gamma_target) is not None:
                return candidate
    return None


def solve_params(n, r, t, k_hint=None, gamma_target=0.1, seed=0):
    """
    Choose k and D with n = 2k (t + D).

    Without ``k_hint``, k is the largest value with 2k <= gamma_target n, 2k | n and
    D = n / (2k) - t >= 2.

    Parameters
    ----------
    n : int
        Target vertex count.
    r : int
        Expander degree (>= 3).
    t : int
        Path length (>= 1).
    k_hint : int, optional
        Use this k instead of searching.
    gamma_target : float
        Separator budget used in the search.
    seed : int

    Returns
    -------
    ConstructionParams
    """
    if r < 3:
        raise ParameterError(f"expander degree must be at least 3, got {r}")
    if t < 1:
        raise ParameterError(f"path length must be at least 1, got {t}")
    if n < 1:
        raise ParameterError(f"vertex count must be positive, got {n}")
    if not 0 < gamma_target <= 1:
        raise ParameterError(f"gamma_target must be in (0, 1], got {gamma_target}")

    if k_hint is not None:
        k = k_hint if _k_is_feasible(n, r, t, k_hint) else None
    else:
        k = _largest_k(n, r, t, gamma_target)
    if k is None:
        nearest = _nearest_n(n, r, t, k_hint, gamma_target)
        raise InfeasibleParameters(
            f"no feasible k for n={n}, r={r}, t={t}"
            + (f", k={k_hint}" if k_hint is not None else "")
            + f"; nearest feasible n is {nearest}",
            nearest_n=nearest,
        )
    params = ConstructionParams(n=n, r=r, t=t, k=k, D=n // (2 * k) - t, seed=seed)
    logger.debug(f"solved parameters {params.to_dict()}")
    return params


@dataclass(frozen=True)
class BroomComponent:
    index: int
    anchor: int
    first: int
    path: tuple
    last: int
    leaves: tuple

    @property
    def vertices(self):
        return self.path + self.leaves


@dataclass
class SeparatorCertificate:
    separator: np.ndarray
    gamma_required: float
    max_component_size: int
    component_count: int
    valid: bool


@dataclass
class HrtGraph:
    """
    A graph of the family H_{r,t} with its roles.

    Components are indexed by their anchor: component ``i`` hangs off separator vertex
    ``i``, so components ``0..k-1`` form A* and ``k..2k-1`` form B*.
    """

    graph: Graph
    s_a: np.ndarray
    s_b: np.ndarray
    components: list
    params: ConstructionParams
    expander: RegularGraphReport = field(default=None, metadata={"json": False})

    @property
    def separator(self):
        return np.concatenate([self.s_a, self.s_b])

    @property
    def n(self):
        return self.graph.n

    @property
    def max_degree(self):
        return self.params.max_degree

    @property
    def a_star(self):
        return self._star(self.s_a)

    @property
    def b_star(self):
        return self._star(self.s_b)

    def _star(self, anchors):
        anchors = set(anchors.tolist())
        return vertex_set(
            [v for comp in self.components if comp.anchor in anchors for v in comp.vertices]
        )

    @property
    def first_vertices(self):
        return vertex_set([comp.first for comp in self.components])

    @property
    def last_vertices(self):
        return vertex_set([comp.last for comp in self.components])

    @property
    def leaves(self):
        return vertex_set([v for comp in self.components for v in comp.leaves])

    @property
    def roles(self):
        roles = {int(v): "sa" for v in self.s_a}
        roles.update({int(v): "sb" for v in self.s_b})
        for comp in self.components:
            roles.update({v: "path" for v in comp.path})
            roles[comp.last] = "last"
            roles[comp.first] = "first"
            roles.update({v: "leaf" for v in comp.leaves})
        return roles

    @property
    def component_of(self):
        return {v: comp.index for comp in self.components for v in comp.vertices}

    def to_dict(self):
        return {
            "params": self.params,
            "graph": self.graph,
            "roles": self.roles,
            "component": self.component_of,
        }


def build_hrt(params, cover):
    """
    Assemble H from the parameters and the double cover F.

    Vertex numbering: S_A = 0..k-1, S_B = k..2k-1 (the cover's own ids), then the
    components in anchor order, each as its path (first to last) followed by its leaves.

    Parameters
    ----------
    params : ConstructionParams
    cover : DoubleCover
        (r + 1)-regular double cover with classes of size k.

    Returns
    -------
    HrtGraph
    """
    if not isinstance(cover, DoubleCover):
        raise ParameterError("build_hrt needs a DoubleCover")
    if cover.k != params.k:
        raise ParameterError(f"cover has classes of size {cover.k}, expected {params.k}")
    if not np.all(cover.graph.degrees == params.r + 1):
        raise ParameterError(f"cover is not {params.r + 1}-regular")

    k, t, size = params.k, params.t, params.component_size
    edges = [cover.graph.edges]
    components = []
    for anchor in range(2 * k):
        base = 2 * k + anchor * size
        path = tuple(range(base, base + t))
        leaves = tuple(range(base + t, base + size))
        comp = BroomComponent(
            index=anchor, anchor=anchor, first=path[0], path=path, last=path[-1], leaves=leaves
        )
        components.append(comp)
        comp_edges = [(anchor, comp.first)]
        comp_edges += list(zip(path[:-1], path[1:], strict=True))
        comp_edges += [(comp.last, leaf) for leaf in leaves]
        edges.append(np.array(comp_edges, dtype=np.int64))

    graph = Graph(params.n, np.concatenate(edges))
    logger.info(
        f"built H with n={params.n}, k={k}, t={t}, D={params.D}, "
        f"gamma_achieved={params.gamma_achieved:.4g}"
    )
    return HrtGraph(
        graph=graph,
        s_a=np.arange(k, dtype=np.int64),
        s_b=np.arange(k, 2 * k, dtype=np.int64),
        components=components,
        params=params,
        expander=cover.source,
    )


def make_hrt(n, r, t, k=None, seed=0, gamma_target=0.1, eig_tolerance=None, max_resamples=20):
    """
    Solve the parameters, sample the expander and build H in one call.
    """
    params = solve_params(n, r, t, k_hint=k, gamma_target=gamma_target, seed=seed)
    report = generate_regular_report(
        params.k,
        r,
        seed=derive_seed(seed, 0),
        eig_tolerance=eig_tolerance,
        max_resamples=max_resamples,
    )
    return build_hrt(params, double_cover_with_matching(report))


def broom_template(t, D):
    """
    The broom as a networkx tree: path 0..t-1 and D - 1 leaves on vertex t-1.
    """
    g = nx.path_graph(t)
    g.add_edges_from((t - 1, t + i) for i in range(D - 1))
    return g


def verify_separator(graph_or_hrt, gamma, separator=None):
    """
    Check that S is a gamma-separator: |S| <= gamma n and every component of G - S has at
    most gamma n vertices.

    Parameters
    ----------
    graph_or_hrt : Graph or HrtGraph
    gamma : float
    separator : iterable of int, optional
        Defaults to S_A + S_B for an ``HrtGraph``; required for a plain graph.

    Returns
    -------
    SeparatorCertificate
    """
    if isinstance(graph_or_hrt, HrtGraph):
        graph = graph_or_hrt.graph
        if separator is None:
            separator = graph_or_hrt.separator
    else:
        graph = graph_or_hrt
        if separator is None:
            raise ParameterError("verify_separator needs a separator for a plain graph")
    separator = vertex_set(separator, graph.n)
    components = components_after_removal(graph, separator)
    max_size = max((len(comp) for comp in components), default=0)
    limit = gamma * graph.n + 1e-9
    return SeparatorCertificate(
        separator=separator,
        gamma_required=gamma,
        max_component_size=max_size,
        component_count=len(components),
        valid=len(separator) <= limit and max_size <= limit,
    )


@dataclass
class StructureCheck:
    name: str
    passed: bool
    witness: object = None
    detail: str = ""


@dataclass
class StructureReport:
    checks: list

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def failures(self):
        return [check for check in self.checks if not check.passed]

    def __getitem__(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": self.checks}


def _check_bipartite(graph):
    if bipartition(graph) is not None:
        return StructureCheck("bipartite", True)
    g = graph.to_networkx()
    depth = {}
    for comp in nx.connected_components(g):
        depth.update(nx.single_source_shortest_path_length(g, min(comp)))
    # an edge between two vertices at the same depth parity closes an odd cycle
    odd = next((u, v) for u, v in graph.edge_list() if depth[u] % 2 == depth[v] % 2)
    return StructureCheck("bipartite", False, odd, "edge closes an odd cycle")


def _check_independent(graph, s_a, s_b):
    for name, part in (("S_A", s_a), ("S_B", s_b)):
        sub, ids = graph.subgraph(part)
        if sub.m:
            u, v = sub.edges[0]
            return StructureCheck(
                "separator_independent", False, (int(ids[u]), int(ids[v])), f"edge inside {name}"
            )
    return StructureCheck("separator_independent", True)


def _check_cover(graph, s_a, s_b, r):
    for part, other in ((s_a, s_b), (s_b, s_a)):
        in_other = np.zeros(graph.n, dtype=bool)
        in_other[other] = True
        for v in part:
            cross = int(in_other[graph.neighbors(v)].sum())
            if cross != r + 1:
                return StructureCheck(
                    "cover_regular", False, int(v), f"{cross} cover neighbors, expected {r + 1}"
                )
    return StructureCheck("cover_regular", True)


def _check_components(hrt):
    graph, params = hrt.graph, hrt.params
    components = components_after_removal(graph, hrt.separator)
    template = broom_template(params.t, params.D)
    nx_graph = graph.to_networkx()
    for comp in components:
        if not nx.is_isomorphic(nx_graph.subgraph(comp.tolist()), template):
            return StructureCheck(
                "broom_components", False, int(comp[0]), f"component of size {len(comp)}"
            )
    if len(components) != 2 * params.k:
        return StructureCheck(
            "broom_components",
            False,
            None,
            f"{len(components)} components, expected {2 * params.k}",
        )
    return StructureCheck("broom_components", True)


def _check_anchors(hrt):
    graph = hrt.graph
    in_sep = np.zeros(graph.n, dtype=bool)
    in_sep[hrt.separator] = True
    first_of = {comp.first: comp for comp in hrt.components}
    seen = set()
    for s in hrt.separator.tolist():
        outside = [int(v) for v in graph.neighbors(s) if not in_sep[v]]
        if len(outside) != 1 or outside[0] not in first_of or outside[0] in seen:
            return StructureCheck("anchor_bijection", False, s, f"outside neighbors {outside}")
        seen.add(outside[0])
    for comp in hrt.components:
        anchors = [int(v) for v in graph.neighbors(comp.first) if in_sep[v]]
        if anchors != [comp.anchor]:
            return StructureCheck(
                "anchor_bijection", False, comp.first, f"separator neighbors {anchors}"
            )
    return StructureCheck("anchor_bijection", True)


def _check_degrees(hrt):
    graph, params = hrt.graph, hrt.params
    for s in hrt.separator.tolist():
        if graph.degree(s) != params.r + 2:
            return StructureCheck(
                "degrees", False, s, f"separator degree {graph.degree(s)} != {params.r + 2}"
            )
    if graph.max_degree != params.max_degree:
        v = int(np.argmax(graph.degrees))
        return StructureCheck(
            "degrees", False, v, f"max degree {graph.max_degree} != {params.max_degree}"
        )
    return StructureCheck("degrees", True)


def verify_structure(hrt):
    """
    Check every defining property of an H_{r,t} graph.

    Each failed check carries a witness vertex or edge. The checks are: bipartite,
    independent S_A and S_B, (r + 1)-regular cover between them, 2k broom components,
    anchor bijection through the first vertices, connectivity, degrees, D < 3n/k and the
    sizes of A* and B*.

    Returns
    -------
    StructureReport
    """
    graph, params = hrt.graph, hrt.params
    checks = [
        _check_bipartite(graph),
        _check_independent(graph, hrt.s_a, hrt.s_b),
        _check_cover(graph, hrt.s_a, hrt.s_b, params.r),
        _check_components(hrt),
        _check_anchors(hrt),
        StructureCheck("connected", is_connected(graph)),
        _check_degrees(hrt),
        StructureCheck(
            "broom_degree_bound",
            params.D < 3 * params.n / params.k,
            detail=f"D={params.D}, 3n/k={3 * params.n / params.k:g}",
        ),
    ]
    star = params.k * params.component_size
    lower = (1 - params.gamma_achieved) * params.n / 2
    sizes_ok = (
        graph.n == params.n
        and len(hrt.a_star) == len(hrt.b_star) == star
        and star >= lower - 1e-9
    )
    checks.append(
        StructureCheck(
            "sizes", sizes_ok, detail=f"|A*|={len(hrt.a_star)}, |B*|={len(hrt.b_star)}"
        )
    )
    report = StructureReport(checks)
    for check in report.failures():
        logger.debug(f"structure check {check.name} failed: {check.witness} {check.detail}")
    return report


def hrt_to_json(hrt, filename):
    write_annotated_json(
        filename,
        hrt.graph,
        roles=hrt.roles,
        component=hrt.component_of,
        extra={"params": hrt.params.to_dict()},
    )


def hrt_from_json(filename):
    """
    Read an H_{r,t} graph written by ``hrt_to_json``, rebuilding components from the roles.
    """
    annotated = read_annotated_json(filename)
    if "params" not in annotated.extra:
        raise ParameterError(f"{filename}: no construction parameters")
    params = ConstructionParams.from_dict(annotated.extra["params"])
    graph, roles = annotated.graph, annotated.roles
    s_a = vertex_set(v for v, role in roles.items() if role == "sa")
    s_b = vertex_set(v for v, role in roles.items() if role == "sb")
    in_sep = np.zeros(graph.n, dtype=bool)
    in_sep[s_a] = True
    in_sep[s_b] = True

    members = {}
    for v, index in annotated.component.items():
        members.setdefault(index, []).append(v)
    components = []
    for index in sorted(members):
        verts = members[index]
        firsts = [v for v in verts if roles.get(v) == "first"]
        if len(firsts) != 1:
            raise ParameterError(f"{filename}: component {index} has {len(firsts)} first vertices")
        first = firsts[0]
        path = [first]
        spine = {v for v in verts if roles.get(v) in ("path", "last")}
        while True:
            step = [int(v) for v in graph.neighbors(path[-1]) if v in spine and v not in path]
            if not step:
                break
            path.append(step[0])
        anchors = [int(v) for v in graph.neighbors(first) if in_sep[v]]
        components.append(
            BroomComponent(
                index=index,
                anchor=anchors[0] if anchors else -1,
                first=first,
                path=tuple(path),
                last=path[-1],
                leaves=tuple(sorted(v for v in verts if roles.get(v) == "leaf")),
            )
        )
    return HrtGraph(graph=graph, s_a=s_a, s_b=s_b, components=components, params=params)
