import math

import numpy as np
import pytest

from sbl.bandwidth import (
    BandwidthBoundReport,
    Ordering,
    bandwidth_lower_bound,
    bandwidth_lower_bounds,
    bandwidth_search,
    brute_force_bandwidth,
    exact_bandwidth,
    heuristic_ordering,
    ordering_stretch,
    probe_set_size,
    random_ordering,
    short_path_witness,
)
from sbl.graph import Graph
from sbl.hrt import make_hrt, verify_separator
from sbl.utils import LemmaViolation, ParameterError, get_rng


def random_graph(n, p, seed):
    rng = get_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return Graph(n, np.argwhere(upper))


@pytest.fixture(scope="module")
def reference_hrt():
    return make_hrt(800, 5, 1, seed=0)


def test_ordering():
    ordering = Ordering.from_sequence([2, 0, 1])
    assert ordering.positions.tolist() == [1, 2, 0]
    assert ordering.sequence.tolist() == [2, 0, 1]
    with pytest.raises(ParameterError):
        Ordering([0, 0, 1])
    with pytest.raises(ParameterError):
        Ordering.from_sequence([1, 2])


def test_ordering_stretch():
    path = Graph.path(5)
    assert ordering_stretch(path, range(5)) == 1
    assert ordering_stretch(path, [0, 2, 4, 1, 3]) == 3
    assert ordering_stretch(Graph.empty(3), range(3)) == 0
    with pytest.raises(ParameterError):
        ordering_stretch(path, range(4))


@pytest.mark.parametrize(
    "graph, expected",
    [
        (Graph.path(6), 1),
        (Graph.cycle(7), 2),
        (Graph.complete(5), 4),
        (Graph.star(6), 3),
        (Graph.complete_bipartite(3, 3), 4),
        (Graph.empty(4), 0),
    ],
)
def test_exact_bandwidth_known(graph, expected):
    assert exact_bandwidth(graph) == expected


@pytest.mark.parametrize("seed", range(6))
def test_search_matches_brute_force(seed):
    graph = random_graph(8, 0.35, seed)
    result = bandwidth_search(graph)
    assert result.complete
    assert result.value == brute_force_bandwidth(graph)
    assert ordering_stretch(graph, result.ordering) == result.value


def test_search_budget():
    graph = random_graph(40, 0.15, seed=3)
    result = bandwidth_search(graph, node_limit=1)
    assert result.lower <= result.upper
    if not result.complete:
        assert result.value is None
        assert ordering_stretch(graph, result.ordering) == result.upper


def test_brute_force_limit():
    with pytest.raises(ParameterError):
        brute_force_bandwidth(Graph.path(10))


def test_simple_lower_bounds():
    assert bandwidth_lower_bounds(Graph.star(6)) == {"degree": 3, "diameter": 3}
    assert bandwidth_lower_bounds(Graph.path(4))["diameter"] == 1


@pytest.mark.parametrize("strategy", ["bfs_level", "min_width_greedy"])
def test_heuristic_orderings(strategy):
    graph = random_graph(30, 0.2, seed=1)
    ordering, stretch = heuristic_ordering(graph, strategy, seed=2)
    assert len(ordering) == 30
    assert stretch == ordering_stretch(graph, ordering)
    assert stretch >= max(bandwidth_lower_bounds(graph).values())


def test_heuristic_unknown_strategy():
    with pytest.raises(ParameterError):
        heuristic_ordering(Graph.path(3), "spiral")


def test_short_path_witness(reference_hrt):
    hrt = reference_hrt
    size = probe_set_size(hrt.n)
    assert size == 280
    ordering = random_ordering(hrt.n, seed=5)
    sequence = ordering.sequence
    witness = short_path_witness(hrt, sequence[:size], sequence[-size:])
    assert witness.length <= 2 * hrt.params.t + 4
    assert witness.path[0] == witness.x
    assert witness.path[-1] == witness.y
    with pytest.raises(ParameterError):
        short_path_witness(hrt, sequence[:10], sequence[-size:])
    with pytest.raises(ParameterError):
        short_path_witness(hrt, sequence[:size], sequence[:size])


def test_reference_lower_bound(reference_hrt):
    report = bandwidth_lower_bound(reference_hrt, orderings_to_probe=10, seed=0)
    assert report.lower_bound == 40
    assert report.lower_provenance == "short_path_certificate"
    assert report.upper_bound >= 40
    assert report.probes == 12
    assert report.min_probe_stretch >= 40
    assert report.max_witness_length <= 6
    assert ordering_stretch(reference_hrt.graph, report.upper_witness) == report.upper_bound


def test_long_path_lower_bound():
    hrt = make_hrt(200, 3, 3, seed=1)
    report = bandwidth_lower_bound(hrt, orderings_to_probe=3, seed=1)
    assert report.lower_bound == 6
    assert report.t_used == 3


def test_lower_bound_needs_hrt():
    with pytest.raises(ParameterError):
        bandwidth_lower_bound(Graph.path(10))


def test_report_rejects_inconsistent_bounds():
    with pytest.raises(LemmaViolation):
        BandwidthBoundReport(
            n=4,
            lower_bound=3,
            lower_provenance="x",
            upper_bound=2,
            upper_witness=Ordering(np.arange(4)),
            upper_strategy="bfs_level",
        )


def known_families():
    for n in range(2, 13):
        yield f"path{n}", Graph.path(n), 1
        yield f"complete{n}", Graph.complete(n), n - 1
        yield f"star{n}", Graph.star(n - 1), math.ceil((n - 1) / 2)
        if n >= 3:
            yield f"cycle{n}", Graph.cycle(n), 2


@pytest.mark.parametrize(
    "graph, expected",
    [pytest.param(graph, expected, id=name) for name, graph, expected in known_families()],
)
def test_search_known_families(graph, expected):
    result = bandwidth_search(graph)
    assert result.complete
    assert result.value == expected


@pytest.mark.parametrize("seed", range(200))
def test_search_matches_brute_force_small(seed):
    n = 4 + seed % 6
    graph = random_graph(n, 0.2 + 0.1 * (seed % 5), seed=1000 + seed)
    result = bandwidth_search(graph)
    assert result.complete
    assert result.value == brute_force_bandwidth(graph)


@pytest.fixture(scope="module")
def degree35_hrt():
    return make_hrt(800, 35, 1, seed=0)


def test_degree35_guest(degree35_hrt):
    hrt = degree35_hrt
    assert (hrt.params.k, hrt.params.D) == (40, 9)
    assert verify_separator(hrt, hrt.params.gamma_achieved).valid
    report = bandwidth_lower_bound(hrt, orderings_to_probe=100, seed=0)
    assert report.lower_bound == 40
    assert report.probes == 102
    assert report.min_probe_stretch >= 40


def test_degree35_short_paths(degree35_hrt):
    hrt = degree35_hrt
    size = probe_set_size(hrt.n)
    for seed in range(100):
        sequence = get_rng(seed).permutation(hrt.n)
        witness = short_path_witness(hrt, sequence[:size], sequence[-size:])
        assert witness.length <= 6
