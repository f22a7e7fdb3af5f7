import numpy as np
import pytest

from sbl.graph import Graph, bfs_distance
from sbl.hosts import (
    LAYERED_DISTANCE,
    SAMPLING_CAVEAT,
    LayeredHost,
    RobustExpanderParams,
    build_layered_host,
    build_two_clique_host,
    exhaustive_non_embedding,
    layered_non_embeddability,
    mini_two_sided_guest,
    robust_expander_probe,
    robust_neighborhood,
    two_clique_graph,
    two_clique_separation_check,
)
from sbl.subgraph import DOES_NOT_EMBED, EMBEDS
from sbl.utils import ParameterError, get_rng


@pytest.fixture(scope="module")
def layered():
    return build_layered_host(400)


def test_layered_host_shape(layered):
    assert layered.n == 400
    assert len(layered.layers) == 100
    assert layered.layer(1).tolist() == [0, 1, 2, 3]
    assert layered.layer(100).tolist() == [396, 397, 398, 399]
    assert layered.graph.m == 2 * 6 + 99 * 16
    assert layered.graph.min_degree == 7
    assert layered.graph.max_degree == 8
    assert layered.layer_of[5] == 2


def test_layered_host_needs_multiple_of_100():
    with pytest.raises(ParameterError):
        build_layered_host(450)
    with pytest.raises(ParameterError):
        build_layered_host(0)


def test_layered_host_from_graph(layered):
    assert LayeredHost.from_graph(layered.graph).graph == layered.graph
    with pytest.raises(ParameterError):
        LayeredHost.from_graph(layered.graph.remove_edges([(0, 1)]))


def test_layered_distance(layered):
    xs = layered.layer_union(1, 35)
    ys = layered.layer_union(66, 100)
    distance, path = bfs_distance(layered.graph, xs, ys)
    assert distance == LAYERED_DISTANCE == 31
    assert len(path) == 32


@pytest.mark.parametrize("t, expected", [(1, True), (13, True), (14, False), (20, False)])
def test_layered_non_embeddability(layered, t, expected):
    cert = layered_non_embeddability(t, layered)
    assert cert.host_distance == 31
    assert cert.guest_short_path_bound == 2 * t + 4
    assert cert.conclusion is expected


def test_layered_non_embeddability_rejects(layered):
    with pytest.raises(ParameterError):
        layered_non_embeddability(1, layered.graph)
    with pytest.raises(ParameterError):
        layered_non_embeddability(0, layered)


def test_robust_params():
    params = RobustExpanderParams(0.005, 0.5)
    assert params.layered_regime_ok(400)
    assert not RobustExpanderParams(0.005, 0.4).layered_regime_ok(400)
    assert params.size_window(400) == (200, 200)
    with pytest.raises(ParameterError):
        RobustExpanderParams(0.5, 0.1)


def test_robust_neighborhood():
    graph = Graph.star(4)
    assert robust_neighborhood(graph, [1, 2], 0.4).tolist() == [0]
    assert robust_neighborhood(graph, [0], 0.2).tolist() == [1, 2, 3, 4]
    with pytest.raises(ParameterError):
        robust_neighborhood(graph, [0], 0)


def test_layered_probe_holds(layered):
    report = robust_expander_probe(layered, RobustExpanderParams(0.005, 0.5), trials=50, seed=0)
    assert report.holds
    assert report.regime_ok
    assert report.adversarial_checked > 0
    assert report.min_slack >= 0
    assert report.caveat == SAMPLING_CAVEAT


def test_two_clique_probe_finds_violation():
    host = two_clique_graph(50, 50, 2)
    report = robust_expander_probe(host, RobustExpanderParams(0.1, 0.3), trials=1, seed=0)
    assert not report.holds
    assert report.violation["rn_size"] < report.violation["required"]
    assert report.regime_ok is None


def test_probe_rejects_empty_window():
    with pytest.raises(ParameterError):
        robust_expander_probe(Graph.complete(3), RobustExpanderParams(0.1, 0.9))
    with pytest.raises(ParameterError):
        robust_expander_probe(Graph.complete(10), RobustExpanderParams(0.1, 0.3), trials=0)


def test_two_clique_graph():
    host = two_clique_graph(5, 4, 2)
    assert host.n == 7
    assert host.interior_a.tolist() == [0, 1, 2]
    assert host.overlap.tolist() == [3, 4]
    assert host.interior_b.tolist() == [5, 6]
    assert host.graph.m == 10 + 6 - 1
    assert host.graph.min_degree == host.min_degree_formula == 3
    with pytest.raises(ParameterError):
        two_clique_graph(3, 3, 4)


def test_build_two_clique_host():
    host = build_two_clique_host(1000, 0.1)
    assert host.size_a == host.size_b == 501
    assert host.overlap_size == 2
    assert host.deviation == pytest.approx(0)
    assert host.graph.min_degree == 500
    with pytest.raises(ParameterError, match="use n >="):
        build_two_clique_host(100, 0.1)


def test_mini_guest():
    guest = mini_two_sided_guest(2)
    assert guest.n == 16
    assert guest.m == 16
    assert guest.has_edge(1, 9)
    assert not guest.has_edge(2, 10)
    with pytest.raises(ParameterError):
        mini_two_sided_guest(0)


@pytest.mark.parametrize(
    "width, sizes, expected",
    [
        (1, (9, 8, 1), True),
        (2, (9, 8, 1), False),
        (2, (9, 9, 2), True),
        (3, (9, 9, 2), True),
        (3, (10, 9, 3), True),
    ],
)
def test_separation_check_agrees_with_search(width, sizes, expected):
    host = two_clique_graph(*sizes)
    guest = mini_two_sided_guest(width)
    check = two_clique_separation_check(guest, host)
    assert check.embeds is expected
    result = exhaustive_non_embedding(guest, host)
    assert result.status == (EMBEDS if expected else DOES_NOT_EMBED)
    if expected:
        assert len(check.separator) <= host.overlap_size
        assert np.unique(result.mapping).size == 16


@pytest.mark.parametrize("n", [500, 1000, 2000])
def test_layered_sizes(n):
    host = build_layered_host(n)
    assert len(host.layers) == 100
    assert all(len(layer) == n // 100 for layer in host.layers)
    assert layered_non_embeddability(1, host).host_distance == LAYERED_DISTANCE


@pytest.mark.parametrize("n", [1000, 2000])
def test_layered_robust_expansion_at_scale(n):
    host = build_layered_host(n)
    report = robust_expander_probe(host, RobustExpanderParams(0.002, 0.2), trials=1000, seed=0)
    assert report.regime_ok
    assert report.holds


def test_layered_regime_at_500():
    assert not RobustExpanderParams(0.002, 0.2).layered_regime_ok(500)


@pytest.mark.parametrize("i, j", [(1, 1), (1, 2), (3, 40), (50, 51), (1, 100), (99, 20)])
def test_layered_layer_distance(layered, i, j):
    distance, _ = bfs_distance(layered.graph, layered.layer(i), layered.layer(j))
    assert distance == abs(i - j)


@pytest.mark.parametrize("seed", range(5))
def test_robust_neighborhood_monotone(layered, seed):
    larger = get_rng(seed).choice(layered.n, size=120, replace=False)
    smaller = larger[:60]
    small_rn = set(robust_neighborhood(layered.graph, smaller, 0.005).tolist())
    large_rn = set(robust_neighborhood(layered.graph, larger, 0.005).tolist())
    assert small_rn <= large_rn
    strict_rn = set(robust_neighborhood(layered.graph, larger, 0.01).tolist())
    assert strict_rn <= large_rn
