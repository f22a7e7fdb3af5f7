import numpy as np
import pytest

from sbl.embedding.checks import StageLog
from sbl.embedding.partition import (
    RegularPartition,
    atypical_vertices,
    distribute_exceptional,
    make_super_regular,
    pair_densities,
    partition_from_dict,
    planted_regular_host,
    read_partition,
    reduced_graph_and_matching,
    restrict_partition,
    sample_regularity,
    write_partition,
)
from sbl.graph import Graph
from sbl.utils import HostDegreeError, ParameterError


@pytest.fixture(scope="module")
def planted():
    return planted_regular_host(400, 4, 0.5, 0.3, seed=1, density=0.7)


@pytest.fixture(scope="module")
def planted_with_w0():
    return planted_regular_host(410, 4, 0.5, 0.3, seed=2, density=0.7, exceptional=10)


def half_connected_pair():
    # A = 0..49, B = 50..99; only the first half of A sees B, completely
    edges = [(a, b) for a in range(25) for b in range(50, 100)]
    return Graph(100, edges)


def test_planted_host(planted):
    graph, partition = planted
    assert partition.planted
    assert partition.ell == 4
    assert partition.sizes.tolist() == [100] * 4
    assert len(partition.exceptional) == 0
    assert partition.clusters[1].tolist() == list(range(100, 200))
    for i in range(4):
        for j in range(4):
            if i != j:
                assert 0.6 < partition.pair_density[i, j] < 0.8
                rows, cols = partition.clusters[i], partition.clusters[j]
                block = graph.adjacency_matrix()[np.ix_(rows, cols)]
                assert block.sum(axis=1).min() > 30
    assert np.all(np.diag(partition.pair_density) == 0)


def test_planted_host_exceptional(planted_with_w0):
    graph, partition = planted_with_w0
    assert partition.m == 100
    assert partition.exceptional.tolist() == list(range(400, 410))
    assert graph.n == 410
    assert partition.covered.tolist() == list(range(410))


def test_planted_host_pairs():
    graph, partition = planted_regular_host(200, 4, 0.5, 0.3, seed=0, pairs=[(0, 1)], density=0.8)
    assert partition.pair_density[0, 1] > 0.7
    assert partition.pair_density[2, 3] == 0
    assert graph.count_edges(partition.clusters[2], partition.clusters[3]) == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"density": 0.4},
        {"delta_super": 0.8},
        {"ell": 0},
        {"ell": 300},
        {"d": 0},
    ],
)
def test_planted_host_rejects(kwargs):
    args = {"n": 200, "ell": 4, "d": 0.5, "delta_super": 0.3, **kwargs}
    with pytest.raises(ParameterError):
        planted_regular_host(**args)


def test_pair_densities():
    graph = Graph.complete_bipartite(2, 3)
    density = pair_densities(graph, [np.array([0, 1]), np.array([2, 3, 4])])
    assert density.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert pair_densities(graph, []).shape == (0, 0)


def test_partition_rejects_overlap():
    with pytest.raises(ParameterError, match="overlap"):
        RegularPartition(
            n=4,
            clusters=[[0, 1], [1, 2]],
            exceptional=[],
            eps=0.1,
            d=0.5,
            pair_density=np.zeros((2, 2)),
        )
    with pytest.raises(ParameterError, match="symmetric"):
        RegularPartition(
            n=4,
            clusters=[[0, 1], [2, 3]],
            exceptional=[],
            eps=0.1,
            d=0.5,
            pair_density=[[0, 1], [0, 0]],
        )


def test_cluster_index(planted_with_w0):
    _, partition = planted_with_w0
    index = partition.cluster_index()
    assert index[0] == 0
    assert index[399] == 3
    assert index[405] == -1


def test_partition_io(planted_with_w0, tmp_path):
    graph, partition = planted_with_w0
    filename = tmp_path / "partition.json"
    write_partition(filename, partition)
    clone = read_partition(filename, graph)
    assert [c.tolist() for c in clone.clusters] == [c.tolist() for c in partition.clusters]
    assert clone.exceptional.tolist() == partition.exceptional.tolist()
    assert np.allclose(clone.pair_density, partition.pair_density)
    assert clone.planted
    with pytest.raises(ParameterError, match="missing"):
        partition_from_dict({"clusters": []}, graph)


def test_sample_regularity_planted(planted):
    graph, partition = planted
    result = sample_regularity(
        graph, partition.clusters[0], partition.clusters[1], eps=0.3, samples=200, seed=0
    )
    assert not result.violated
    assert result.status == "not_falsified"
    assert result.worst_deviation < 0.3
    assert result.samples == 204


def test_sample_regularity_finds_witness():
    graph = half_connected_pair()
    result = sample_regularity(graph, range(50), range(50, 100), eps=0.2, samples=10, seed=0)
    assert result.violated
    assert result.density == pytest.approx(0.5)
    assert result.worst_deviation >= 0.2
    assert len(result.x) > 0.2 * 50
    assert len(result.y) > 0.2 * 50


def test_sample_regularity_rejects():
    graph = half_connected_pair()
    with pytest.raises(ParameterError):
        sample_regularity(graph, range(10), range(5, 20), eps=0.1)
    with pytest.raises(ParameterError):
        sample_regularity(graph, [], range(5, 20), eps=0.1)


def test_atypical_vertices():
    graph = half_connected_pair()
    atypical = atypical_vertices(graph, range(50), range(50, 100), d=0.5, eps=0.1)
    assert atypical.tolist() == list(range(25, 50))


def test_restrict_partition(planted):
    graph, partition = planted
    restricted = restrict_partition(graph, partition, [0, 1, 150])
    assert restricted.sizes.tolist() == [98] * 4
    assert restricted.clusters[0].tolist() == list(range(2, 100))
    assert restricted.clusters[1].tolist() == [v for v in range(100, 200) if v != 150][:98]
    assert restricted.exceptional.tolist() == [199, 298, 299, 398, 399]
    assert not np.isin([0, 1, 150], restricted.covered).any()


def test_reduced_graph_perfect_matching():
    graph, partition = planted_regular_host(500, 10, 0.5, 0.3, seed=3, density=0.7)
    reduced = reduced_graph_and_matching(partition, graph=graph)
    assert reduced.graph.m == 45
    assert len(reduced.matching) == 5
    assert reduced.uncovered == []
    partner = reduced.partner
    assert sorted(partner.tolist()) == list(range(10))
    assert all(partner[partner[i]] == i for i in range(10))


def test_reduced_graph_drops_odd_cluster():
    graph, partition = planted_regular_host(250, 5, 0.5, 0.3, seed=4, density=0.7)
    reduced = reduced_graph_and_matching(partition, graph=graph)
    assert len(reduced.uncovered) == 1
    assert reduced.partition.ell == 4
    assert len(reduced.partition.exceptional) == 50
    assert len(reduced.matching) == 2
    assert {v for pair in reduced.matching for v in pair} == {0, 1, 2, 3}
    with pytest.raises(ParameterError):
        reduced_graph_and_matching(partition)


def test_reduced_graph_respects_pairs():
    graph, partition = planted_regular_host(
        200, 4, 0.5, 0.3, seed=5, density=0.8, pairs=[(0, 2), (1, 3)]
    )
    reduced = reduced_graph_and_matching(partition, graph=graph)
    assert reduced.matching == [(0, 2), (1, 3)]


def test_reduced_graph_needs_matching():
    graph, partition = planted_regular_host(
        200, 4, 0.5, 0.3, seed=6, density=0.8, pairs=[(0, 1), (0, 2), (0, 3)]
    )
    with pytest.raises(HostDegreeError):
        reduced_graph_and_matching(partition, graph=graph)


def test_reduced_graph_degree_check_warns():
    graph, partition = planted_regular_host(
        200, 4, 0.5, 0.3, seed=5, density=0.8, pairs=[(0, 2), (1, 3)]
    )
    log = StageLog("reduced_graph")
    reduced_graph_and_matching(partition, graph=graph, min_degree_fraction=1.0, log=log)
    assert [check.name for check in log.warnings()] == ["reduced_min_degree"]
    with pytest.raises(HostDegreeError):
        reduced_graph_and_matching(
            partition, graph=graph, min_degree_fraction=1.0, premise=True
        )


def test_reduced_graph_sampling_drops_irregular_pair():
    graph = half_connected_pair()
    partition = RegularPartition(
        n=100,
        clusters=[np.arange(50), np.arange(50, 100)],
        exceptional=[],
        eps=0.2,
        d=0.5,
        pair_density=pair_densities(graph, [np.arange(50), np.arange(50, 100)]),
    )
    assert reduced_graph_and_matching(partition, graph=graph).graph.m == 1
    with pytest.raises(HostDegreeError, match="1 dense pairs rejected as not 0.2-regular"):
        reduced_graph_and_matching(partition, graph=graph, samples=10)


def test_make_super_regular_clean(planted):
    graph, partition = planted
    reduced = reduced_graph_and_matching(partition, graph=graph)
    result, report = make_super_regular(graph, reduced, 0.3, seed=0)
    assert report.removed_total == 0
    assert report.rounds == 1
    assert report.m_after == report.m_before == 100
    assert result.matching == reduced.matching


def test_make_super_regular_removes_low_degree(planted):
    graph, partition = planted
    reduced = reduced_graph_and_matching(partition, graph=graph)
    other = partition.clusters[reduced.partner[0]]
    graph = graph.remove_edges([(0, int(v)) for v in other if graph.has_edge(0, v)])
    log = StageLog("super_regular")
    result, report = make_super_regular(graph, reduced, 0.3, seed=0, log=log)
    assert report.removed_bad[0] == 1
    assert report.m_after == 99
    assert report.removed_total == 4
    assert result.partition.sizes.tolist() == [99] * 4
    assert 0 in result.partition.exceptional
    assert log.passed


def test_distribute_exceptional(planted_with_w0):
    graph, partition = planted_with_w0
    reduced = reduced_graph_and_matching(partition, graph=graph)
    result, report = distribute_exceptional(graph, reduced, 0.3)
    assert report.gains == [3, 3, 2, 2]
    assert report.spread == 1
    assert len(result.partition.exceptional) == 0
    assert result.partition.sizes.sum() == 410
    assert result.matching == reduced.matching


def test_distribute_exceptional_noop(planted):
    graph, partition = planted
    reduced = reduced_graph_and_matching(partition, graph=graph)
    result, report = distribute_exceptional(graph, reduced, 0.3)
    assert result is reduced
    assert report.spread == 0


def test_distribute_exceptional_stranded_vertex(planted_with_w0):
    graph, partition = planted_with_w0
    reduced = reduced_graph_and_matching(partition, graph=graph)
    graph = graph.remove_edges([(400, int(u)) for u in graph.neighbors(400)])
    with pytest.raises(HostDegreeError, match="400"):
        distribute_exceptional(graph, reduced, 0.3)
