import itertools

import numpy as np
import pytest

from sbl.embedding.assignment import (
    AssignmentState,
    assign_components,
    cluster_targets,
    reassign_first_vertices,
    rebalance_leaves,
)
from sbl.embedding.blowup import blowup_embed, check_restrictions
from sbl.embedding.partition import planted_regular_host, reduced_graph_and_matching
from sbl.hrt import make_hrt
from sbl.subgraph import verify_embedding
from sbl.utils import EmbeddingFailed, ParameterError


@pytest.fixture(scope="module")
def prepared():
    """
    A small guest with its separator mapped onto a clique of exceptional host vertices and
    its components assigned to four dense clusters.
    """
    hrt = make_hrt(200, 3, 3, seed=1)
    graph, partition = planted_regular_host(
        220, 4, 0.5, 0.3, seed=3, density=0.9, inner_density=0.9, exceptional=20
    )
    w0 = partition.exceptional
    graph = graph.add_edges(list(itertools.combinations(w0.tolist(), 2)))
    reduced = reduced_graph_and_matching(partition, graph=graph)
    image_of = {int(x): int(w0[i]) for i, x in enumerate(hrt.separator)}
    targets = cluster_targets(reduced.partition.sizes, 180)
    state, _ = assign_components(hrt, reduced, seed=0, targets=targets, image_of=image_of)
    reassign_first_vertices(hrt, state, graph, reduced, 0.1)
    rebalance_leaves(hrt, state, graph, reduced, 0.3, targets=targets)
    return hrt, state, graph, reduced.partition


def test_check_restrictions_passes(prepared):
    _, state, _, partition = prepared
    log = check_restrictions(state, partition, 0.2, 0.5)
    assert log.passed
    assert [check.name for check in log.checks] == [
        "restriction_size",
        "restriction_count",
        "cluster_capacity",
    ]


def test_check_restrictions_rejects():
    partition = planted_regular_host(40, 2, 0.5, 0.3, seed=0, density=0.9)[1]
    cluster_of = np.array([0, 0, 1])
    outside = AssignmentState(
        cluster_of=cluster_of, image_of={}, ell=2, restrictions={0: np.array([25])}
    )
    with pytest.raises(ParameterError, match="leaves cluster"):
        check_restrictions(outside, partition, 0.2, 0.5)
    small = AssignmentState(
        cluster_of=cluster_of, image_of={}, ell=2, restrictions={0: np.array([1, 2])}
    )
    with pytest.raises(ParameterError, match="restriction_size"):
        check_restrictions(small, partition, 0.2, 0.5)
    crowded = AssignmentState(
        cluster_of=np.zeros(12, dtype=np.int64),
        image_of={},
        ell=2,
        restrictions={x: np.arange(20) for x in range(12)},
    )
    with pytest.raises(ParameterError, match="restriction_count"):
        check_restrictions(crowded, partition, 0.2, 0.5)
    overfull = AssignmentState(cluster_of=np.zeros(21, dtype=np.int64), image_of={}, ell=2)
    with pytest.raises(ParameterError, match="cluster_capacity"):
        check_restrictions(overfull, partition, 0.2, 0.5)


def test_blowup_embed(prepared):
    hrt, state, graph, partition = prepared
    result = blowup_embed(hrt, state, graph, partition, seed=0)
    assert result.verified
    assert verify_embedding(hrt.graph, graph, result.map) == (True, None)
    cluster_index = partition.cluster_index()
    guests = np.flatnonzero(state.cluster_of >= 0)
    assert np.array_equal(cluster_index[result.map[guests]], state.cluster_of[guests])
    for x, v in state.image_of.items():
        assert result.map[x] == v
    for x, allowed in state.restrictions.items():
        assert result.map[x] in allowed
    assert result.stats["reseeds"] >= 1


def test_blowup_embed_is_deterministic(prepared):
    hrt, state, graph, partition = prepared
    first = blowup_embed(hrt, state, graph, partition, seed=4)
    second = blowup_embed(hrt, state, graph, partition, seed=4)
    assert first.map.tolist() == second.map.tolist()


def test_blowup_embed_fails_without_anchor_edges(prepared):
    hrt, state, graph, partition = prepared
    images = list(state.image_of.values())
    cut = [(int(v), int(h)) for v in images for h in graph.neighbors(v) if h not in images]
    sparse = graph.remove_edges(cut)
    with pytest.raises(EmbeddingFailed, match="after 2 attempts") as exc:
        blowup_embed(hrt, state, sparse, partition, reseeds=2, restarts=2)
    assert exc.value.stats["failed_stage"].startswith("path of component")
    assert exc.value.stats["dead_ends"] > 0
    assert "occupancy" in exc.value.stats
