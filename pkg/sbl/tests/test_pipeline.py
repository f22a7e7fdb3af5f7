import math

import pytest

from sbl.embedding import (
    PipelineConfig,
    assign_components,
    pipeline,
    planted_regular_host,
    run_pipeline,
)
from sbl.embedding.pipeline import min_degree_premise
from sbl.graph import Graph
from sbl.hrt import make_hrt
from sbl.subgraph import verify_embedding
from sbl.utils import LemmaViolation, ParameterError

STAGES = [
    "premise",
    "dense_separator",
    "reduced_graph",
    "regularity",
    "super_regular",
    "distribute_exceptional",
    "additions",
    "assign_components",
    "reassign_first",
    "rebalance_leaves",
    "blowup",
]


@pytest.fixture(scope="module")
def reference_hrt():
    return make_hrt(800, 5, 1, seed=0)


@pytest.fixture(scope="module")
def reference_run(reference_hrt):
    graph, partition = planted_regular_host(
        800, 10, 0.5, 0.3, seed=0, density=0.7, inner_density=0.7
    )
    report = run_pipeline(reference_hrt, graph, partition, PipelineConfig.reference(), seed=0)
    return graph, report


def test_reference_run(reference_hrt, reference_run):
    graph, report = reference_run
    assert report.success, report.error
    assert report.error is None
    assert [log.stage for log in report.stages] == STAGES
    assert verify_embedding(reference_hrt.graph, graph, report.embedding.map) == (True, None)
    assert report.embedding.verified


def test_reference_run_reports_premise(reference_run):
    _, report = reference_run
    assert not report.premise
    assert not report.stage("premise").data["premise"]
    assert report.gamma == pytest.approx(0.1)
    assert report.gamma_prime == pytest.approx(2 * 0.1 ** (1 / 3) - math.sqrt(0.1) - 0.2)
    assert ("premise", "gamma_prime") in [(stage, c.name) for stage, c in report.warnings()]
    with pytest.raises(KeyError):
        report.stage("nope")


def test_reference_run_is_deterministic(reference_hrt, reference_run):
    _, report = reference_run
    graph, partition = planted_regular_host(
        800, 10, 0.5, 0.3, seed=0, density=0.7, inner_density=0.7
    )
    again = run_pipeline(reference_hrt, graph, partition, PipelineConfig.reference(), seed=0)
    assert again.embedding.map.tolist() == report.embedding.map.tolist()


def test_pipeline_reports_failing_stage(reference_hrt):
    # three matched pairs: loads are multiples of 9 and never land within 2.4 of 240
    graph, partition = planted_regular_host(
        810, 6, 0.5, 0.3, seed=1, density=0.7, inner_density=0.7
    )
    config = PipelineConfig.reference(slack=0.01, retries=5)
    report = run_pipeline(reference_hrt, graph, partition, config, seed=0)
    assert not report.success
    assert report.embedding is None
    assert report.error.startswith("assign_components: ")
    assert report.stages[-1].stage == "assign_components"
    assert "failure" in report.stages[-1].data


def test_pipeline_rejects_small_host(reference_hrt):
    graph, partition = planted_regular_host(400, 4, 0.5, 0.3, seed=0, density=0.7)
    with pytest.raises(ParameterError, match="host_size"):
        run_pipeline(reference_hrt, graph, partition)


def test_pipeline_rejects_foreign_partition(reference_hrt):
    graph, _ = planted_regular_host(800, 10, 0.5, 0.3, seed=0, density=0.7)
    _, partition = planted_regular_host(810, 10, 0.5, 0.3, seed=0, density=0.7, exceptional=10)
    with pytest.raises(ParameterError, match="partition_size"):
        run_pipeline(reference_hrt, graph, partition)


@pytest.mark.parametrize(
    "kwargs",
    [{"eps": 0}, {"eps": 1.0}, {"d": -0.5}, {"delta": 1.5}, {"rho": 0}, {"retries": 0}],
)
def test_config_rejects(kwargs):
    with pytest.raises(ParameterError):
        PipelineConfig(**kwargs)


def test_config_resolve():
    config = PipelineConfig().resolve(0.04)
    assert config.gamma == 0.04
    assert config.d == pytest.approx(0.2)
    assert config.eps == pytest.approx(0.01)
    reference = PipelineConfig.reference(gamma=0.2).resolve(0.04)
    assert (reference.gamma, reference.d, reference.eps) == (0.2, 0.5, 0.2)


def test_min_degree_premise():
    # (1/2 + 3 * 0.001^(1/3)) * 10 = 8
    assert min_degree_premise(Graph.complete(10), 0.001)
    assert not min_degree_premise(Graph.complete(10).remove_edges([(0, 1), (0, 2)]), 0.001)


def test_reference_run_load_window(reference_run):
    _, report = reference_run
    (check,) = [c for c in report.stage("assign_components").checks if c.name == "load_window"]
    assert check.passed
    slack = report.config.slack
    for load, expected in zip(check.value, check.bound, strict=True):
        assert abs(load - expected) <= slack * expected


def test_load_window_is_enforced(reference_hrt, monkeypatch):
    def lopsided(*args, **kwargs):
        state, balance = assign_components(*args, **kwargs)
        balance.edge_loads[0] += balance.expected[0]
        return state, balance

    monkeypatch.setattr(pipeline, "assign_components", lopsided)
    graph, partition = planted_regular_host(
        800, 10, 0.5, 0.3, seed=0, density=0.7, inner_density=0.7
    )
    with pytest.raises(LemmaViolation, match="load_window"):
        run_pipeline(reference_hrt, graph, partition, PipelineConfig.reference(), seed=0)


def test_default_eps_names_regularity_rejection(reference_hrt):
    graph, partition = planted_regular_host(
        800, 10, 0.5, 0.3, seed=0, density=0.7, inner_density=0.7
    )
    report = run_pipeline(reference_hrt, graph, partition, seed=0)
    assert not report.success
    assert report.error.startswith("reduced_graph: ")
    assert "matching_coverage failed" in report.error
    assert "rejected as not" in report.error
    assert report.stage("reduced_graph").checks[-1].detail.startswith("(")


@pytest.mark.parametrize("host_n", [800, 1580])
def test_pipeline_success_rate(reference_hrt, host_n):
    successes = 0
    for seed in range(10):
        graph, partition = planted_regular_host(
            host_n, 10, 0.5, 0.3, seed=seed, density=0.7, inner_density=0.7
        )
        report = run_pipeline(
            reference_hrt, graph, partition, PipelineConfig.reference(), seed=seed
        )
        if report.success:
            successes += 1
            assert verify_embedding(reference_hrt.graph, graph, report.embedding.map)[0]
            assert all(not check.guaranteed for _, check in report.warnings())
    assert successes >= 8
