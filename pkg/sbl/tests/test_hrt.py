import dataclasses

import networkx as nx
import numpy as np
import pytest

from sbl.graph import Graph, write_annotated_json
from sbl.hrt import (
    ConstructionParams,
    broom_template,
    build_hrt,
    gamma_nominal,
    hrt_from_json,
    hrt_to_json,
    make_hrt,
    solve_params,
    verify_separator,
    verify_structure,
)
from sbl.utils import InfeasibleParameters, ParameterError


@pytest.fixture(scope="module")
def reference_hrt():
    return make_hrt(800, 5, 1, seed=0)


@pytest.fixture(scope="module")
def long_hrt():
    return make_hrt(200, 3, 3, seed=1)


def test_solve_params_reference():
    params = solve_params(800, 5, 1)
    assert (params.k, params.D) == (40, 9)
    assert params.gamma_achieved == pytest.approx(0.1)
    assert params.component_size == 9
    assert params.max_degree == 9


def test_solve_params_with_k():
    params = solve_params(200, 3, 3, k_hint=10)
    assert params.D == 7
    assert params.n == 2 * params.k * (params.t + params.D)


def test_solve_params_infeasible_suggests_n():
    with pytest.raises(InfeasibleParameters) as exc:
        solve_params(801, 5, 1)
    assert exc.value.nearest_n == 800
    assert "nearest feasible n is 800" in str(exc.value)


def test_solve_params_infeasible_k_hint():
    with pytest.raises(InfeasibleParameters) as exc:
        solve_params(800, 5, 1, k_hint=30)
    assert exc.value.nearest_n == 780


@pytest.mark.parametrize(
    "n, r, t, gamma_target",
    [(800, 2, 1, 0.1), (800, 5, 0, 0.1), (0, 5, 1, 0.1), (800, 5, 1, 0), (800, 5, 1, 1.5)],
)
def test_solve_params_rejects(n, r, t, gamma_target):
    with pytest.raises(ParameterError):
        solve_params(n, r, t, gamma_target=gamma_target)


def test_construction_params_checks_n():
    with pytest.raises(ParameterError, match="differs"):
        ConstructionParams(n=801, r=5, t=1, k=40, D=9)
    with pytest.raises(ParameterError):
        ConstructionParams(n=800, r=5, t=1, k=40, D=1)


def test_gamma_nominal():
    assert gamma_nominal(5) == pytest.approx(1 / 1280)
    assert gamma_nominal(35) < 1e-12


def test_broom_template():
    broom = broom_template(3, 4)
    assert broom.number_of_nodes() == 6
    assert nx.is_tree(broom)
    assert broom.degree(2) == 4


def test_reference_structure(reference_hrt):
    hrt = reference_hrt
    report = verify_structure(hrt)
    assert report.passed, report.failures()
    assert hrt.n == 800
    assert len(hrt.separator) == 80
    assert hrt.s_a.tolist() == list(range(40))
    assert hrt.s_b.tolist() == list(range(40, 80))
    assert len(hrt.a_star) == len(hrt.b_star) == 360
    assert hrt.graph.max_degree == 9


def test_reference_numbering(reference_hrt):
    hrt = reference_hrt
    comp = hrt.components[3]
    base = 80 + 3 * 9
    assert comp.anchor == 3
    assert comp.first == comp.last == base
    assert comp.leaves == tuple(range(base + 1, base + 9))
    assert hrt.roles[base] == "first"
    assert hrt.roles[base + 1] == "leaf"
    assert hrt.component_of[base + 5] == 3


def test_long_paths(long_hrt):
    hrt = long_hrt
    assert verify_structure(hrt).passed
    comp = hrt.components[0]
    assert len(comp.path) == 3
    assert hrt.roles[comp.path[1]] == "path"
    assert hrt.roles[comp.last] == "last"
    assert hrt.graph.degree(comp.last) == hrt.params.D
    assert np.all(hrt.graph.degrees[hrt.separator] == hrt.params.r + 2)


def test_separator_certificate(reference_hrt):
    cert = verify_separator(reference_hrt, 0.1)
    assert cert.valid
    assert cert.max_component_size == 9
    assert cert.component_count == 80
    assert not verify_separator(reference_hrt, 0.05).valid


def test_separator_on_plain_graph():
    graph = Graph.path(9)
    assert verify_separator(graph, 1 / 3, separator=[3, 7]).valid
    assert not verify_separator(graph, 1 / 3, separator=[1]).valid
    with pytest.raises(ParameterError):
        verify_separator(graph, 0.5)


def test_structure_detects_missing_anchor_edge(reference_hrt):
    hrt = reference_hrt
    comp = hrt.components[0]
    broken = dataclasses.replace(hrt, graph=hrt.graph.remove_edges([(comp.anchor, comp.first)]))
    report = verify_structure(broken)
    assert not report.passed
    assert not report["anchor_bijection"].passed
    assert not report["connected"].passed


def test_structure_detects_edge_inside_separator(reference_hrt):
    hrt = reference_hrt
    broken = dataclasses.replace(hrt, graph=hrt.graph.add_edges([(0, 1)]))
    report = verify_structure(broken)
    assert not report["separator_independent"].passed
    assert report["separator_independent"].witness == (0, 1)
    assert not report["bipartite"].passed
    assert not report["degrees"].passed


def test_build_hrt_rejects_bad_cover(reference_hrt):
    params = reference_hrt.params
    with pytest.raises(ParameterError):
        build_hrt(params, reference_hrt.graph)


@pytest.mark.parametrize("which", ["reference_hrt", "long_hrt"])
def test_json_round_trip(which, request, tmp_path):
    hrt = request.getfixturevalue(which)
    filename = tmp_path / "h.json"
    hrt_to_json(hrt, filename)
    clone = hrt_from_json(filename)
    assert clone.graph == hrt.graph
    assert clone.params == hrt.params
    assert clone.components == hrt.components
    assert verify_structure(clone).passed


def test_json_without_params(tmp_path):
    filename = tmp_path / "g.json"
    write_annotated_json(filename, Graph.path(3))
    with pytest.raises(ParameterError, match="no construction parameters"):
        hrt_from_json(filename)


def test_make_hrt_is_deterministic():
    assert make_hrt(200, 3, 3, seed=4).graph == make_hrt(200, 3, 3, seed=4).graph
