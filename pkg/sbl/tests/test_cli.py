import pytest
from astropy.table import Table

from sbl.graph import Graph, write_graph
from sbl.scripts.sbl_main import SWEEP_COLUMNS, dispatch
from sbl.utils import read_json


@pytest.fixture(scope="module")
def hrt_file(tmp_path_factory):
    filename = tmp_path_factory.mktemp("hrt") / "h.json"
    argv = ["hrt", "build", "--n", "200", "--r", "3", "--t", "3"]
    assert dispatch([*argv, "--out", str(filename)]) == 0
    return filename


@pytest.mark.parametrize(
    "argv, code",
    [
        ([], 2),
        (["--help"], 0),
        (["hrt"], 2),
        (["hrt", "build", "--n", "800"], 2),
        (["bw", "exact", "--in", "g.txt", "--bogus"], 2),
    ],
)
def test_parse_errors(argv, code):
    assert dispatch(argv) == code


def test_hrt_verify(hrt_file, tmp_path):
    report = tmp_path / "verify.json"
    assert dispatch(["hrt", "verify", "--in", str(hrt_file), "--report", str(report)]) == 0
    data = read_json(report)
    assert data["run"]["subcommand"] == "hrt verify"
    assert data["run"]["params"]["gamma"] == 0.1
    assert data["run"]["report_format"] == "json"
    assert set(data) == {"run", "structure", "separator"}


def test_hrt_build_infeasible(tmp_path):
    argv = ["hrt", "build", "--n", "790", "--r", "5", "--t", "1", "--out", str(tmp_path / "h")]
    assert dispatch(argv) == 2
    assert not (tmp_path / "h").exists()


def test_missing_input(tmp_path):
    assert dispatch(["hrt", "verify", "--in", str(tmp_path / "missing.json")]) == 2


def test_expander_gen_and_verify(tmp_path):
    graph_file = tmp_path / "expander.json"
    argv = ["expander", "gen", "--k", "30", "--r", "4", "--seed", "3", "--out", str(graph_file)]
    assert dispatch(argv) == 0
    data = read_json(graph_file)
    assert data["run"]["seed"] == 3
    assert data["k"] == 30
    assert data["r"] == 4
    report = tmp_path / "verify.json"
    argv = ["expander", "verify", "--in", str(graph_file), "--trials", "200"]
    assert dispatch([*argv, "--report", str(report)]) == 0
    assert set(read_json(report)) == {"run", "graph", "mixing", "thirds"}


def test_expander_gen_is_deterministic(tmp_path):
    outputs = []
    for name in ("a.json", "b.json"):
        filename = tmp_path / name
        argv = ["expander", "gen", "--k", "20", "--r", "3", "--seed", "7"]
        assert dispatch([*argv, "--out", str(filename)]) == 0
        data = read_json(filename)
        del data["run"]
        outputs.append(data)
    assert outputs[0] == outputs[1]


def test_bw_exact(tmp_path):
    graph_file = tmp_path / "c7.txt"
    write_graph(Graph.cycle(7), graph_file)
    report = tmp_path / "bw.json"
    assert dispatch(["bw", "exact", "--in", str(graph_file), "--report", str(report)]) == 0
    data = read_json(report)
    assert data["value"] == 2
    assert data["complete"]


def test_bw_bound(hrt_file, tmp_path):
    report = tmp_path / "bound.json"
    argv = ["bw", "bound", "--in", str(hrt_file), "--probes", "2", "--report", str(report)]
    assert dispatch(argv) == 0
    data = read_json(report)
    assert data["lower_bound"] == 6
    assert data["lower_bound"] <= data["upper_bound"]


@pytest.mark.parametrize("t, conclusion", [(13, True), (14, False)])
def test_layered_host_certificate(tmp_path, t, conclusion):
    host_file = tmp_path / "layered.json"
    assert dispatch(["host", "layered", "--n", "400", "--out", str(host_file)]) == 0
    report = tmp_path / "certificate.json"
    argv = ["host", "certify-nonembed", "--t", str(t), "--in", str(host_file)]
    assert dispatch([*argv, "--report", str(report)]) == 0
    data = read_json(report)
    assert data["conclusion"] == conclusion
    assert data["host_distance"] == 31


def test_certify_needs_layered_host(tmp_path):
    host_file = tmp_path / "clique.txt"
    write_graph(Graph.complete(5), host_file)
    assert dispatch(["host", "certify-nonembed", "--t", "1", "--in", str(host_file)]) == 2


def test_embed_exact(tmp_path):
    guest, host = tmp_path / "p4.txt", tmp_path / "c5.txt"
    write_graph(Graph.path(4), guest)
    write_graph(Graph.cycle(5), host)
    report = tmp_path / "exact.json"
    argv = ["embed", "exact", "--guest", str(guest), "--host", str(host)]
    assert dispatch([*argv, "--report", str(report)]) == 0
    data = read_json(report)
    assert data["status"] == "embeds"
    assert len(data["map"]) == 4


def test_empty_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert dispatch(["sweep", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines == [",".join(name for name, _ in SWEEP_COLUMNS)]
    run = read_json(tmp_path / "sweep.run.json")
    assert run["subcommand"] == "sweep"
    assert run["report_format"] == "csv"


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    argv = ["sweep", "--n", "200", "--r", "3", "--t", "3", "--probes", "2"]
    assert dispatch([*argv, "--out", str(out)]) == 0
    table = Table.read(out, format="ascii.csv")
    assert table.colnames == [name for name, _ in SWEEP_COLUMNS]
    assert len(table) == 1
    good = table[0]
    assert (good["k"], good["D"], good["bw_lower"]) == (10, 7, 6)
    assert str(good["separator_valid"]) == "True"
    assert str(good["layered_nonembed"]) == "True"
