#!/usr/bin/env python

import argparse
import dataclasses
import io
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from astropy.table import MaskedColumn, Table

import sbl
from sbl.bandwidth import bandwidth_lower_bound, bandwidth_search
from sbl.embedding import (
    PipelineConfig,
    dense_embed_separator,
    partition_from_dict,
    planted_regular_host,
    read_partition,
    run_pipeline,
)
from sbl.expander import (
    RegularGraphReport,
    generate_regular_report,
    mixing_sample_check,
    second_eigenvalue,
    thirds_edge_check,
)
from sbl.graph import read_annotated_json, read_graph, write_annotated_json
from sbl.hosts import (
    LayeredHost,
    RobustExpanderParams,
    build_layered_host,
    build_two_clique_host,
    layered_non_embeddability,
    robust_expander_probe,
    two_clique_graph,
)
from sbl.hrt import hrt_from_json, hrt_to_json, make_hrt, verify_separator, verify_structure
from sbl.subgraph import exact_embed
from sbl.utils import (
    LemmaViolation,
    ParameterError,
    SblException,
    atomic_write_text,
    default_seed,
    dumps,
    logger,
    read_json,
    to_jsonable,
    write_json,
)

SWEEP_COLUMNS = [
    ("n", int),
    ("r", int),
    ("t", int),
    ("k", int),
    ("D", int),
    ("seed", int),
    ("gamma_achieved", float),
    ("bw_lower", int),
    ("bw_upper", int),
    ("separator_valid", bool),
    ("structure_passed", bool),
    ("layered_nonembed", bool),
    ("pipeline_success_rate", float),
    ("error", str),
]


@dataclass
class RunConfig:
    """
    The resolved command line of a run, embedded in every report.
    """

    subcommand: str
    seed: int
    params: dict = field(default_factory=dict)
    report_format: str = "json"
    version: str = sbl.__version__

    @classmethod
    def from_args(cls, args):
        skip = {"func", "command", "action", "seed", "log_level"}
        params = {key: value for key, value in vars(args).items() if key not in skip}
        return cls(
            subcommand=" ".join(part for part in (args.command, args.action) if part),
            seed=args.seed,
            params=params,
            report_format="csv" if args.command == "sweep" else "json",
        )


def _emit(report, run, filename=None):
    data = {"run": to_jsonable(run), **to_jsonable(report)}
    if filename:
        write_json(filename, data)
        logger.info(f"wrote {filename}")
    else:
        sys.stdout.write(dumps(data))


def expander_gen(args, run):
    report = generate_regular_report(
        args.k, args.r, seed=args.seed, eig_tolerance=args.eig_tolerance
    )
    _emit(report, run, args.out)
    logger.info(
        f"r={report.r}, k={report.k}: lambda={report.lam:.4f}, "
        f"threshold={report.threshold:.4f}, ramanujan={report.is_ramanujan}"
    )


def expander_verify(args, run):
    report = RegularGraphReport.from_dict(read_json(args.input))
    lam = second_eigenvalue(report.graph)
    if abs(lam - report.lam) > 1e-6:
        raise ParameterError(f"{args.input}: stored lambda {report.lam}, measured {lam}")
    mixing = mixing_sample_check(report, trials=args.trials, seed=args.seed)
    thirds = thirds_edge_check(report.graph, trials=args.trials, seed=args.seed)
    _emit({"graph": report, "mixing": mixing, "thirds": thirds}, run, args.report)


def hrt_build(args, run):
    hrt = make_hrt(
        args.n,
        args.r,
        args.t,
        k=args.k,
        seed=args.seed,
        gamma_target=args.gamma_target,
    )
    hrt_to_json(hrt, args.out)
    logger.info(f"wrote H with n={hrt.n}, k={hrt.params.k}, D={hrt.params.D} to {args.out}")


def hrt_verify(args, run):
    hrt = hrt_from_json(args.input)
    structure = verify_structure(hrt)
    certificate = verify_separator(hrt, args.gamma)
    _emit({"structure": structure, "separator": certificate}, run, args.report)
    for check in structure.failures():
        logger.error(f"structure check {check.name} failed: {check.witness} {check.detail}")
    if not certificate.valid:
        logger.error(f"separator is not valid at gamma={args.gamma}")
    return 0 if structure.passed and certificate.valid else 1


def bw_exact(args, run):
    result = bandwidth_search(read_graph(args.input), node_limit=args.limit)
    _emit(result, run, args.report)
    return 0 if result.complete else 1


def bw_bound(args, run):
    report = bandwidth_lower_bound(
        hrt_from_json(args.input), orderings_to_probe=args.probes, seed=args.seed
    )
    _emit(report, run, args.report)
    logger.info(f"bandwidth in [{report.lower_bound}, {report.upper_bound}]")


def _read_host(filename):
    annotated = read_annotated_json(filename) if filename.endswith(".json") else None
    if annotated is None:
        return read_graph(filename), {}
    info = annotated.extra.get("host", {})
    if info.get("kind") == "layered":
        return LayeredHost.from_graph(annotated.graph), annotated.extra
    if info.get("kind") == "twoclique":
        host = two_clique_graph(info["size_a"], info["size_b"], info["overlap"])
        if host.graph != annotated.graph:
            raise ParameterError(f"{filename}: graph does not match its two-clique description")
        return host, annotated.extra
    return annotated.graph, annotated.extra


def host_layered(args, run):
    host = build_layered_host(args.n)
    write_annotated_json(args.out, host.graph, extra={"host": {"kind": "layered"}})


def host_twoclique(args, run):
    host = build_two_clique_host(args.n, args.gamma)
    info = {
        "kind": "twoclique",
        "size_a": host.size_a,
        "size_b": host.size_b,
        "overlap": host.overlap_size,
        "deviation": host.deviation,
    }
    write_annotated_json(args.out, host.graph, extra={"host": info})
    logger.info(f"two-clique host min degree {host.graph.min_degree}")


def host_planted(args, run):
    graph, partition = planted_regular_host(
        args.n,
        args.ell,
        args.d,
        args.delta_super,
        seed=args.seed,
        density=args.density,
        inner_density=args.inner_density,
        exceptional=args.exceptional,
        eps=args.eps,
    )
    extra = {"host": {"kind": "planted"}, "partition": to_jsonable(partition)}
    write_annotated_json(args.out, graph, extra=extra)


def host_probe_robust(args, run):
    host, _ = _read_host(args.input)
    params = RobustExpanderParams(args.nu, args.tau)
    report = robust_expander_probe(host, params, trials=args.trials, seed=args.seed)
    _emit(report, run, args.report)
    return 0 if report.holds else 1


def host_certify_nonembed(args, run):
    host, _ = _read_host(args.input)
    if not isinstance(host, LayeredHost):
        raise ParameterError(f"{args.input} is not a layered host")
    certificate = layered_non_embeddability(args.t, host)
    _emit(certificate, run, args.report)
    logger.info(f"t={args.t}: H does not embed: {certificate.conclusion}")


def _pipeline_config(args):
    config = PipelineConfig.reference() if args.reference else PipelineConfig()
    overrides = {
        name: getattr(args, name)
        for name in ("gamma", "eps", "d", "delta", "rho", "c", "alpha", "slack")
        if getattr(args, name) is not None
    }
    return dataclasses.replace(config, **overrides)


def embed_pipeline(args, run):
    hrt = hrt_from_json(args.guest)
    if args.host:
        graph, extra = _read_host(args.host)
        if args.partition:
            partition = read_partition(args.partition, graph)
        elif "partition" in extra:
            partition = partition_from_dict(extra["partition"], graph)
        else:
            raise ParameterError(f"{args.host} has no partition; pass --partition")
    else:
        graph, partition = planted_regular_host(
            args.host_n or hrt.n,
            args.ell,
            args.host_d,
            args.delta_super,
            seed=args.seed,
            density=args.density,
            inner_density=args.inner_density,
        )
    report = run_pipeline(hrt, graph, partition, _pipeline_config(args), seed=args.seed)
    _emit(report, run, args.report)
    return 0 if report.success else 1


def embed_dense(args, run):
    guest = read_graph(args.guest)
    host = read_graph(args.host)
    embedding = dense_embed_separator(
        guest, host, rho=args.rho, seed=args.seed, retries=args.retries
    )
    _emit(embedding, run, args.report)


def embed_exact(args, run):
    result = exact_embed(read_graph(args.guest), read_graph(args.host), node_limit=args.limit)
    data = {"status": result.status, "map": result.mapping, "nodes": result.nodes}
    _emit(data, run, args.report)
    logger.info(f"exact embedding: {result.status} after {result.nodes} nodes")


def _sweep_point(point):
    n, r, t, k, seed, probes, pipeline_seeds = point
    row = {"n": n, "r": r, "t": t, "k": k, "seed": seed}
    try:
        hrt = make_hrt(n, r, t, k=k, seed=seed)
        params = hrt.params
        bound = bandwidth_lower_bound(hrt, orderings_to_probe=probes, seed=seed)
        row.update(
            k=params.k,
            D=params.D,
            gamma_achieved=params.gamma_achieved,
            bw_lower=bound.lower_bound,
            bw_upper=bound.upper_bound,
            separator_valid=verify_separator(hrt, params.gamma_achieved).valid,
            structure_passed=verify_structure(hrt).passed,
        )
        if n % 100 == 0:
            row["layered_nonembed"] = layered_non_embeddability(
                t, build_layered_host(n)
            ).conclusion
        if pipeline_seeds:
            successes = 0
            for s in range(pipeline_seeds):
                graph, partition = planted_regular_host(
                    n, 10, 0.5, 0.3, seed=s, density=0.7, inner_density=0.7
                )
                report = run_pipeline(hrt, graph, partition, PipelineConfig.reference(), seed=s)
                successes += report.success
            row["pipeline_success_rate"] = successes / pipeline_seeds
    except LemmaViolation:
        raise
    except SblException as err:
        row["error"] = f"{type(err).__name__}: {err}"
    return row


def _sweep_table(rows):
    table = Table()
    for name, dtype in SWEEP_COLUMNS:
        values = [row.get(name) for row in rows]
        mask = [value is None for value in values]
        fill = {int: 0, float: 0.0, bool: False, str: ""}[dtype]
        data = np.array([fill if m else value for value, m in zip(values, mask, strict=True)])
        if dtype is str:
            table[name] = data.astype(str) if rows else np.array([], dtype=str)
        else:
            table[name] = MaskedColumn(data.astype(dtype), mask=mask, name=name)
    return table


def sweep(args, run):
    points = [
        (n, r, t, k, args.seed, args.probes, args.pipeline_seeds)
        for n, r, t, k in itertools.product(args.n, args.r, args.t, args.k or [None])
    ]
    if args.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(point) for point in points]
    table = _sweep_table(rows)
    buffer = io.StringIO()
    table.write(buffer, format="ascii.csv")
    atomic_write_text(args.out, buffer.getvalue())
    write_json(Path(args.out).with_suffix(".run.json"), run)
    failed = sum(bool(row.get("error")) for row in rows)
    logger.info(f"wrote {len(rows)} sweep rows to {args.out} ({failed} failed)")


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=default_seed(), help="Random seed")


def _add_pipeline_options(parser):
    parser.add_argument(
        "--reference",
        action="store_true",
        help=(
            "Reference settings (eps=0.2, d=0.5, delta=0.3, c=0.2, alpha=0.5). Without it eps"
            " defaults to d/20, which sampled regularity rejects on desk-scale hosts"
        ),
    )
    for name in ("gamma", "eps", "d", "delta", "rho", "c", "alpha", "slack"):
        parser.add_argument(f"--{name}", type=float, default=None)


def get_parser():
    parse = argparse.ArgumentParser(description="Separators, bandwidth and spanning embeddings")
    levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
    levels = [lvl.lower() for lvl in levels]
    parse.add_argument("--log-level", help="Set the log level", default="info", choices=levels)
    commands = parse.add_subparsers(dest="command", required=True)

    expander = commands.add_parser("expander").add_subparsers(dest="action", required=True)
    p = expander.add_parser("gen", help="Generate a near-Ramanujan regular graph")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--eig-tolerance", type=float, default=None)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=expander_gen)
    p = expander.add_parser("verify", help="Re-check a generated regular graph")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=expander_verify)

    hrt = commands.add_parser("hrt").add_subparsers(dest="action", required=True)
    p = hrt.add_parser("build", help="Build an H_{r,t} graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--gamma-target", type=float, default=0.1)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=hrt_build)
    p = hrt.add_parser("verify", help="Verify the structure and the separator of H")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=hrt_verify)

    bw = commands.add_parser("bw").add_subparsers(dest="action", required=True)
    p = bw.add_parser("exact", help="Exact bandwidth by branch and bound")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--limit", type=int, default=1_000_000)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=bw_exact)
    p = bw.add_parser("bound", help="Certified bandwidth bounds of H")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=bw_bound)

    host = commands.add_parser("host").add_subparsers(dest="action", required=True)
    p = host.add_parser("layered", help="The 100-layer host")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=host_layered)
    p = host.add_parser("twoclique", help="Two overlapping cliques")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=host_twoclique)
    p = host.add_parser("planted", help="Host with a planted regular partition")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, default=10)
    p.add_argument("--d", type=float, default=0.5)
    p.add_argument("--delta-super", type=float, default=0.3)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--inner-density", type=float, default=0.0)
    p.add_argument("--exceptional", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=host_planted)
    p = host.add_parser("probe-robust", help="Sample robust expansion")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=host_probe_robust)
    p = host.add_parser("certify-nonembed", help="Distance obstruction on the layered host")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=host_certify_nonembed)

    embed = commands.add_parser("embed").add_subparsers(dest="action", required=True)
    p = embed.add_parser("pipeline", help="Embed H into a dense host")
    p.add_argument("--guest", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--partition", default=None)
    p.add_argument("--report")
    p.add_argument("--host-n", type=int, default=None, help="Planted host size")
    p.add_argument("--ell", type=int, default=10)
    p.add_argument("--host-d", type=float, default=0.5)
    p.add_argument("--delta-super", type=float, default=0.3)
    p.add_argument("--density", type=float, default=0.7)
    p.add_argument("--inner-density", type=float, default=0.7)
    _add_pipeline_options(p)
    _add_seed(p)
    p.set_defaults(func=embed_pipeline)
    p = embed.add_parser("dense", help="Dense greedy embedding")
    p.add_argument("--guest", required=True)
    p.add_argument("--host", required=True)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--retries", type=int, default=20)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=embed_dense)
    p = embed.add_parser("exact", help="Exact subgraph search")
    p.add_argument("--guest", required=True)
    p.add_argument("--host", required=True)
    p.add_argument("--limit", type=int, default=1_000_000)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=embed_exact)

    p = commands.add_parser("sweep", help="Grid of constructions and certificates as CSV")
    p.add_argument("--n", type=int, nargs="*", default=[])
    p.add_argument("--r", type=int, nargs="*", default=[])
    p.add_argument("--t", type=int, nargs="*", default=[])
    p.add_argument("--k", type=int, nargs="*", default=[])
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--pipeline-seeds", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=sweep, action=None)
    return parse


def dispatch(argv=None):
    """
    Run the command line ``argv`` and return the exit code.

    0 on success, 1 when a check or a search fails, 2 on bad parameters or input, 3 when a
    mathematical invariant is violated.
    """
    parser = get_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2

    logger.setLevel(args.log_level.upper())
    run = RunConfig.from_args(args)
    try:
        return args.func(args, run) or 0
    except LemmaViolation as e:
        logger.error(f"Invariant violated: {e}")
        return 3
    except ParameterError as e:
        logger.error(f"Error: {e}")
        return 2
    except SblException as e:
        logger.error(f"Error: {e}")
        return 1
    except FileNotFoundError as e:
        logger.error(f"Error: {e}")
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
