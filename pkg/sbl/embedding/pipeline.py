"""
End-to-end embedding of an H_{r,t} graph into a dense host with a planted partition.

The stages run in order, each consuming the state of the previous one:

1. embed H[S] with the dense greedy and remove the used host vertices
2. restrict the partition to the remaining vertices
3. build the reduced graph (regularity sampled) and a maximum matching
4. make the matched pairs super-regular
5. distribute the exceptional vertices
6. assign components to matching edges and reassign first vertices
7. rebalance leaves to fill every cluster exactly
8. place everything with the blow-up stand-in and verify the map
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from sbl.embedding.assignment import (
    assign_components,
    cluster_targets,
    reassign_first_vertices,
    rebalance_leaves,
)
from sbl.embedding.blowup import blowup_embed
from sbl.embedding.checks import StageLog
from sbl.embedding.dense import dense_embed_separator
from sbl.embedding.partition import (
    atypical_vertices,
    distribute_exceptional,
    make_super_regular,
    reduced_graph_and_matching,
    restrict_partition,
)
from sbl.subgraph import verify_embedding
from sbl.utils import (
    EmbeddingFailed,
    HostDegreeError,
    LemmaViolation,
    ParameterError,
    derive_seed,
    logger,
)

__all__ = ["PipelineConfig", "PipelineReport", "min_degree_premise", "run_pipeline"]


@dataclass
class PipelineConfig:
    """
    Parameters of the embedding pipeline.

    ``gamma`` defaults to the guest's achieved separator fraction, ``d`` to sqrt(gamma)
    and ``eps`` to d / 20. Thresholds left as None follow their gamma formulas.
    """

    gamma: float | None = None
    eps: float | None = None
    d: float | None = None
    delta: float = 0.3
    rho: float = 0.5
    slack: float = 0.1
    retries: int = 2000
    keep: int = 50
    c: float = 0.2
    alpha: float = 0.5
    first_threshold: float | None = None
    reassign_cap: float | None = None
    sample_pairs: int = 20
    blowup_reseeds: int = 5
    dense_retries: int = 20

    def __post_init__(self):
        for name in ("eps", "d", "gamma"):
            value = getattr(self, name)
            if value is not None and not 0 < value < 1:
                raise ParameterError(f"{name} must be in (0, 1), got {value}")
        for name in ("delta", "rho", "slack", "c", "alpha"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ParameterError(f"{name} must be in (0, 1], got {value}")
        if self.retries < 1 or self.keep < 1 or self.blowup_reseeds < 1:
            raise ParameterError("retries, keep and blowup_reseeds must be positive")

    @classmethod
    def reference(cls, **kwargs):
        """
        Settings of the desk-scale reference run.
        """
        defaults = {"eps": 0.2, "d": 0.5, "delta": 0.3, "c": 0.2, "alpha": 0.5}
        return cls(**{**defaults, **kwargs})

    def resolve(self, gamma):
        """
        Copy with gamma, d and eps filled in.
        """
        gamma = self.gamma if self.gamma is not None else gamma
        d = self.d if self.d is not None else math.sqrt(gamma)
        eps = self.eps if self.eps is not None else d / 20
        return dataclasses.replace(self, gamma=gamma, d=d, eps=eps)


@dataclass
class PipelineReport:
    """
    Stage logs, derived quantities and (on success) the verified embedding.
    """

    config: PipelineConfig
    premise: bool
    gamma: float
    gamma_prime: float
    gamma_dprime: float
    stages: list = field(default_factory=list)
    embedding: object = None
    success: bool = False
    error: str | None = None

    def stage(self, name):
        for log in self.stages:
            if log.stage == name:
                return log
        raise KeyError(name)

    def warnings(self):
        return [(log.stage, check) for log in self.stages for check in log.warnings()]


def min_degree_premise(graph, gamma):
    """
    Whether delta(G) >= (1/2 + 3 gamma^(1/3)) |G|.
    """
    return graph.min_degree >= (0.5 + 3 * gamma ** (1 / 3)) * graph.n


def _check_regularity(graph, reduced, config):
    log = StageLog("regularity")
    partition = reduced.partition
    worst = 0
    for i, j in reduced.graph.edges:
        a, b = partition.clusters[i], partition.clusters[j]
        count = max(
            len(atypical_vertices(graph, a, b, config.d, config.eps)),
            len(atypical_vertices(graph, b, a, config.d, config.eps)),
        )
        worst = max(worst, count / len(a))
    log.record("atypical_fraction", worst <= config.eps, worst, config.eps, guaranteed=False)
    log.data.update({"sampled_pairs": config.sample_pairs, "dropped": reduced.uncovered})
    return log


def _check_additions(reduced, before, config, premise):
    # pairs grown by the exceptional vertices stay 2 sqrt(eps)-regular in density terms
    log = StageLog("additions")
    partition = reduced.partition
    bound = 2 * math.sqrt(config.eps)
    worst = 0.0
    for i, j in reduced.matching:
        worst = max(worst, abs(partition.pair_density[i, j] - before[i, j]))
    log.record("density_shift", worst <= bound, worst, bound, guaranteed=premise)
    return log


def run_pipeline(hrt, graph, partition, config=None, seed=0):
    """
    Embed ``hrt`` into ``graph`` following the stages listed in the module docstring.

    Parameters
    ----------
    hrt : HrtGraph
    graph : Graph
        Host with at least as many vertices as the guest.
    partition : RegularPartition
        Partition of the host (planted or supplied).
    config : PipelineConfig, optional
    seed : int

    Returns
    -------
    PipelineReport
        ``success`` is False when a stage ran out of options (host too sparse, greedy
        exhausted); the failing stage is named in ``error``. Bad input and invariant
        violations raise.
    """
    config = (config or PipelineConfig()).resolve(hrt.params.gamma_achieved)
    gamma, eps, d = config.gamma, config.eps, config.d
    premise = min_degree_premise(graph, gamma)
    report = PipelineReport(
        config=config,
        premise=premise,
        gamma=gamma,
        gamma_prime=2 * gamma ** (1 / 3) - math.sqrt(gamma) - eps,
        gamma_dprime=3 * (gamma ** (1 / 3) - 2 * (eps + d)),
    )
    log = StageLog("premise")
    report.stages.append(log)
    log.record("host_size", graph.n >= hrt.n, graph.n, hrt.n, error=ParameterError)
    log.record(
        "partition_size", partition.n == graph.n, partition.n, graph.n, error=ParameterError
    )
    log.data.update(
        {"min_degree": graph.min_degree, "premise": premise, "gamma_prime": report.gamma_prime}
    )
    log.record(
        "gamma_prime",
        report.gamma_prime > gamma ** (1 / 3),
        report.gamma_prime,
        gamma ** (1 / 3),
        guaranteed=False,
    )
    if not premise:
        logger.warning(
            f"host min degree {graph.min_degree} is below (1/2 + 3 gamma^(1/3)) |G| for "
            f"gamma={gamma:.3g}; degree bounds are reported, not enforced"
        )
    partition = dataclasses.replace(partition, eps=eps, d=d)

    try:
        # Step 1
        separator_graph, separator = hrt.graph.subgraph(hrt.separator)
        step = StageLog("dense_separator")
        report.stages.append(step)
        dense = dense_embed_separator(
            separator_graph,
            graph,
            rho=config.rho,
            seed=derive_seed(seed, 1),
            retries=config.dense_retries,
        )
        image_of = {int(x): int(v) for x, v in zip(separator, dense.map, strict=True)}
        remaining = np.setdiff1d(np.arange(graph.n), dense.map)
        rest, _ = graph.subgraph(remaining)
        bound = (0.5 + 2 * gamma ** (1 / 3)) * hrt.n
        step.record(
            "remaining_min_degree",
            rest.min_degree >= bound,
            rest.min_degree,
            bound,
            guaranteed=premise,
            error=HostDegreeError,
        )
        step.data.update({"stats": dense.stats})

        # Steps 2 and 3
        partition = restrict_partition(graph, partition, dense.map)
        step = StageLog("reduced_graph")
        report.stages.append(step)
        reduced = reduced_graph_and_matching(
            partition,
            graph=graph,
            d=d,
            samples=config.sample_pairs,
            seed=derive_seed(seed, 3),
            min_degree_fraction=graph.min_degree / graph.n,
            premise=premise,
            log=step,
        )
        report.stages.append(_check_regularity(graph, reduced, config))

        # Step 4
        step = StageLog("super_regular")
        report.stages.append(step)
        reduced, _ = make_super_regular(
            graph, reduced, config.delta, seed=derive_seed(seed, 4), log=step
        )

        # Step 5
        step = StageLog("distribute_exceptional")
        report.stages.append(step)
        before = reduced.partition.pair_density
        reduced, _ = distribute_exceptional(
            graph,
            reduced,
            config.delta,
            gamma_dprime=report.gamma_dprime,
            premise=premise,
            log=step,
        )
        report.stages.append(_check_additions(reduced, before, config, premise))
        partition = reduced.partition

        # Step 6
        targets = cluster_targets(partition.sizes, hrt.n - len(hrt.separator))
        step = StageLog("assign_components")
        report.stages.append(step)
        state, balance = assign_components(
            hrt,
            reduced,
            seed=derive_seed(seed, 6),
            slack=config.slack,
            retries=config.retries,
            keep=config.keep,
            targets=targets,
            image_of=image_of,
        )
        loads, expected = np.asarray(balance.edge_loads), np.asarray(balance.expected)
        step.record(
            "load_window",
            bool(np.all(np.abs(loads - expected) <= config.slack * expected + 1e-9)),
            balance.edge_loads,
            balance.expected,
        )
        step.data.update({"balance": balance, "targets": targets})
        step = StageLog("reassign_first")
        report.stages.append(step)
        reassign_first_vertices(
            hrt,
            state,
            graph,
            reduced,
            gamma,
            threshold=config.first_threshold,
            cap=config.reassign_cap,
            premise=premise,
            log=step,
        )

        # Step 7
        step = StageLog("rebalance_leaves")
        report.stages.append(step)
        rebalance_leaves(
            hrt,
            state,
            graph,
            reduced,
            config.delta,
            targets=targets,
            gamma=gamma,
            cap=config.reassign_cap,
            premise=premise,
            log=step,
        )
        step.data["assignment"] = state

        # Step 8
        step = StageLog("blowup")
        report.stages.append(step)
        embedding = blowup_embed(
            hrt,
            state,
            graph,
            partition,
            c=config.c,
            alpha=config.alpha,
            seed=derive_seed(seed, 8),
            reseeds=config.blowup_reseeds,
        )
        step.data.update({key: embedding.stats[key] for key in ("reseeds", "dead_ends")})
    except (EmbeddingFailed, HostDegreeError) as err:
        report.error = f"{report.stages[-1].stage}: {err}"
        if isinstance(err, EmbeddingFailed):
            report.stages[-1].data["failure"] = err.stats
        logger.warning(f"pipeline stopped at {report.error}")
        return report

    ok, violation = verify_embedding(hrt.graph, graph, embedding.map)
    if not ok:
        raise LemmaViolation(f"pipeline produced an invalid map: {violation}")
    report.embedding = embedding
    report.success = True
    logger.info(f"embedded H (n={hrt.n}) into G (n={graph.n}); {len(report.warnings())} warnings")
    return report
