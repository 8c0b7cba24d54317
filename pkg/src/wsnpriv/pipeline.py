"""Per-message privacy-level selection and the end-to-end delivery flow.

The user picks one of four protection levels; that choice enables the
anonymity layer (phantom/two-way routing), the perturbation layer
(key-managed private aggregation), both, or neither.  With the
perturbation layer on, sources are paired into (S1, S2, AF) clusters and
the home gateway only ever receives the pair sum; with the anonymity layer
on, the outbound value leaves its sender via phantom routing instead of a
plain shortest path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import netsim
from .netsim import NodeId, Topology, bfs_distances, build_grid, shortest_path
from .phantom import (
    ReceptorPath,
    WalkConfig,
    WalkMode,
    build_receptor,
    deliver_two_way,
    flood,
    random_walk,
)
from .ppda import PrimeField, RoundTranscript, SppdaCluster
from .rng import SimRng

__all__ = [
    "PrivacyLevel",
    "PipelineConfig",
    "Cluster",
    "FlowRecord",
    "DeliveryReport",
    "ConfigError",
    "select_layers",
    "pair_sources",
    "run_pipeline",
]


class ConfigError(ValueError):
    """Pipeline configuration violates its invariants."""


class PrivacyLevel(enum.Enum):
    NONE = "none"
    ANONYMITY_ONLY = "anonymity-only"
    PERTURBATION_ONLY = "perturbation-only"
    FULL = "full"


LAYER_ANONYMITY = "L1"
LAYER_PERTURBATION = "L2"

_LAYERS = {
    PrivacyLevel.NONE: frozenset(),
    PrivacyLevel.ANONYMITY_ONLY: frozenset({LAYER_ANONYMITY}),
    PrivacyLevel.PERTURBATION_ONLY: frozenset({LAYER_PERTURBATION}),
    PrivacyLevel.FULL: frozenset({LAYER_ANONYMITY, LAYER_PERTURBATION}),
}


def select_layers(level: PrivacyLevel) -> frozenset[str]:
    """Which layers run for a given protection level."""
    return _LAYERS[level]


@dataclass(frozen=True)
class Cluster:
    s1: NodeId
    s2: NodeId
    af: NodeId


@dataclass(frozen=True)
class PipelineConfig:
    width: int
    height: int
    level: PrivacyLevel
    sources: tuple[NodeId, ...]
    readings: dict[NodeId, int]
    master_seed: int
    radio_range: float = 1.0
    sink: NodeId = 0
    walk: WalkConfig = WalkConfig(mode=WalkMode.DIRECTED, hops=5)
    receptor_length: int | None = None  # None -> phantom flood delivery
    modulus: int = 2**31 - 1
    pool_size: int = 256
    af_bank: int = 128
    aggregator_dummy: int = 0

    def validate(self) -> None:
        if not self.sources:
            raise ConfigError("at least one source required")
        if LAYER_PERTURBATION in select_layers(self.level) and len(self.sources) < 2:
            raise ConfigError(
                "perturbation layer needs at least two sources to form a cluster"
            )
        missing = [s for s in self.sources if s not in self.readings]
        if missing:
            raise ConfigError(f"missing readings for sources {missing}")


@dataclass(frozen=True)
class FlowRecord:
    level: PrivacyLevel
    origin: NodeId                 # node the outbound value left from
    delivered_value: int           # what the home gateway recorded
    route_hops: int
    transmissions: int
    cluster: Cluster | None = None


@dataclass
class DeliveryReport:
    level: PrivacyLevel
    flows: list[FlowRecord] = field(default_factory=list)
    transcripts: list[RoundTranscript] = field(default_factory=list)
    unpaired_sources: tuple[NodeId, ...] = ()

    def to_doc(self) -> dict:
        return {
            "level": self.level.value,
            "unpaired_sources": list(self.unpaired_sources),
            "flows": [
                {
                    "origin": fl.origin,
                    "delivered_value": fl.delivered_value,
                    "route_hops": fl.route_hops,
                    "transmissions": fl.transmissions,
                    "cluster": (
                        {"s1": fl.cluster.s1, "s2": fl.cluster.s2, "af": fl.cluster.af}
                        if fl.cluster
                        else None
                    ),
                }
                for fl in self.flows
            ],
            "transcripts": [t.to_doc() for t in self.transcripts],
        }


def pair_sources(
    sources: list[NodeId] | tuple[NodeId, ...], topology: Topology
) -> tuple[list[Cluster], list[NodeId]]:
    """Greedy nearest-pair clustering with an AF near each pair.

    The AF is a common neighbor of both sources when one exists (lowest
    id), otherwise the non-source, non-sink node minimizing its summed
    distance to the pair.  Returns (clusters, unpaired leftovers).
    """
    if len(sources) < 2:
        raise ConfigError("need at least two sources to pair")
    remaining = sorted(sources)
    forbidden = set(sources) | {topology.sink}
    dist_from = {s: bfs_distances(topology, s) for s in remaining}
    clusters: list[Cluster] = []
    while len(remaining) >= 2:
        best = None
        for i, a in enumerate(remaining):
            for b in remaining[i + 1:]:
                d = dist_from[a][b]
                if d >= 0 and (best is None or d < best[0]):
                    best = (d, a, b)
        if best is None:
            break
        _, s1, s2 = best
        remaining.remove(s1)
        remaining.remove(s2)
        common = sorted(
            set(topology.adjacency[s1]) & set(topology.adjacency[s2]) - forbidden
        )
        if common:
            af = common[0]
        else:
            candidates = [
                (dist_from[s1][n] + dist_from[s2][n], n)
                for n in range(topology.node_count)
                if n not in forbidden
                and dist_from[s1][n] >= 0
                and dist_from[s2][n] >= 0
            ]
            if not candidates:
                raise ConfigError(
                    f"no aggregator-forwarder candidate can reach both {s1} and {s2}"
                )
            af = min(candidates)[1]
        clusters.append(Cluster(s1=s1, s2=s2, af=af))
    return clusters, remaining


def _route(
    topology: Topology,
    origin: NodeId,
    cfg: PipelineConfig,
    anonymity: bool,
    rng: SimRng,
    receptor: ReceptorPath | None,
) -> tuple[int, int]:
    """Deliver origin -> sink; returns (route_hops, transmissions)."""
    sink = topology.sink
    if not anonymity:
        path = shortest_path(topology, origin, sink)
        return len(path) - 1, len(path) - 1
    if receptor is not None:
        route = deliver_two_way(topology, origin, receptor, rng)
        return len(route) - 1, len(route) - 1
    walk = random_walk(topology, origin, cfg.walk, rng)
    fl = flood(topology, walk[-1], sink)
    hops = len(walk) - 1
    return hops + fl.latency_hops, hops + fl.transmissions


def run_pipeline(config: PipelineConfig) -> DeliveryReport:
    """Execute one scenario: layer selection, aggregation, delivery."""
    config.validate()
    layers = select_layers(config.level)
    rng = SimRng(config.master_seed, "pipeline")
    topology = build_grid(
        config.width, config.height, config.radio_range,
        sink=config.sink, sources=tuple(config.sources),
    )
    field_ = PrimeField(config.modulus)
    report = DeliveryReport(level=config.level)

    receptor = None
    if LAYER_ANONYMITY in layers and config.receptor_length is not None:
        receptor = build_receptor(
            topology, topology.sink, config.receptor_length, rng.stream("receptor")
        )

    anonymity = LAYER_ANONYMITY in layers
    if LAYER_PERTURBATION in layers:
        clusters, unpaired = pair_sources(config.sources, topology)
        report.unpaired_sources = tuple(unpaired)
        for i, cluster in enumerate(clusters):
            sppda = SppdaCluster(
                rng.stream(f"cluster:{i}"),
                field_=field_,
                pool_size=config.pool_size,
                af_bank=config.af_bank,
                node_ids=(cluster.af, cluster.s1, cluster.s2),
            )
            result, transcript = sppda.run_round(
                x=config.readings[cluster.s1],
                y=config.readings[cluster.s2],
                z=config.aggregator_dummy,
            )
            report.transcripts.append(transcript)
            # The aggregate leaves from the AF; the gateway records x + y only.
            hops, tx = _route(
                topology, cluster.af, config, anonymity,
                rng.stream(f"route:{i}"), receptor,
            )
            report.flows.append(FlowRecord(
                level=config.level, origin=cluster.af,
                delivered_value=result.pair_sum,
                route_hops=hops, transmissions=tx, cluster=cluster,
            ))
    else:
        for i, source in enumerate(config.sources):
            hops, tx = _route(
                topology, source, config, anonymity,
                rng.stream(f"route:{i}"), receptor,
            )
            report.flows.append(FlowRecord(
                level=config.level, origin=source,
                delivered_value=field_.norm(config.readings[source]),
                route_hops=hops, transmissions=tx,
            ))
    return report
