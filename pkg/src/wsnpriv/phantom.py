"""Layer 1: source-location anonymity by phantom routing.

A message first performs a random walk away from its source (ending at a
phantom node), then floods from there to reach the sink.  The two-way
variant replaces the flood with a rendezvous: the sink pre-establishes a
receptor walk, source messages random-walk until they hit it, and follow
it home.

The adversary is a patient hunter.  It camps at a node, and for each
delivered message relocates to the transmitter it heard earliest (lowest
tick, then lowest node id).  It catches the source when it reaches the
source node at a moment the source is transmitting.  The safety period is
the number of messages the source got out before that happens.

The flooding-zone math (how many nodes a zone needs so that back-tracing
succeeds with probability below a target) is exact combinatorics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .netsim import NodeId, Topology, Transmission, bfs_distances
from .rng import SimRng

__all__ = [
    "WalkMode",
    "WalkConfig",
    "ReceptorPath",
    "HuntReport",
    "ZonePlan",
    "FloodOnly",
    "Phantom",
    "TwoWay",
    "NoRendezvousError",
    "random_walk",
    "flood",
    "build_receptor",
    "deliver_two_way",
    "hunt",
    "binom",
    "min_zone_nodes",
    "traceback_probability",
]


class NoRendezvousError(RuntimeError):
    """Two-way walk exhausted its step budget without hitting the receptor."""


class WalkMode(enum.Enum):
    PURE = "pure"
    DIRECTED = "directed"


@dataclass(frozen=True)
class WalkConfig:
    mode: WalkMode = WalkMode.PURE
    hops: int = 0

    def __post_init__(self):
        if self.hops < 0:
            raise ValueError("hops must be >= 0")


@dataclass(frozen=True)
class ReceptorPath:
    """Self-avoiding path ending at the destination."""

    nodes: tuple[NodeId, ...]

    @property
    def destination(self) -> NodeId:
        return self.nodes[-1]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


# Routing strategies for hunt().
@dataclass(frozen=True)
class FloodOnly:
    pass


@dataclass(frozen=True)
class Phantom:
    walk: WalkConfig


@dataclass(frozen=True)
class TwoWay:
    receptor_length: int
    max_steps: int = 10_000


@dataclass(frozen=True)
class HuntReport:
    safety_period: int
    captured: bool
    transmissions_total: int
    delivery_latency_hops: tuple[int, ...]
    adversary_moves: tuple[tuple[int, NodeId, NodeId], ...]  # (message, from, to)
    log: tuple[Transmission, ...] | None = None


@dataclass(frozen=True)
class ZonePlan:
    p_r: float
    hops: int
    n_min: int
    k: int


def random_walk(
    topology: Topology, source: NodeId, cfg: WalkConfig, rng: SimRng
) -> list[NodeId]:
    """Walk of cfg.hops hops from source; last element is the phantom node.

    Pure mode never immediately backtracks unless trapped.  Directed mode
    prefers neighbors strictly farther from the walk's origin, pushing the
    phantom away from the true source; falls back to the pure rule when no
    such neighbor exists.
    """
    path = [source]
    prev: NodeId | None = None
    for _ in range(cfg.hops):
        cur = path[-1]
        nbrs = topology.adjacency[cur]
        if not nbrs:
            break
        candidates: list[NodeId] = []
        if cfg.mode is WalkMode.DIRECTED:
            d_cur = topology.distance(cur, source)
            candidates = [
                n for n in nbrs if topology.distance(n, source) > d_cur
            ]
        if not candidates:
            candidates = [n for n in nbrs if n != prev] or list(nbrs)
        nxt = rng.choice(candidates)
        prev = cur
        path.append(nxt)
    return path


@dataclass(frozen=True)
class FloodResult:
    delivered: bool
    transmissions: int
    latency_hops: int
    log: tuple[Transmission, ...]


def flood(
    topology: Topology,
    origin: NodeId,
    destination: NodeId,
    payload_id: str = "msg",
    start_tick: int = 0,
) -> FloodResult:
    """Whole-field flood: every node retransmits once, destination excepted.

    A node first hearing the message at tick t retransmits at tick t; the
    origin transmits at start_tick.  Latency is the hop distance from
    origin to destination.
    """
    dist = bfs_distances(topology, origin)
    entries = []
    for node in range(topology.node_count):
        if dist[node] < 0 or node == destination:
            continue
        entries.append(
            Transmission(
                tick=start_tick + dist[node],
                sender=node,
                payload_id=payload_id,
                hearers=frozenset(topology.adjacency[node]),
            )
        )
    entries.sort(key=lambda t: (t.tick, t.sender))
    delivered = dist[destination] >= 0
    return FloodResult(
        delivered=delivered,
        transmissions=len(entries),
        latency_hops=dist[destination] if delivered else -1,
        log=tuple(entries),
    )


def build_receptor(
    topology: Topology, destination: NodeId, length: int, rng: SimRng
) -> ReceptorPath:
    """Self-avoiding walk of up to `length` hops anchored at the destination.

    Grown outward from the destination and reversed, so the stored path
    runs interior -> destination.  Truncates if the walk traps itself.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    walk = [destination]
    visited = {destination}
    for _ in range(length):
        options = [n for n in topology.adjacency[walk[-1]] if n not in visited]
        if not options:
            break
        nxt = rng.choice(options)
        walk.append(nxt)
        visited.add(nxt)
    walk.reverse()
    return ReceptorPath(nodes=tuple(walk))


def deliver_two_way(
    topology: Topology,
    source: NodeId,
    receptor: ReceptorPath,
    rng: SimRng,
    max_steps: int = 10_000,
) -> list[NodeId]:
    """Random-walk from source until the receptor is hit, then follow it home.

    Returns the full route (walk prefix + receptor suffix).  A source
    already on the receptor sends straight down the pre-established path.
    """
    index_of = {node: i for i, node in enumerate(receptor.nodes)}
    if source in index_of:
        return list(receptor.nodes[index_of[source]:])
    route = [source]
    prev: NodeId | None = None
    for _ in range(max_steps):
        cur = route[-1]
        nbrs = topology.adjacency[cur]
        candidates = [n for n in nbrs if n != prev] or list(nbrs)
        nxt = rng.choice(candidates)
        prev = cur
        route.append(nxt)
        if nxt in index_of:
            route.extend(receptor.nodes[index_of[nxt] + 1:])
            return route
    raise NoRendezvousError(
        f"no rendezvous with receptor within {max_steps} steps"
    )


class _MessageSchedule:
    """Transmission ticks for one routed message, queryable per node."""

    def __init__(self, ticks: dict[NodeId, int], transmissions: int, latency: int):
        self.ticks = ticks  # node -> earliest transmission tick
        self.transmissions = transmissions
        self.latency = latency

    def to_log(self, topology: Topology, payload_id: str) -> list[Transmission]:
        return [
            Transmission(
                tick=t,
                sender=node,
                payload_id=payload_id,
                hearers=frozenset(topology.adjacency[node]),
            )
            for node, t in sorted(self.ticks.items(), key=lambda kv: (kv[1], kv[0]))
        ]


def _schedule_flood_only(
    topology: Topology, source: NodeId, destination: NodeId, dist_cache: dict
) -> _MessageSchedule:
    if source not in dist_cache:
        dist_cache[source] = bfs_distances(topology, source)
    dist = dist_cache[source]
    ticks = {
        node: dist[node]
        for node in range(topology.node_count)
        if dist[node] >= 0 and node != destination
    }
    return _MessageSchedule(ticks, len(ticks), dist[destination])


def _schedule_phantom(
    topology: Topology,
    source: NodeId,
    destination: NodeId,
    walk_cfg: WalkConfig,
    rng: SimRng,
    dist_cache: dict,
) -> _MessageSchedule:
    path = random_walk(topology, source, walk_cfg, rng)
    h = len(path) - 1
    phantom_src = path[-1]
    if phantom_src not in dist_cache:
        dist_cache[phantom_src] = bfs_distances(topology, phantom_src)
    dist = dist_cache[phantom_src]
    ticks: dict[NodeId, int] = {}
    transmissions = 0
    # Flood phase from the phantom node, offset by the walk length.
    for node in range(topology.node_count):
        if dist[node] >= 0 and node != destination:
            ticks[node] = h + dist[node]
            transmissions += 1
    # Walk phase: node path[i] forwards at tick i (earliest occurrence wins).
    for i in range(h):
        node = path[i]
        if node not in ticks or i < ticks[node]:
            ticks[node] = i
        transmissions += 1
    return _MessageSchedule(ticks, transmissions, h + dist[destination])


def _schedule_two_way(
    topology: Topology,
    source: NodeId,
    receptor: ReceptorPath,
    rng: SimRng,
    max_steps: int,
) -> _MessageSchedule:
    route = deliver_two_way(topology, source, receptor, rng, max_steps)
    ticks: dict[NodeId, int] = {}
    for i, node in enumerate(route[:-1]):  # final node is the destination
        if node not in ticks:
            ticks[node] = i
    return _MessageSchedule(ticks, len(route) - 1, len(route) - 1)


def hunt(
    topology: Topology,
    strategy: FloodOnly | Phantom | TwoWay,
    message_budget: int,
    rng: SimRng,
    adversary_start: NodeId | None = None,
    record_log: bool = False,
) -> HuntReport:
    """Run a back-tracing adversary against the chosen routing strategy.

    The adversary relocates at most once per message, to the transmitter it
    heard earliest from its current position.  Capture: the adversary is at
    the source when the source transmits (it either sat there at message
    start, or relocated there because it heard the source itself).
    """
    if message_budget < 1:
        raise ValueError("message_budget must be >= 1")
    source = topology.sources[0]
    destination = topology.sink
    adversary = topology.sink if adversary_start is None else adversary_start

    walk_rng = rng.stream("walk")
    dist_cache: dict[NodeId, list[int]] = {}
    receptor: ReceptorPath | None = None
    if isinstance(strategy, TwoWay):
        receptor = build_receptor(
            topology, destination, strategy.receptor_length, rng.stream("receptor")
        )

    transmissions_total = 0
    latencies: list[int] = []
    moves: list[tuple[int, NodeId, NodeId]] = []
    log: list[Transmission] = []
    captured = False
    safety_period = message_budget

    for msg in range(1, message_budget + 1):
        if isinstance(strategy, FloodOnly):
            sched = _schedule_flood_only(topology, source, destination, dist_cache)
        elif isinstance(strategy, Phantom):
            sched = _schedule_phantom(
                topology, source, destination, strategy.walk, walk_rng, dist_cache
            )
        else:
            try:
                sched = _schedule_two_way(
                    topology, source, receptor, walk_rng, strategy.max_steps
                )
            except NoRendezvousError:
                # Message lost; nothing transmitted beyond the failed walk is
                # modelled, and the adversary hears nothing this round.
                latencies.append(-1)
                continue

        transmissions_total += sched.transmissions
        latencies.append(sched.latency)
        if record_log:
            log.extend(sched.to_log(topology, f"msg:{msg}"))

        # Source transmits at tick 0 of every message; an adversary camped
        # on it catches it immediately.
        if adversary == source:
            captured = True
            safety_period = msg
            break

        heard = [
            (sched.ticks[u], u)
            for u in topology.adjacency[adversary]
            if u in sched.ticks
        ]
        if heard:
            _, target = min(heard)
            moves.append((msg, adversary, target))
            adversary = target
            if adversary == source:
                captured = True
                safety_period = msg
                break

    return HuntReport(
        safety_period=safety_period,
        captured=captured,
        transmissions_total=transmissions_total,
        delivery_latency_hops=tuple(latencies),
        adversary_moves=tuple(moves),
        log=tuple(log) if record_log else None,
    )


def binom(n: int, h: int) -> int:
    """Exact C(n, h); rejects h > n instead of returning 0."""
    if n < 0 or h < 0:
        raise ValueError("binom arguments must be non-negative")
    if h > n:
        raise ValueError(f"binom domain error: h={h} > n={n}")
    return math.comb(n, h)


def min_zone_nodes(p_r: float, hops: int) -> ZonePlan:
    """Smallest flooding-zone size whose back-trace odds beat the target.

    Finds the least N >= hops with C(N, hops) > 1/p_r, i.e. the zone is
    large enough that picking the true source among the C(N, H) candidate
    hop-subsets succeeds with probability below p_r.
    """
    if not 0.0 < p_r <= 1.0:
        raise ValueError("p_r must be in (0, 1]")
    if hops < 1:
        raise ValueError("hops must be >= 1")
    threshold = 1.0 / p_r
    n = hops
    while True:
        k = binom(n, hops)
        if k > threshold:
            return ZonePlan(p_r=p_r, hops=hops, n_min=n, k=k)
        n += 1


def traceback_probability(n: int, h: int) -> float:
    """Probability 1/C(n, h) of guessing the source among the zone subsets."""
    k = binom(n, h)
    if k < 1:
        raise ValueError("binomial coefficient must be >= 1")
    return 1.0 / k
