"""Sensor-field model: immutable topologies and the transmission record.

Nodes live at 2-D positions and are adjacent iff their Euclidean distance is
within the radio range.  One designated sink (the home gateway) plus one or
more source nodes.  All experiment topologies must be connected; builders
check this at construction time.

Time is integer ticks, one hop per tick.  A Transmission records a single
broadcast: everyone within radio range of the sender hears it.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

from .rng import SimRng

__all__ = [
    "NodeId",
    "Topology",
    "Transmission",
    "DisconnectedGraphError",
    "PlacementError",
    "build_grid",
    "build_random_geometric",
    "neighbors",
    "bfs_distances",
    "shortest_path",
    "export_topology",
    "import_topology",
]

NodeId = int


class DisconnectedGraphError(ValueError):
    """Raised when a builder would produce a disconnected field."""


class PlacementError(RuntimeError):
    """Raised when random placement cannot reach a connected field."""


@dataclass(frozen=True)
class Transmission:
    tick: int
    sender: NodeId
    payload_id: str
    hearers: frozenset[NodeId]


@dataclass(frozen=True)
class Topology:
    positions: tuple[tuple[float, float], ...]
    radio_range: float
    adjacency: tuple[tuple[NodeId, ...], ...]  # sorted neighbor ids per node
    sink: NodeId
    sources: tuple[NodeId, ...]

    @property
    def node_count(self) -> int:
        return len(self.positions)

    def distance(self, a: NodeId, b: NodeId) -> float:
        (ax, ay), (bx, by) = self.positions[a], self.positions[b]
        return math.hypot(ax - bx, ay - by)


def neighbors(topology: Topology, node: NodeId) -> set[NodeId]:
    """Adjacency set of `node`; never contains `node` itself."""
    if not 0 <= node < topology.node_count:
        raise ValueError(f"invalid node id {node}")
    return set(topology.adjacency[node])


def _build_adjacency(
    positions: list[tuple[float, float]], radio_range: float
) -> tuple[tuple[NodeId, ...], ...]:
    # Spatial hash with cell size = radio range keeps this near-linear.
    cell = radio_range
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, (x, y) in enumerate(positions):
        buckets.setdefault((int(x // cell), int(y // cell)), []).append(i)
    r2 = radio_range * radio_range
    adjacency: list[list[int]] = [[] for _ in positions]
    for (cx, cy), members in buckets.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                other = buckets.get((cx + dx, cy + dy))
                if other is None:
                    continue
                for i in members:
                    xi, yi = positions[i]
                    for j in other:
                        if j <= i:
                            continue
                        xj, yj = positions[j]
                        if (xi - xj) ** 2 + (yi - yj) ** 2 <= r2:
                            adjacency[i].append(j)
                            adjacency[j].append(i)
    return tuple(tuple(sorted(nbrs)) for nbrs in adjacency)


def bfs_distances(topology: Topology, origin: NodeId) -> list[int]:
    """Hop distance from origin to every node (-1 for unreachable)."""
    dist = [-1] * topology.node_count
    dist[origin] = 0
    queue = deque([origin])
    adjacency = topology.adjacency
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = du + 1
                queue.append(v)
    return dist


def shortest_path(topology: Topology, origin: NodeId, destination: NodeId) -> list[NodeId]:
    """One BFS shortest path origin -> destination (lowest-id tie-break)."""
    prev: dict[NodeId, NodeId] = {origin: origin}
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        if u == destination:
            break
        for v in topology.adjacency[u]:
            if v not in prev:
                prev[v] = u
                queue.append(v)
    if destination not in prev:
        raise DisconnectedGraphError(
            f"no path from {origin} to {destination}"
        )
    path = [destination]
    while path[-1] != origin:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def _is_connected(adjacency: tuple[tuple[NodeId, ...], ...]) -> bool:
    n = len(adjacency)
    if n == 0:
        return False
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == n


def _finish(
    positions: list[tuple[float, float]],
    radio_range: float,
    sink: NodeId | None,
    sources: tuple[NodeId, ...] | None,
) -> Topology:
    n = len(positions)
    adjacency = _build_adjacency(positions, radio_range)
    if not _is_connected(adjacency):
        raise DisconnectedGraphError(
            f"field of {n} nodes is disconnected at radio range {radio_range}"
        )
    sink = 0 if sink is None else sink
    sources = (n - 1,) if sources is None else tuple(sources)
    if not 0 <= sink < n:
        raise ValueError(f"invalid sink id {sink}")
    for s in sources:
        if not 0 <= s < n:
            raise ValueError(f"invalid source id {s}")
    return Topology(
        positions=tuple(positions),
        radio_range=radio_range,
        adjacency=adjacency,
        sink=sink,
        sources=sources,
    )


def build_grid(
    width: int,
    height: int,
    radio_range: float = 1.0,
    sink: NodeId | None = None,
    sources: tuple[NodeId, ...] | None = None,
) -> Topology:
    """width x height unit lattice.  Node id = y * width + x.

    Default roles: sink at node 0 (one corner), single source at the
    opposite corner.
    """
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be >= 1")
    if radio_range <= 0:
        raise ValueError("radio_range must be > 0")
    positions = [(float(x), float(y)) for y in range(height) for x in range(width)]
    return _finish(positions, radio_range, sink, sources)


def build_random_geometric(
    node_count: int,
    area_side: float,
    radio_range: float,
    rng: SimRng,
    sink: NodeId | None = None,
    sources: tuple[NodeId, ...] | None = None,
    max_attempts: int = 50,
) -> Topology:
    """Uniform placement in a square; retries until connected."""
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if radio_range <= 0:
        raise ValueError("radio_range must be > 0")
    for _ in range(max_attempts):
        positions = [
            (rng.uniform(0.0, area_side), rng.uniform(0.0, area_side))
            for _ in range(node_count)
        ]
        try:
            return _finish(positions, radio_range, sink, sources)
        except DisconnectedGraphError:
            continue
    raise PlacementError(
        f"no connected placement of {node_count} nodes in {max_attempts} attempts"
    )


def export_topology(topology: Topology) -> str:
    """Serialize to a replayable JSON document."""
    doc = {
        "radio_range": topology.radio_range,
        "positions": [list(p) for p in topology.positions],
        "sink": topology.sink,
        "sources": list(topology.sources),
    }
    return json.dumps(doc, sort_keys=True)


def import_topology(text: str) -> Topology:
    doc = json.loads(text)
    positions = [(float(x), float(y)) for x, y in doc["positions"]]
    return _finish(
        positions,
        float(doc["radio_range"]),
        int(doc["sink"]),
        tuple(int(s) for s in doc["sources"]),
    )
