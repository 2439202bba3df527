"""Connected random geometric communication graphs.

Agents are placed by sequential attachment: each new position is drawn
uniformly in the arena and accepted only within communication range of
an already-placed agent, so the disk graph is connected by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GenerationError(RuntimeError):
    """Placement rejection sampling exhausted its retry budget."""


class DisconnectedGraphError(ValueError):
    """An operation requiring a connected graph received a disconnected one."""


@dataclass(frozen=True)
class Topology:
    """Static communication graph: positions, adjacency, hop diameter."""

    positions: np.ndarray   # (n, 2) float64, meters
    adjacency: np.ndarray   # (n, n) bool, symmetric, no self loops
    diameter: int

    @property
    def n_agents(self) -> int:
        return len(self.positions)

    def to_record(self) -> dict:
        """Plain-data form (positions + adjacency) for replay files."""
        return {
            "positions": [[float(x), float(y)] for x, y in self.positions],
            "adjacency": [[int(v) for v in row] for row in self.adjacency],
            "diameter": int(self.diameter),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Topology":
        positions = np.array(record["positions"], dtype=np.float64)
        adjacency = np.array(record["adjacency"], dtype=bool)
        return cls(positions=positions, adjacency=adjacency,
                   diameter=int(record["diameter"]))


def _adjacency(positions: np.ndarray, comm_radius: float) -> np.ndarray:
    delta = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(delta[..., 0], delta[..., 1])
    adj = dist <= comm_radius
    np.fill_diagonal(adj, False)
    return adj


def _hop_distances(adjacency: np.ndarray, source: int) -> np.ndarray:
    n = len(adjacency)
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adjacency[u]):
                if dist[v] < 0:
                    dist[v] = d
                    nxt.append(int(v))
        frontier = nxt
    return dist


def diameter(adjacency: np.ndarray) -> int:
    """Largest hop distance between any pair (BFS from every node).

    Raises :class:`DisconnectedGraphError` if some pair is unreachable.
    """
    n = len(adjacency)
    worst = 0
    for source in range(n):
        dist = _hop_distances(adjacency, source)
        if np.any(dist < 0):
            raise DisconnectedGraphError("graph is not connected")
        worst = max(worst, int(dist.max()))
    return worst


def neighbors(topology: Topology, agent_id: int) -> list[int]:
    """Ascending list of agents adjacent to ``agent_id``."""
    if not 0 <= agent_id < topology.n_agents:
        raise ValueError(f"unknown agent id {agent_id}")
    return [int(v) for v in np.flatnonzero(topology.adjacency[agent_id])]


def from_positions(positions: np.ndarray, comm_radius: float) -> Topology:
    positions = np.asarray(positions, dtype=np.float64)
    adj = _adjacency(positions, comm_radius)
    return Topology(positions=positions, adjacency=adj, diameter=diameter(adj))


def generate(n_agents: int, arena_side: float, comm_radius: float,
             rng: np.random.Generator, max_tries: int = 10_000) -> Topology:
    """Place agents by sequential attachment and build the disk graph.

    Each agent after the first is rejection-sampled until it lands within
    ``comm_radius`` of at least one placed agent; exceeding ``max_tries``
    draws for one agent raises :class:`GenerationError`.
    """
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if comm_radius <= 0:
        raise ValueError("comm_radius must be positive")
    positions = np.zeros((n_agents, 2))
    positions[0] = rng.uniform(0.0, arena_side, 2)
    for i in range(1, n_agents):
        for _ in range(max_tries):
            candidate = rng.uniform(0.0, arena_side, 2)
            d = np.hypot(positions[:i, 0] - candidate[0], positions[:i, 1] - candidate[1])
            if (d <= comm_radius).any():
                positions[i] = candidate
                break
        else:
            raise GenerationError(
                f"could not place agent {i} within {comm_radius} m after "
                f"{max_tries} draws (arena {arena_side} m)")
    return from_positions(positions, comm_radius)
