"""Auction phase: greedy bundle construction from local knowledge.

Each round the agent bids its marginal gain on every unbundled task,
keeps only tasks whose gain strictly beats the best bid it knows, and
commits the strongest of those, until the bundle is full or nothing
qualifies. Strict outbidding avoids livelock on equal bids; ties between
equally good tasks go to the lowest task id for determinism.
"""

from __future__ import annotations

import numpy as np

from .domain import AgentState
from .scoring import ScoreParams, insertion_gains


def build_bundle(agent: AgentState, task_xy: np.ndarray, rewards: np.ndarray,
                 params: ScoreParams, capacity: int) -> AgentState:
    """Greedily fill ``agent``'s bundle in place; returns the same state.

    Never removes tasks. After each insertion y[j] holds the gain at the
    moment of commitment and z[j] the agent itself.
    """
    n = len(task_xy)
    while len(agent.bundle) < capacity and n:
        gains, positions = insertion_gains(agent.position, agent.path,
                                           task_xy, rewards, params)
        if agent.bundle:
            gains[agent.bundle] = -np.inf
        qualifying = gains > agent.y
        if not qualifying.any():
            break
        candidates = np.flatnonzero(qualifying)
        # argmax returns the first maximum, which is the lowest task id
        j = int(candidates[np.argmax(gains[candidates])])
        agent.path.insert(int(positions[j]), j)
        agent.bundle.append(j)
        agent.y[j] = gains[j]
        agent.z[j] = agent.id
    return agent
