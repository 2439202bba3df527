"""Time-discounted path scores and marginal-gain bids.

A path visits task points at constant speed; each task contributes
``reward * discount ** arrival_time``. The bid an agent places on a task
is the best score improvement over all insertion positions in its
current path (zero if the task is already bundled).

The batched insertion scorer recomputes the full score of every
candidate inserted path, with the exact same elementwise operation
sequence as :func:`path_score`, so a bid computed inside the auction is
bit-identical to an after-the-fact ``marginal_gain`` call. Several
equivalence tests in the suite rely on that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreParams:
    """Discount factor per time unit and travel speed."""

    discount: float = 0.95
    speed: float = 1.0

    def __post_init__(self):
        if not 0 < self.discount < 1:
            raise ValueError("discount must lie in (0, 1)")
        if self.speed <= 0:
            raise ValueError("speed must be positive")


def _leg_lengths(start: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean leg lengths along start -> points[0] -> points[1] -> ..."""
    if len(points) == 0:
        return np.zeros(0)
    prev = np.vstack((start[None, :], points[:-1]))
    d = points - prev
    return np.hypot(d[:, 0], d[:, 1])


def score_of_order(start: np.ndarray, order: list[int], task_xy: np.ndarray,
                   rewards: np.ndarray, params: ScoreParams) -> float:
    """Array-level path score; ``order`` indexes rows of ``task_xy``."""
    if not order:
        return 0.0
    legs = _leg_lengths(start, task_xy[order])
    tau = np.cumsum(legs) / params.speed
    return float(np.sum(rewards[order] * np.power(params.discount, tau)))


def insertion_gains(start: np.ndarray, path: list[int], task_xy: np.ndarray,
                    rewards: np.ndarray, params: ScoreParams) -> tuple[np.ndarray, np.ndarray]:
    """Best insertion gain and argmin position for every task at once.

    For each insertion position the full inserted-path score is rebuilt
    (legs, cumulative times, discounted rewards) for all candidates in
    one batch; entries for tasks already in ``path`` are meaningless to
    callers and masked by them. Ties between positions resolve to the
    smallest index because only strictly better gains replace the best.
    """
    n = len(task_xy)
    m = len(path)
    base = score_of_order(start, path, task_xy, rewards, params)
    legs = _leg_lengths(start, task_xy[path]) if m else np.zeros(0)
    path_rewards = rewards[path] if m else np.zeros(0)
    best_gain = np.full(n, -np.inf)
    best_pos = np.zeros(n, dtype=np.int64)
    for pos in range(m + 1):
        prev_pt = start if pos == 0 else task_xy[path[pos - 1]]
        new_legs = np.empty((n, m + 1))
        new_rewards = np.empty((n, m + 1))
        new_legs[:, :pos] = legs[:pos]
        new_legs[:, pos] = np.hypot(task_xy[:, 0] - prev_pt[0], task_xy[:, 1] - prev_pt[1])
        new_rewards[:, :pos] = path_rewards[:pos]
        new_rewards[:, pos] = rewards
        if pos < m:
            nxt = task_xy[path[pos]]
            new_legs[:, pos + 1] = np.hypot(nxt[0] - task_xy[:, 0], nxt[1] - task_xy[:, 1])
            new_legs[:, pos + 2:] = legs[pos + 1:]
        new_rewards[:, pos + 1:] = path_rewards[pos:]
        tau = np.cumsum(new_legs, axis=1) / params.speed
        scores = np.sum(new_rewards * np.power(params.discount, tau), axis=1)
        gain = scores - base
        better = gain > best_gain
        best_pos[better] = pos
        best_gain[better] = gain[better]
    return best_gain, best_pos


def path_score(agent, path: list[int], tasks, params: ScoreParams) -> float:
    """Discounted reward collected by ``agent`` visiting ``path`` in order.

    Raises ValueError on duplicate or unknown task ids.
    """
    if len(set(path)) != len(path):
        raise ValueError("duplicate task in path")
    n = len(tasks)
    if any(not 0 <= j < n for j in path):
        raise ValueError("unknown task id in path")
    task_xy = np.array([t.position for t in tasks], dtype=np.float64)
    rewards = np.array([t.reward for t in tasks], dtype=np.float64)
    return score_of_order(np.asarray(agent.position, dtype=np.float64),
                          list(path), task_xy, rewards, params)


def marginal_gain(agent, task_id: int, tasks, params: ScoreParams) -> tuple[float, int | None]:
    """Bid of ``agent`` on ``task_id``: (gain, best insertion index).

    Returns (0.0, None) when the task is already in the agent's bundle.
    """
    n = len(tasks)
    if not 0 <= task_id < n:
        raise ValueError(f"unknown task id {task_id}")
    if task_id in agent.bundle:
        return 0.0, None
    task_xy = np.array([t.position for t in tasks], dtype=np.float64)
    rewards = np.array([t.reward for t in tasks], dtype=np.float64)
    gains, positions = insertion_gains(np.asarray(agent.position, dtype=np.float64),
                                       list(agent.path), task_xy, rewards, params)
    return float(gains[task_id]), int(positions[task_id])
