"""Problem-instance and agent-state types shared across the simulator.

Conventions used throughout the package:

* task ids and agent ids are dense integers starting at 0,
* an unassigned winner slot is the sentinel ``NO_AGENT`` (-1) in the int
  arrays and ``None`` in the dict-based :class:`Assignment`,
* bids are plain float64 values compared exactly (no epsilon) so that
  runs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .scoring import ScoreParams, path_score

NO_AGENT = -1

DEFAULT_REWARD = 100.0


class StructuralError(ValueError):
    """An id or vector shape does not match the problem instance."""


class InfeasibleAssignmentError(ValueError):
    """An operation requiring a feasible assignment received an infeasible one."""


@dataclass
class TaskSpec:
    """A single task: a point target with a static base reward."""

    id: int
    position: np.ndarray  # (2,) float64, meters
    reward: float = DEFAULT_REWARD

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if self.position.shape != (2,):
            raise StructuralError(f"task {self.id}: position must be 2-D")
        if not self.reward > 0:
            raise StructuralError(f"task {self.id}: reward must be positive")


@dataclass
class AgentState:
    """One agent's local view: bundle, path, bid/winner/timestamp lists.

    ``bundle`` keeps insertion order (needed by the release cascade),
    ``path`` keeps visit order and is always a permutation of ``bundle``.
    ``y[j]`` is the best bid the agent knows for task j, ``z[j]`` the
    believed winner (NO_AGENT if unassigned), and ``s[m]`` the iteration
    at which it last got fresh information about agent m.
    """

    id: int
    position: np.ndarray            # (2,) float64, meters
    bundle: list[int] = field(default_factory=list)
    path: list[int] = field(default_factory=list)
    y: np.ndarray = field(default=None)  # (n_tasks,) float64
    z: np.ndarray = field(default=None)  # (n_tasks,) int64
    s: np.ndarray = field(default=None)  # (n_agents,) int64

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)

    @classmethod
    def initial(cls, agent_id: int, position, n_tasks: int, n_agents: int) -> "AgentState":
        return cls(
            id=agent_id,
            position=np.asarray(position, dtype=np.float64),
            bundle=[],
            path=[],
            y=np.zeros(n_tasks, dtype=np.float64),
            z=np.full(n_tasks, NO_AGENT, dtype=np.int64),
            s=np.zeros(n_agents, dtype=np.int64),
        )

    def copy(self) -> "AgentState":
        return AgentState(
            id=self.id,
            position=self.position.copy(),
            bundle=list(self.bundle),
            path=list(self.path),
            y=self.y.copy(),
            z=self.z.copy(),
            s=self.s.copy(),
        )


@dataclass
class Instance:
    """A full allocation problem: tasks, initial agents, and parameters."""

    tasks: list[TaskSpec]
    agents: list[AgentState]
    capacity: int                  # bundle capacity per agent
    arena_side: float = 100.0
    comm_radius: float = 10.0
    speed: float = 1.0             # meters per iteration-time unit
    discount: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if len(self.agents) < 1 or len(self.tasks) < 1 or self.capacity < 1:
            raise StructuralError("need at least one agent, one task, capacity >= 1")
        if not 0 < self.discount < 1:
            raise StructuralError("discount must lie in (0, 1)")
        if self.speed <= 0:
            raise StructuralError("speed must be positive")
        for idx, task in enumerate(self.tasks):
            if task.id != idx:
                raise StructuralError("task ids must be dense and sorted")
            if np.any(task.position < 0) or np.any(task.position > self.arena_side):
                raise StructuralError(f"task {idx} lies outside the arena")
        for idx, agent in enumerate(self.agents):
            if agent.id != idx:
                raise StructuralError("agent ids must be dense and sorted")

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_min(self) -> int:
        """Number of tasks assigned at convergence: min(N_t, K * N_a)."""
        return min(self.n_tasks, self.capacity * self.n_agents)

    @cached_property
    def task_xy(self) -> np.ndarray:
        return np.array([t.position for t in self.tasks], dtype=np.float64)

    @cached_property
    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.tasks], dtype=np.float64)

    @property
    def score_params(self) -> ScoreParams:
        return ScoreParams(discount=self.discount, speed=self.speed)


@dataclass
class Assignment:
    """A (possibly partial) task allocation with per-agent visit orders."""

    x: dict[int, int | None]               # task id -> agent id or None
    per_agent_paths: dict[int, list[int]]  # agent id -> ordered task ids

    @property
    def assigned_count(self) -> int:
        return sum(1 for a in self.x.values() if a is not None)


def feasible(assignment: Assignment, instance: Instance, converged: bool = False) -> bool:
    """Check the assignment constraints.

    Verifies: every task held by at most one agent, paths consistent with
    the task->agent map, no agent over capacity, and (only when the caller
    flags the run as converged) that exactly n_min tasks are assigned.
    Raises :class:`StructuralError` for ids outside the instance.
    """
    n_t, n_a = instance.n_tasks, instance.n_agents
    for j, a in assignment.x.items():
        if not 0 <= j < n_t:
            raise StructuralError(f"unknown task id {j}")
        if a is not None and not 0 <= a < n_a:
            raise StructuralError(f"unknown agent id {a}")
    seen: set[int] = set()
    for i, path in assignment.per_agent_paths.items():
        if not 0 <= i < n_a:
            raise StructuralError(f"unknown agent id {i}")
        if len(path) > instance.capacity:
            return False
        for j in path:
            if not 0 <= j < n_t:
                raise StructuralError(f"unknown task id {j}")
            if j in seen:           # task held by two agents (or twice)
                return False
            seen.add(j)
            if assignment.x.get(j) != i:
                return False
    for j, a in assignment.x.items():
        if a is not None and j not in seen:
            return False
    if converged and assignment.assigned_count != instance.n_min:
        return False
    return True


def global_score(assignment: Assignment, instance: Instance) -> float:
    """Total discounted reward over all agents' paths (the objective)."""
    if not feasible(assignment, instance, converged=False):
        raise InfeasibleAssignmentError("global_score requires a feasible assignment")
    params = instance.score_params
    total = 0.0
    for i in range(instance.n_agents):
        path = assignment.per_agent_paths.get(i, [])
        if path:
            total += path_score(instance.agents[i], path, instance.tasks, params)
    return total


def validate_agent_state(state: AgentState, instance: Instance, now: int | None = None) -> None:
    """Assert the agent-state invariants; used by the engine in test builds.

    Raises AssertionError with a description on the first violation.
    """
    assert len(state.bundle) <= instance.capacity, "bundle over capacity"
    assert sorted(state.path) == sorted(state.bundle), "path is not a permutation of bundle"
    assert len(set(state.bundle)) == len(state.bundle), "duplicate task in bundle"
    assert state.y.shape == (instance.n_tasks,)
    assert state.z.shape == (instance.n_tasks,)
    assert state.s.shape == (instance.n_agents,)
    for j in state.bundle:
        assert state.z[j] == state.id, f"bundle task {j} not self-won"
    unassigned = state.z == NO_AGENT
    assert np.all(state.y[unassigned] == 0.0), "nonzero bid on unassigned task"
    assert np.all(state.y[~unassigned] > 0.0), "zero bid on assigned task"
    if now is not None:
        assert state.s[state.id] == now, "own timestamp not current"
