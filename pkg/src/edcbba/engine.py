"""Synchronous iterate-until-convergence engine for CBBA and ED-CBBA.

Each iteration runs the auction phase for every agent, evaluates the
broadcast event gate, exchanges messages between neighbors, resolves
conflicts, and checks for agreement.

Variant semantics
-----------------
Information always flows to every neighbor each iteration, exactly as in
baseline CBBA; the variants differ in which transmissions are *counted*:
under ``cbba`` every agent transmits every iteration, under ``ed-cbba``
only agents whose event gate fired. An agent whose lists did not change
already announced the identical content the last time they changed, so a
neighbor re-reading its cached copy receives nothing new. Counting gated
broadcasts over shared dynamics is what keeps the two variants' final
allocations and iteration counts exactly equal.

``gated_delivery=True`` switches the event-driven run to literal
silence, where unchanged agents transmit nothing at all and neighbors
learn nothing from them. With discrete synchronized rounds this strict
protocol can deadlock: a retracted claim may survive in a pocket of the
network whose freshness timestamps tie, with every agent silent, so the
run hits the iteration cap without agreement. See the gated-delivery
demo for a concrete frozen instance. The mode exists for studying that
behavior and is not used by the benchmark harness.

Termination
-----------
Agreement is detected with an omniscient check (identical winner lists,
bundles consistent, n_min tasks assigned) the moment it holds, at
iteration T0. The run then keeps iterating through a settling window of
``diameter - 1`` further iterations and reports
``iterations = T0 + max(0, diameter - 1)``: a deployed network needs
that long before distributed termination detection can conclude that no
change is still propagating, and the communication spent during the
window is part of the protocol's cost. Agreement itself always satisfies
``T0 <= n_min * diameter``; runs that fail to agree within the hard cap
``n_min * diameter + diameter`` are reported with ``converged=False``,
never raised, because a silent failure would mask a broken bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .auction import build_bundle
from .consensus import (apply_message, event_check, make_message,
                        release_bundle, take_snapshot)
from .domain import (NO_AGENT, AgentState, Assignment, Instance,
                     global_score, validate_agent_state)
from .scoring import _leg_lengths
from .topology import Topology

VARIANTS = ("cbba", "ed-cbba")


@dataclass
class RunResult:
    """Everything measured in one run of one variant."""

    variant: str
    iterations: int
    broadcasts_per_iteration: list[int]
    total_broadcasts: int
    final_assignment: Assignment | None
    total_distance: float
    per_agent_distance: list[float]
    global_score: float
    converged: bool
    diameter: int
    n_min: int
    agreement_iteration: int | None = None
    final_states: list[AgentState] = field(default=None, repr=False)


def check_convergence(states: list[AgentState], instance: Instance) -> bool:
    """Omniscient agreement test over post-consensus states.

    True iff all winner lists are identical, every bundle holds exactly
    the tasks its agent wins, and n_min tasks are assigned.
    """
    z0 = states[0].z
    for state in states[1:]:
        if not np.array_equal(state.z, z0):
            return False
    for state in states:
        if set(state.bundle) != set(int(j) for j in np.flatnonzero(state.z == state.id)):
            return False
    return int(np.count_nonzero(z0 != NO_AGENT)) == instance.n_min


def extract_assignment(states: list[AgentState]) -> Assignment:
    """Build the agreed assignment from converged states.

    Raises ValueError when called on states that do not agree.
    """
    z0 = states[0].z
    for state in states[1:]:
        if not np.array_equal(state.z, z0):
            raise ValueError("extract_assignment requires converged states")
    x: dict[int, int | None] = {}
    for j, winner in enumerate(z0):
        x[j] = int(winner) if winner != NO_AGENT else None
    per_agent_paths = {state.id: list(state.path) for state in states}
    return Assignment(x=x, per_agent_paths=per_agent_paths)


def path_length(start: np.ndarray, path: list[int], task_xy: np.ndarray) -> float:
    if not path:
        return 0.0
    return float(np.sum(_leg_lengths(np.asarray(start, dtype=np.float64), task_xy[path])))


def per_agent_distances(assignment: Assignment, instance: Instance) -> list[float]:
    return [path_length(instance.agents[i].position,
                        assignment.per_agent_paths.get(i, []),
                        instance.task_xy)
            for i in range(instance.n_agents)]


def total_distance(assignment: Assignment, instance: Instance) -> float:
    """Summed Euclidean path length of all agents (start through last task)."""
    return float(sum(per_agent_distances(assignment, instance)))


@dataclass
class _Trajectory:
    converged: bool
    iterations: int
    agreement_iteration: int | None
    event_broadcasts: list[int]
    states: list[AgentState]


def _simulate(instance: Instance, topology: Topology, *,
              gated: bool = False, validate: bool = False) -> _Trajectory:
    """Run the shared dynamics once, tracking event-gated broadcast counts."""
    n_agents = instance.n_agents
    if topology.n_agents != n_agents:
        raise ValueError("topology size does not match instance")
    diam = topology.diameter
    cap = instance.n_min * diam + diam
    params = instance.score_params
    task_xy = instance.task_xy
    rewards = instance.rewards
    states = [instance.agents[i].copy() for i in range(n_agents)]
    neighbor_ids = [np.flatnonzero(topology.adjacency[i]) for i in range(n_agents)]
    snapshots = [None] * n_agents
    event_counts: list[int] = []
    agreed_at: int | None = None
    t = 0
    while True:
        t += 1
        for state in states:
            state.s[state.id] = t
            build_bundle(state, task_xy, rewards, params, instance.capacity)
        flags = [event_check(states[i], snapshots[i]) for i in range(n_agents)]
        for i in range(n_agents):
            snapshots[i] = take_snapshot(states[i])
        if validate:
            for state in states:
                validate_agent_state(state, instance, now=t)
        if gated:
            messages = {i: make_message(states[i]) for i in range(n_agents) if flags[i]}
        else:
            messages = {i: make_message(states[i]) for i in range(n_agents)}
        for state in states:
            for k in neighbor_ids[state.id]:
                msg = messages.get(int(k))
                if msg is not None:
                    apply_message(state, msg, t)
            release_bundle(state)
        if validate:
            for state in states:
                validate_agent_state(state, instance, now=t)
        event_counts.append(sum(flags))
        if agreed_at is None:
            if check_convergence(states, instance):
                agreed_at = t
            elif t >= cap:
                return _Trajectory(False, t, None, event_counts, states)
        if agreed_at is not None and t >= agreed_at + max(0, diam - 1):
            return _Trajectory(True, t, agreed_at, event_counts, states)


def _result_from_trajectory(traj: _Trajectory, instance: Instance,
                            topology: Topology, variant: str) -> RunResult:
    n_agents = instance.n_agents
    if variant == "cbba":
        bpi = [n_agents] * traj.iterations
    else:
        bpi = list(traj.event_broadcasts)
    if traj.converged:
        assignment = extract_assignment(traj.states)
        dists = per_agent_distances(assignment, instance)
        score = global_score(assignment, instance)
    else:
        assignment = None
        dists = [float("nan")] * n_agents
        score = float("nan")
    return RunResult(
        variant=variant,
        iterations=traj.iterations,
        broadcasts_per_iteration=bpi,
        total_broadcasts=sum(bpi),
        final_assignment=assignment,
        total_distance=float(sum(dists)) if traj.converged else float("nan"),
        per_agent_distance=dists,
        global_score=score,
        converged=traj.converged,
        diameter=topology.diameter,
        n_min=instance.n_min,
        agreement_iteration=traj.agreement_iteration,
        final_states=traj.states,
    )


def run_instance(instance: Instance, topology: Topology, variant: str, *,
                 gated_delivery: bool = False, validate: bool = False) -> RunResult:
    """Run one variant to convergence (or the iteration cap).

    ``gated_delivery`` only affects the event-driven variant and enables
    the strict-silence protocol described in the module docstring.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    gated = gated_delivery and variant == "ed-cbba"
    traj = _simulate(instance, topology, gated=gated, validate=validate)
    return _result_from_trajectory(traj, instance, topology, variant)


def run_pair(instance: Instance, topology: Topology, *,
             validate: bool = False) -> tuple[RunResult, RunResult]:
    """Both variants on identical inputs, sharing one dynamics pass."""
    traj = _simulate(instance, topology, validate=validate)
    return (_result_from_trajectory(traj, instance, topology, "cbba"),
            _result_from_trajectory(traj, instance, topology, "ed-cbba"))
