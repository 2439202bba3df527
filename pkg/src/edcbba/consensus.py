"""Consensus phase: broadcast gating, messages, and conflict resolution.

Every iteration each agent may broadcast its information lists
``(y, z, s)``. Receivers reconcile each task with a winner-takes-all
rule table driven by bid values and per-agent freshness timestamps, then
drop any bundle suffix they no longer win.

The event gate (:func:`event_check`) is what makes the event-driven
variant: an agent transmits only when its bid or winner list changed
since the previous iteration, because an unchanged list was already
announced the last time it changed.
"""

from __future__ import annotations

from dataclasses import dataclass
import struct

import numpy as np

from .domain import NO_AGENT, AgentState, StructuralError

# Binary layout of an encoded message (little endian), in field order:
#   sender: uint32 | n_tasks: uint32 | n_agents: uint32
#   y: float64[n_tasks] | z: int32[n_tasks] | s: int64[n_agents]
_HEADER = struct.Struct("<III")


@dataclass(frozen=True)
class ConsensusMessage:
    """Immutable snapshot of one agent's (y, z, s) lists."""

    sender: int
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray

    def encode(self) -> bytes:
        head = _HEADER.pack(self.sender, len(self.y), len(self.s))
        return (head + self.y.astype("<f8").tobytes()
                + self.z.astype("<i4").tobytes()
                + self.s.astype("<i8").tobytes())

    @classmethod
    def decode(cls, blob: bytes) -> "ConsensusMessage":
        sender, n_tasks, n_agents = _HEADER.unpack_from(blob)
        off = _HEADER.size
        y = np.frombuffer(blob, "<f8", n_tasks, off).astype(np.float64)
        off += 8 * n_tasks
        z = np.frombuffer(blob, "<i4", n_tasks, off).astype(np.int64)
        off += 4 * n_tasks
        s = np.frombuffer(blob, "<i8", n_agents, off).astype(np.int64)
        return cls(sender=sender, y=y, z=z, s=s)

    @property
    def nbytes(self) -> int:
        return _HEADER.size + 8 * len(self.y) + 4 * len(self.z) + 8 * len(self.s)


@dataclass(frozen=True)
class BroadcastSnapshot:
    """Post-auction (y, z) of the previous iteration, for the event gate."""

    y_prev: np.ndarray
    z_prev: np.ndarray


def event_check(agent: AgentState, snapshot: BroadcastSnapshot | None) -> bool:
    """True when the agent has something new to announce.

    At iteration 0 there is no snapshot and the initial bids must
    propagate, so the event always fires.
    """
    if snapshot is None:
        return True
    return not (np.array_equal(agent.y, snapshot.y_prev)
                and np.array_equal(agent.z, snapshot.z_prev))


def take_snapshot(agent: AgentState) -> BroadcastSnapshot:
    return BroadcastSnapshot(y_prev=agent.y.copy(), z_prev=agent.z.copy())


def make_message(agent: AgentState) -> ConsensusMessage:
    """Deep-copied, immutable broadcast of the agent's current lists."""
    return ConsensusMessage(sender=agent.id, y=agent.y.copy(),
                            z=agent.z.copy(), s=agent.s.copy())


def apply_message(receiver: AgentState, msg: ConsensusMessage, now: int) -> None:
    """Run the conflict-resolution table for every task, then merge timestamps.

    Does not touch the bundle; callers run :func:`release_bundle` after
    all of the iteration's inbound messages (deferred release keeps the
    result independent of how messages interleave with releases).

    Table, with i = receiver, k = sender, j = task; "k newer about m"
    means s_k[m] > s_i[m]:

    * k claims j itself:
        - i claims j:            update iff k outbids (ties to lower id)
        - i believes k:          update
        - i believes third m:    update iff k newer about m or k outbids
        - i believes nobody:     update
    * k believes i wins j:
        - i claims j:            leave
        - i believes k:          reset
        - i believes third m:    reset iff k newer about m, else leave
        - i believes nobody:     leave
    * k believes a third agent m wins j:
        - i claims j:            update iff k newer about m and outbids
                                 (ties to lower id)
        - i believes k:          update iff k newer about m, else reset
        - i believes the same m: update iff k newer about m
        - i believes another n:  update iff k newer about both m and n;
                                 else update iff k newer about m and
                                 outbids; else reset iff k newer about n
                                 and not newer about m; else leave
        - i believes nobody:     update iff k newer about m
    * k believes nobody wins j:
        - i claims j:            leave
        - i believes k:          update
        - i believes third m:    update iff k newer about m
        - i believes nobody:     leave

    update copies (y_k[j], z_k[j]); reset clears to (0, nobody).

    With synchronized discrete rounds, timestamps frequently tie; a
    strict-only reset in the "i believes another n" row can then freeze a
    retracted claim forever, so that reset also fires on equal freshness
    about m (it only discards information, never adopts any).
    """
    i = receiver.id
    k = msg.sender
    if k == i:
        raise StructuralError("agent cannot resolve its own message")
    yk, zk, sk = msg.y, msg.z, msg.s
    yi, zi, si = receiver.y, receiver.z, receiver.s
    if yk.shape != yi.shape or zk.shape != zi.shape or sk.shape != si.shape:
        raise StructuralError("message vector lengths do not match receiver")

    if np.array_equal(yk, yi) and np.array_equal(zk, zi):
        # identical content can only produce leaves and no-op updates
        _merge_timestamps(receiver, msg, now)
        return

    def newer_about(winner: np.ndarray) -> np.ndarray:
        # s_k[winner] > s_i[winner], False where winner is NO_AGENT
        safe = np.where(winner >= 0, winner, 0)
        out = sk[safe] > si[safe]
        out &= winner >= 0
        return out

    zk_self = zk == k
    zk_recv = zk == i
    zk_none = zk == NO_AGENT
    zk_third = ~(zk_self | zk_recv | zk_none)
    zi_self = zi == i
    zi_send = zi == k
    zi_none = zi == NO_AGENT
    zi_third = ~(zi_self | zi_send | zi_none)

    k_newer_zk = newer_about(zk)   # about the sender's believed winner
    k_newer_zi = newer_about(zi)   # about the receiver's believed winner
    outbids = yk > yi
    tie_bid = yk == yi

    update = np.zeros(len(yi), dtype=bool)
    reset = np.zeros(len(yi), dtype=bool)

    # sender claims the task itself
    update |= zk_self & zi_self & (outbids | (tie_bid & (k < i)))
    update |= zk_self & zi_send
    update |= zk_self & zi_third & (k_newer_zi | outbids)
    update |= zk_self & zi_none

    # sender believes the receiver wins
    reset |= zk_recv & zi_send
    reset |= zk_recv & zi_third & k_newer_zi

    # sender believes a third agent m wins
    same_third = zk_third & (zi == zk)
    other_third = zk_third & zi_third & (zi != zk)
    update |= zk_third & zi_self & k_newer_zk & (outbids | (tie_bid & (zk < i)))
    update |= zk_third & zi_send & k_newer_zk
    reset |= zk_third & zi_send & ~k_newer_zk
    update |= same_third & k_newer_zk
    both_newer = k_newer_zk & k_newer_zi
    update |= other_third & both_newer
    update |= other_third & k_newer_zk & outbids & ~both_newer
    reset |= other_third & k_newer_zi & ~k_newer_zk
    update |= zk_third & zi_none & k_newer_zk

    # sender believes nobody wins
    update |= zk_none & zi_send
    update |= zk_none & zi_third & k_newer_zi

    yi[update] = yk[update]
    zi[update] = zk[update]
    yi[reset] = 0.0
    zi[reset] = NO_AGENT
    _merge_timestamps(receiver, msg, now)


def _merge_timestamps(receiver: AgentState, msg: ConsensusMessage, now: int) -> None:
    # the sender's entry becomes the receipt time; third parties keep the
    # freshest of both views; the receiver's own entry is never touched
    merged = np.maximum(receiver.s, msg.s)
    merged[receiver.id] = receiver.s[receiver.id]
    merged[msg.sender] = now
    receiver.s[:] = merged


def release_bundle(receiver: AgentState) -> list[int]:
    """Drop the bundle suffix starting at the first task no longer won.

    A removed task's score assumed the path prefix before it, so every
    later bundle entry is invalid and removed too. Later entries the
    agent still believed it won are cleared to (0, nobody); entries
    already overwritten with another agent's claim keep that knowledge.
    Returns the removed task ids (in bundle order).
    """
    cut = None
    for idx, j in enumerate(receiver.bundle):
        if receiver.z[j] != receiver.id:
            cut = idx
            break
    if cut is None:
        return []
    removed = receiver.bundle[cut:]
    for j in removed[1:]:
        if receiver.z[j] == receiver.id:
            receiver.y[j] = 0.0
            receiver.z[j] = NO_AGENT
    kept = set(receiver.bundle[:cut])
    receiver.bundle = receiver.bundle[:cut]
    receiver.path = [j for j in receiver.path if j in kept]
    return removed


def resolve(receiver: AgentState, msg: ConsensusMessage, now: int) -> AgentState:
    """Apply one message and the follow-up bundle release; returns receiver.

    The engine instead applies all of an iteration's messages first and
    releases once (same table, deferred cut); this single-message form is
    the natural unit for direct use and testing.
    """
    apply_message(receiver, msg, now)
    release_bundle(receiver)
    return receiver
