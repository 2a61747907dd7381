"""Chebyshev-accelerated gossip step and the pipelined FIFO estimate queues.

Every in-flight generation of action/reward estimates is mixed for exactly S
synchronous rounds. The accelerated step realizes a rescaled Chebyshev
polynomial of the gossip matrix, so after S rounds every pairwise gain
a_ij = N * [q_S(P)]_ij lies within epsilon of 1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import compute_mixing_rounds


def chebyshev_weights(s_rounds, lambda2_abs):
    """Weights w_0..w_S of the accelerated recursion: w_l = T_l(1/|lambda2|).

    w_0 = 1 and w_1 = 1/|lambda2|; the two-term recursion
    w_{l+1} = 2 w_l / |lambda2| - w_{l-1} continues the sequence.
    """
    if s_rounds < 1:
        raise ValueError("need at least one mixing round")
    if not 0 < lambda2_abs < 1:
        raise ValueError("|lambda2| must lie in (0, 1) for Chebyshev weights")
    w = np.empty(s_rounds + 1)
    w[0] = 1.0
    w[1] = 1.0 / lambda2_abs
    for ell in range(1, s_rounds):
        w[ell + 1] = 2.0 * w[ell] / lambda2_abs - w[ell - 1]
    return w


@dataclass
class MixingPlan:
    """Mixing horizon S with the acceleration weights for a given tolerance."""

    epsilon: float
    s_rounds: int
    lambda2_abs: float
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.weights is None and self.lambda2_abs > 0:
            self.weights = chebyshev_weights(self.s_rounds, self.lambda2_abs)
        if self.weights is not None:
            diffs = np.diff(self.weights[1:])
            if self.weights[0] != 1.0 or np.any(self.weights < 1.0) or np.any(diffs <= 0):
                raise ValueError("invalid Chebyshev weight sequence")

    @classmethod
    def for_network(cls, comm, epsilon):
        s_rounds = compute_mixing_rounds(comm.n, epsilon, comm.lambda2_abs)
        return cls(epsilon=epsilon, s_rounds=s_rounds, lambda2_abs=comm.lambda2_abs)


def comm_step(now, prev, ell, comm, plan):
    """One synchronous accelerated gossip round over stacked per-agent values.

    ``now[i]`` is agent i's current estimate (any payload shape), ``prev[i]``
    its estimate from the previous round. Agent i only reads its own values and
    the freshly published ``now`` values of its structural neighbors.
    """
    now = np.asarray(now, dtype=float)
    prev = np.asarray(prev, dtype=float)
    if now.shape != prev.shape:
        raise ValueError("now/prev shape mismatch")
    if now.shape[0] != comm.n:
        raise ValueError("leading axis must enumerate the agents")
    if not 1 <= ell <= plan.s_rounds:
        raise ValueError(f"communication round {ell} outside [1, {plan.s_rounds}]")
    mixed = np.empty_like(now)
    entries = comm.entries
    for i in range(comm.n):
        idx = comm.neighborhoods[i]
        mixed[i] = np.tensordot(entries[i, idx], now[idx], axes=(0, 0))
    if ell == 1:
        return mixed
    w = plan.weights
    lam2 = plan.lambda2_abs
    c_now = 2.0 * w[ell - 1] / (lam2 * w[ell])
    c_prev = w[ell - 2] / w[ell]
    return c_now * mixed - c_prev * prev


def mixed_gain(comm, plan):
    """Gain matrix a with a[i, j] = N * [q_S(P)]_ij, built by running the
    accelerated step on basis payloads for the full horizon."""
    cur = np.eye(comm.n)
    prev = cur
    for ell in range(1, plan.s_rounds + 1):
        cur, prev = comm_step(cur, prev, ell, comm, plan), cur
    return comm.n * cur


class ConsensusSlot:
    """One in-flight generation of estimates for a single agent.

    ``payload`` rows enumerate network nodes; columns hold the estimated action
    (d entries), the estimated reward, and optionally the safety measurement.
    ``prev`` keeps the previous round's values for the two-term recursion.
    """

    __slots__ = ("payload", "prev", "rounds_mixed")

    def __init__(self, payload):
        self.payload = payload
        self.prev = payload
        self.rounds_mixed = 0


class ConsensusQueue:
    """Per-agent FIFO of at most S generations being mixed simultaneously."""

    def __init__(self, n_agents, d, s_rounds, safety=False):
        self.n = n_agents
        self.d = d
        self.s_rounds = s_rounds
        self.safety = safety
        self.width = d + 1 + (1 if safety else 0)
        self.slots = deque()

    def __len__(self):
        return len(self.slots)

    def enqueue_round(self, own_action, own_reward, own_safety, agent_index):
        """Append a fresh slot whose only nonzero row is the agent's own data."""
        if len(self.slots) >= self.s_rounds:
            raise RuntimeError("queue overflow: enqueue without a prior dequeue")
        if self.safety and own_safety is None:
            raise ValueError("safety channel active but no measurement supplied")
        payload = np.zeros((self.n, self.width))
        payload[agent_index, : self.d] = own_action
        payload[agent_index, self.d] = own_reward
        if self.safety:
            payload[agent_index, self.d + 1] = own_safety
        self.slots.append(ConsensusSlot(payload))

    def dequeue_mixed(self):
        """Pop the oldest slot; it must have been mixed for the full horizon.

        Returns (action matrix, reward vector, safety vector or None). Row k of
        the action matrix is (a_ik / N) times agent k's action from S rounds ago.
        """
        if not self.slots:
            raise RuntimeError("dequeue from an empty queue")
        front = self.slots[0]
        if front.rounds_mixed != self.s_rounds:
            raise RuntimeError(
                f"dequeue before full mixing ({front.rounds_mixed}/{self.s_rounds} rounds)"
            )
        self.slots.popleft()
        actions = front.payload[:, : self.d]
        rewards = front.payload[:, self.d]
        safety = front.payload[:, self.d + 1] if self.safety else None
        return actions, rewards, safety


def advance_queues(queues, comm, plan):
    """Run one gossip round over every aligned slot of all agents' queues.

    All agents publish first, then every update reads only the frozen published
    set, so the exchange is synchronous and deterministic.
    """
    depth = len(queues[0])
    if any(len(q) != depth for q in queues):
        raise RuntimeError("scheduler ordering violation: queue depths diverged")
    for g in range(depth):
        slots = [q.slots[g] for q in queues]
        ell = slots[0].rounds_mixed + 1
        if any(s.rounds_mixed != ell - 1 for s in slots):
            raise RuntimeError("scheduler ordering violation: slot mixing counts diverged")
        now = np.stack([s.payload for s in slots])
        prev = np.stack([s.prev for s in slots])
        nxt = comm_step(now, prev, ell, comm, plan)
        for i, slot in enumerate(slots):
            slot.prev = now[i]
            slot.payload = nxt[i]
            slot.rounds_mixed = ell
