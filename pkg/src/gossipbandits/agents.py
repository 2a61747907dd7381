"""Per-agent state machines for the decentralized bandit algorithms.

Agents advance under a two-phase round contract driven by the simulator:
absorb fully mixed information, select, observe, requeue, then gossip. State
is never shared across realizations.
"""

from __future__ import annotations

import numpy as np

from .bandit import OrthoStats, SufficientStats, project_components
from .consensus import ConsensusQueue

ALGORITHMS = ("dlucb", "rc_dlucb", "safe_dlucb", "dlts", "no_comm", "centralized")
GOSSIP_ALGORITHMS = ("dlucb", "dlts", "safe_dlucb")


class DlucbAgent:
    """State of one agent running the gossiped UCB (or TS) protocol.

    During warmup (t <= S) the statistics hold only the agent's own
    observations; at the first main round they are reset to the ridge prior
    unless ``keep_warmup_data`` is set, after which only fully mixed network
    information is absorbed.
    """

    def __init__(self, index, n_agents, d, lam, s_rounds, *, safety=False,
                 keep_warmup_data=False):
        self.index = index
        self.n = n_agents
        self.d = d
        self.s_rounds = s_rounds
        self.keep_warmup_data = keep_warmup_data
        self.stats = SufficientStats.initial(d, lam)
        self.queue = ConsensusQueue(n_agents, d, s_rounds, safety=safety)

    def phase(self, t):
        return "warmup" if t <= self.s_rounds else "main"

    def begin_round(self, t):
        """Absorb the fully mixed front slot before selecting (main phase only)."""
        if t == self.s_rounds + 1 and not self.keep_warmup_data:
            self.stats.reset()
        if t > self.s_rounds:
            actions, rewards, safety = self.queue.dequeue_mixed()
            self.stats.absorb_mixed(actions, rewards, self.n)
            return actions, rewards, safety
        return None

    def finish_round(self, t, action, reward, safety=None):
        """Record the played action: warmup keeps it locally, and a fresh slot
        enters the queue either way."""
        if t <= self.s_rounds:
            self.stats.add_observation(action, reward)
        self.queue.enqueue_round(action, reward, safety, self.index)


class SafeDlucbAgent(DlucbAgent):
    """Gossiped UCB agent that additionally learns the constraint direction.

    Maintains complement-restricted statistics from projected actions and
    shifted safety feedback; every emitted action passed the safe filter at
    selection time (or is the known safe action).
    """

    def __init__(self, index, n_agents, d, lam, s_rounds, geo, *,
                 keep_warmup_data=False):
        super().__init__(index, n_agents, d, lam, s_rounds, safety=True,
                         keep_warmup_data=keep_warmup_data)
        self.geo = geo
        self.ortho = OrthoStats.initial(geo, d, lam)

    def begin_round(self, t):
        if t == self.s_rounds + 1 and not self.keep_warmup_data:
            self.ortho.reset()
        slot = super().begin_round(t)
        if slot is not None:
            actions, _, safety = slot
            if self.geo.is_zero:
                perp = actions
            else:
                coefs = actions @ self.geo.x0_unit
                perp = actions - np.outer(coefs, self.geo.x0_unit)
            self.ortho.absorb_mixed(perp, safety, self.n)
        return slot

    def shifted_feedback(self, action, z):
        """Remove the known component of the safety measurement along x0."""
        if self.geo.is_zero:
            return z
        coef = float(action @ self.geo.x0_unit)
        return z - (coef / self.geo.norm_x0) * self.geo.c0

    def finish_round(self, t, action, reward, safety=None):
        z_perp = self.shifted_feedback(action, safety)
        if t <= self.s_rounds:
            _, x_perp = project_components(action, self.geo)
            self.ortho.add_observation(x_perp, z_perp)
        super().finish_round(t, action, reward, safety=z_perp)


class RcDlucbAgent:
    """Agent for the rarely-communicating variant.

    Outside communication phases it accumulates unshared data and watches the
    log-determinant growth of its Gram matrix; once any agent's growth exceeds
    the threshold, the network enters an S-round phase in which the unshared
    sums are gossiped while everyone replays their last action.
    """

    def __init__(self, index, d, lam, threshold):
        self.index = index
        self.d = d
        self.lam = lam
        self.threshold = threshold
        self.w_syn = np.zeros((d, d))
        self.w_new = np.zeros((d, d))
        self.v_syn = np.zeros(d)
        self.v_new = np.zeros(d)
        self.epoch_start = 0
        self.logdet_epoch_start = d * np.log(lam)
        self.frozen_action = None

    @property
    def stats(self):
        return SufficientStats(
            gram=self.lam * np.eye(self.d) + self.w_syn + self.w_new,
            moment=self.v_syn + self.v_new,
            lam=self.lam,
        )

    def record_play(self, action, reward):
        self.w_new += np.outer(action, action)
        self.v_new += reward * action
        self.frozen_action = action

    def trigger(self, t):
        """Evaluate the phase trigger after the round-t update."""
        sign, logdet = np.linalg.slogdet(self.stats.gram)
        if sign <= 0:
            raise RuntimeError("Gram matrix lost positive-definiteness")
        return (logdet - self.logdet_epoch_start) * (t - self.epoch_start) > self.threshold

    def phase_payload(self):
        return self.w_new.copy(), self.v_new.copy()

    def absorb_phase(self, mixed_w, mixed_v, n_agents, s_rounds, frozen_reward_sum, t_end):
        """Fold the gossiped sums in and restart the epoch with the frozen plays."""
        self.w_syn += n_agents * mixed_w
        self.v_syn += n_agents * mixed_v
        x = self.frozen_action
        self.w_new = s_rounds * np.outer(x, x)
        self.v_new = frozen_reward_sum * x
        self.epoch_start = t_end
        _, self.logdet_epoch_start = np.linalg.slogdet(self.stats.gram)
