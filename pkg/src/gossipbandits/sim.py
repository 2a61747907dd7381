"""Environment sampling, synchronous round scheduling, and regret accounting.

One master seed spawns independent substreams keyed by (realization, role,
agent), so traces are bit-identical no matter how realizations are distributed
across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .agents import DlucbAgent, RcDlucbAgent, SafeDlucbAgent
from .bandit import (
    ConfidenceSet,
    DecisionSet,
    SafeGeometry,
    SufficientStats,
    beta_radius,
    greedy_box,
    rc_comm_threshold,
    safe_filter,
    ts_perturb,
    ucb_select_box,
    ucb_select_finite,
)
from .consensus import MixingPlan, advance_queues, comm_step
from .graph import GraphTopology, build_comm_matrix, build_topology, load_edge_list

# substream roles under the master seed
_ENV, _GRAPH, _NOISE, _ALGO = 0, 1, 2, 3

VIOLATION_TOL = 1e-12


def _stream(master_seed, realization, role, agent=0):
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(realization, role, agent))
    return np.random.default_rng(seq)


@dataclass
class Environment:
    """Hidden parameters plus pre-drawn per-(agent, round) noise.

    ``action_norm_bound`` is 1 for normalized decision sets; box decision sets
    raise it to sqrt(d) since their corners are played unscaled.
    """

    theta_star: np.ndarray
    mu_star: np.ndarray | None = None
    c: float | None = None
    sigma: float = 0.0
    action_norm_bound: float = 1.0
    noise_y: np.ndarray | None = field(default=None, repr=False)
    noise_z: np.ndarray | None = field(default=None, repr=False)

    def attach_noise(self, noise_y, noise_z=None):
        self.noise_y = noise_y
        self.noise_z = noise_z


def sample_environment(d, safe, rng, c_min=0.0, x0=None, sigma=0.0, max_tries=1000):
    """Draw the hidden reward (and constraint) directions, unit-normalized.

    In safe mode the constraint level is uniform on [c_min, 1], redrawn until
    it clears the known safe action's constraint value and the safe action has
    non-negative reward.
    """
    if d < 1:
        raise ValueError("need d >= 1")
    if safe:
        x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
        for _ in range(max_tries):
            theta = rng.standard_normal(d)
            theta /= np.linalg.norm(theta)
            mu = rng.standard_normal(d)
            mu /= np.linalg.norm(mu)
            c0 = float(mu @ x0)
            c = float(rng.uniform(c_min, 1.0))
            if c > c0 and float(theta @ x0) >= 0.0:
                return Environment(theta_star=theta, mu_star=mu, c=c, sigma=sigma)
        raise RuntimeError("could not sample a consistent safe environment")
    theta = rng.standard_normal(d)
    theta /= np.linalg.norm(theta)
    return Environment(theta_star=theta, sigma=sigma)


def feedback(env, x, agent, t):
    """Reward (and safety measurement) for playing x at round t."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) > env.action_norm_bound + 1e-9:
        raise ValueError("action norm exceeds the decision-set bound")
    y = float(env.theta_star @ x) + float(env.noise_y[agent, t - 1])
    if env.mu_star is None:
        return y, None
    z = float(env.mu_star @ x) + float(env.noise_z[agent, t - 1])
    return y, z


def optimal_value(env, decision_set, safe=False):
    """Best achievable expected reward (over the safe subset when requested)."""
    theta = env.theta_star
    if decision_set.variant == "box":
        if safe:
            raise ValueError("safe optimum needs a finite decision set")
        x_star = greedy_box(theta)
        return x_star, float(np.abs(theta).sum())
    arms = decision_set.arms
    if safe:
        mask = arms @ env.mu_star <= env.c
        if not mask.any():
            raise ValueError("true safe set is empty")
        arms = arms[mask]
    values = arms @ theta
    best = int(np.argmax(values))
    return arms[best].copy(), float(values[best])


@dataclass
class Trace:
    """Per-round accounting of one realization."""

    inst_regret: np.ndarray
    cum_regret: np.ndarray
    scalars: np.ndarray
    phase_id: np.ndarray
    phases_started: np.ndarray
    violations: np.ndarray
    violation_excess: np.ndarray
    s_rounds: int
    lambda2_abs: float
    n_agents: int
    actions: np.ndarray | None = None

    @property
    def horizon(self):
        return len(self.cum_regret)

    @property
    def final_regret(self):
        return float(self.cum_regret[-1]) if self.horizon else 0.0

    @property
    def total_comm_scalars(self):
        return int(self.scalars.sum())

    @property
    def phase_count(self):
        return int(self.phases_started[-1]) if self.horizon else 0


class _Accounting:
    def __init__(self, horizon, n_agents, d, record_actions):
        self.inst = np.zeros(horizon)
        self.scalars = np.zeros(horizon, dtype=np.int64)
        self.phase_id = np.zeros(horizon, dtype=np.int64)
        self.phases = np.zeros(horizon, dtype=np.int64)
        self.violations = np.zeros(horizon, dtype=np.int64)
        self.excess = np.zeros(horizon)
        self.actions = np.zeros((horizon, n_agents, d)) if record_actions else None

    def record(self, t, actions, regrets, env):
        self.inst[t - 1] = regrets.sum()
        if self.actions is not None:
            self.actions[t - 1] = actions
        if env.mu_star is not None:
            slack = actions @ env.mu_star - env.c
            bad = slack > VIOLATION_TOL
            self.violations[t - 1] = int(bad.sum())
            self.excess[t - 1] = float(slack[bad].sum())

    def to_trace(self, s_rounds, lambda2_abs, n_agents):
        return Trace(
            inst_regret=self.inst,
            cum_regret=np.cumsum(self.inst),
            scalars=self.scalars,
            phase_id=self.phase_id,
            phases_started=self.phases,
            violations=self.violations,
            violation_excess=self.excess,
            s_rounds=s_rounds,
            lambda2_abs=lambda2_abs,
            n_agents=n_agents,
            actions=self.actions,
        )


def build_network(config, master_seed, realization):
    """Topology, gossip matrix, and mixing plan for one realization."""
    spec = config.topology
    resample = config.resample_graph
    if resample is None:
        resample = spec.kind == "erdos_renyi"
    if config.n_agents == 1:
        # degenerate single-node network: every kind collapses to it
        topology = GraphTopology(np.zeros((1, 1)), kind=spec.kind)
    elif spec.kind == "explicit":
        topology = load_edge_list(spec.edge_file)
    else:
        rng = _stream(master_seed, realization if resample else 0, _GRAPH)
        topology = build_topology(spec.kind, config.n_agents, p=spec.p, rng=rng)
    comm = build_comm_matrix(topology, config.comm_scheme)
    plan = MixingPlan.for_network(comm, config.epsilon)
    return topology, comm, plan


def build_decision_set(config):
    """Resolve the decision set; finite arms are fixed by their own seed.

    In safe mode the sampled arms carry evenly laddered norms (so that some
    action is certifiable from the ridge prior alone) and the known safe
    action is appended as the final arm.
    """
    spec = config.decision_set
    if spec.variant == "box":
        return DecisionSet.box(config.d)
    rng = np.random.default_rng(spec.arm_seed)
    if config.algorithm == "safe_dlucb":
        x0 = config.safe_x0_vector()
        k = spec.num_arms - 1
        if k < 1:
            raise ValueError("safe mode needs at least one arm besides the safe action")
        dirs = rng.standard_normal((k, config.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = np.arange(1, k + 1) / k
        return DecisionSet.finite(np.vstack([dirs * radii[:, None], x0]))
    arms = rng.standard_normal((spec.num_arms, config.d))
    arms /= np.linalg.norm(arms, axis=1, keepdims=True)
    return DecisionSet.finite(arms)


def _draw_noise(config, master_seed, realization):
    n, horizon = config.n_agents, config.horizon
    noise = np.empty((n, horizon, 2))
    for i in range(n):
        rng = _stream(master_seed, realization, _NOISE, i)
        noise[i] = rng.standard_normal((horizon, 2))
    return config.sigma * noise[:, :, 0], config.sigma * noise[:, :, 1]


def run_realization(config, master_seed=None, realization=0, record_actions=False,
                    probe=None):
    """Execute T synchronous rounds of the configured algorithm, returning a Trace.

    ``probe``, when given, is called as probe(t, info) after each round with
    the played actions and live agent states; it exists for oracle tests and
    must not mutate anything.
    """
    if master_seed is None:
        master_seed = config.master_seed
    topology, comm, plan = build_network(config, master_seed, realization)
    dset = build_decision_set(config)

    safe = config.algorithm == "safe_dlucb"
    env_rng = _stream(master_seed, realization, _ENV)
    x0 = config.safe_x0_vector() if safe else None
    env = sample_environment(
        config.d, safe, env_rng, c_min=config.safe_c_min(), x0=x0, sigma=config.sigma
    )
    if dset.variant == "box":
        env.action_norm_bound = float(np.sqrt(config.d))
    noise_y, noise_z = _draw_noise(config, master_seed, realization)
    env.attach_noise(noise_y, noise_z if safe else None)

    geo = None
    if safe:
        c0 = float(env.mu_star @ x0)
        geo = SafeGeometry(x0=x0, c0=c0, c=env.c)

    acct = _Accounting(config.horizon, config.n_agents, config.d, record_actions)
    if config.algorithm in ("dlucb", "dlts", "safe_dlucb"):
        _run_gossip(config, env, topology, comm, plan, dset, geo, acct,
                    master_seed, realization, probe)
    elif config.algorithm == "rc_dlucb":
        _run_rare_comm(config, env, topology, comm, plan, dset, acct, probe)
    else:
        _run_baseline(config, env, dset, acct, probe)
    return acct.to_trace(plan.s_rounds, comm.lambda2_abs, config.n_agents)


def _select_ucb(stats, beta, dset, scale=1.0):
    if dset.variant == "box":
        cs = ConfidenceSet.from_stats(stats, beta, "ell1_scaled")
        x, _ = ucb_select_box(cs, scale=scale)
        return x
    cs = ConfidenceSet.from_stats(stats, beta, "ell2")
    idx, _ = ucb_select_finite(dset.arms, cs, scale=scale)
    return dset.arms[idx]


def _run_gossip(config, env, topology, comm, plan, dset, geo, acct,
                master_seed, realization, probe):
    n, d = config.n_agents, config.d
    s_rounds = plan.s_rounds
    safe = config.algorithm == "safe_dlucb"
    thompson = config.algorithm == "dlts"
    if safe:
        agents = [
            SafeDlucbAgent(i, n, d, config.lam, s_rounds, geo,
                           keep_warmup_data=config.keep_warmup_data)
            for i in range(n)
        ]
        x0_matches = np.all(np.isclose(dset.arms, geo.x0), axis=1)
        if not x0_matches.any():
            raise ValueError("safe mode requires the safe action to be an arm")
    else:
        agents = [
            DlucbAgent(i, n, d, config.lam, s_rounds,
                       keep_warmup_data=config.keep_warmup_data)
            for i in range(n)
        ]
    algo_rngs = (
        [_stream(master_seed, realization, _ALGO, i) for i in range(n)]
        if thompson else None
    )
    _, v_star = optimal_value(env, dset, safe=safe)
    queues = [agent.queue for agent in agents]
    directed_edges = int(topology.adjacency.sum())
    slot_width = n * (d + 1 + (1 if safe else 0))

    for t in range(1, config.horizon + 1):
        beta = beta_radius(t, d, n, config.lam, config.delta, config.sigma,
                           config.epsilon)
        for agent in agents:
            agent.begin_round(t)
        actions = np.empty((n, d))
        for i, agent in enumerate(agents):
            if safe:
                mu_hat = agent.ortho.mu_hat()
                keep = safe_filter(dset.arms, mu_hat, agent.ortho, beta, geo)
                if len(keep) == 0:
                    actions[i] = geo.x0
                else:
                    cs = ConfidenceSet.from_stats(agent.stats, beta, "ell2")
                    j, _ = ucb_select_finite(dset.arms[keep], cs, scale=geo.kappa_r)
                    actions[i] = dset.arms[keep[j]]
            elif thompson:
                cs = ConfidenceSet.from_stats(agent.stats, beta, "ell2")
                tilde = ts_perturb(cs, algo_rngs[i])
                if dset.variant == "box":
                    actions[i] = greedy_box(tilde)
                else:
                    actions[i] = dset.arms[int(np.argmax(dset.arms @ tilde))]
            else:
                actions[i] = _select_ucb(agent.stats, beta, dset)
        rewards = np.empty(n)
        safety_obs = np.empty(n) if safe else None
        for i in range(n):
            y, z = feedback(env, actions[i], i, t)
            rewards[i] = y
            if safe:
                safety_obs[i] = z
        regrets = v_star - actions @ env.theta_star
        acct.record(t, actions, regrets, env)
        if probe is not None:
            probe(t, {"actions": actions.copy(), "agents": agents})
        for i, agent in enumerate(agents):
            agent.finish_round(t, actions[i], rewards[i],
                               safety_obs[i] if safe else None)
        advance_queues(queues, comm, plan)
        acct.scalars[t - 1] = directed_edges * len(queues[0]) * slot_width


def _run_rare_comm(config, env, topology, comm, plan, dset, acct, probe):
    n, d = config.n_agents, config.d
    s_rounds = plan.s_rounds
    threshold = getattr(config, "rc_threshold_override", None)
    if threshold is None:
        threshold = rc_comm_threshold(config.horizon, n, d, config.lam)
    agents = [RcDlucbAgent(i, d, config.lam, threshold) for i in range(n)]
    _, v_star = optimal_value(env, dset)
    directed_edges = int(topology.adjacency.sum())
    phase_round_scalars = directed_edges * d * (d + 1)

    t, phases = 1, 0
    while t <= config.horizon:
        beta = beta_radius(t, d, n, config.lam, config.delta, config.sigma,
                           config.epsilon)
        actions = np.empty((n, d))
        for i, agent in enumerate(agents):
            actions[i] = _select_ucb(agent.stats, beta, dset)
        rewards = np.empty(n)
        for i in range(n):
            rewards[i], _ = feedback(env, actions[i], i, t)
        regrets = v_star - actions @ env.theta_star
        acct.record(t, actions, regrets, env)
        if probe is not None:
            probe(t, {"actions": actions.copy(), "agents": agents})
        for i, agent in enumerate(agents):
            agent.record_play(actions[i], rewards[i])

        triggered = any(agent.trigger(t) for agent in agents)
        if triggered and t < config.horizon:
            phases += 1
            acct.phases[t - 1] = phases
            payloads = [agent.phase_payload() for agent in agents]
            w_cur = np.stack([p[0] for p in payloads])
            v_cur = np.stack([p[1] for p in payloads])
            w_prev, v_prev = w_cur, v_cur
            y_sums = np.zeros(n)
            executed = 0
            for s in range(1, s_rounds + 1):
                rnd = t + s
                if rnd > config.horizon:
                    break
                executed += 1
                for i in range(n):
                    y, _ = feedback(env, actions[i], i, rnd)
                    y_sums[i] += y
                regrets = v_star - actions @ env.theta_star
                acct.record(rnd, actions, regrets, env)
                acct.phase_id[rnd - 1] = phases
                acct.phases[rnd - 1] = phases
                acct.scalars[rnd - 1] = phase_round_scalars
                w_cur, w_prev = comm_step(w_cur, w_prev, s, comm, plan), w_cur
                v_cur, v_prev = comm_step(v_cur, v_prev, s, comm, plan), v_cur
                if probe is not None:
                    probe(rnd, {"actions": actions.copy(), "agents": agents})
            if executed == s_rounds:
                for i, agent in enumerate(agents):
                    agent.absorb_phase(w_cur[i], v_cur[i], n, s_rounds,
                                       y_sums[i], t_end=t + s_rounds)
            t += executed + 1
        else:
            acct.phases[t - 1] = phases
            t += 1


def _run_baseline(config, env, dset, acct, probe):
    n, d = config.n_agents, config.d
    centralized = config.algorithm == "centralized"
    if centralized:
        shared = SufficientStats.initial(d, config.lam)
        per_round_scalars = n * (n - 1) * (d + 1)
    else:
        stats = [SufficientStats.initial(d, config.lam) for _ in range(n)]
        per_round_scalars = 0
    _, v_star = optimal_value(env, dset)

    for t in range(1, config.horizon + 1):
        beta = beta_radius(t, d, n, config.lam, config.delta, config.sigma,
                           config.epsilon)
        actions = np.empty((n, d))
        if centralized:
            x = _select_ucb(shared, beta, dset)
            actions[:] = x
        else:
            for i in range(n):
                actions[i] = _select_ucb(stats[i], beta, dset)
        rewards = np.empty(n)
        for i in range(n):
            rewards[i], _ = feedback(env, actions[i], i, t)
        regrets = v_star - actions @ env.theta_star
        acct.record(t, actions, regrets, env)
        acct.scalars[t - 1] = per_round_scalars
        if probe is not None:
            target = shared if centralized else stats
            probe(t, {"actions": actions.copy(), "stats": target})
        for i in range(n):
            if centralized:
                shared.add_observation(actions[i], rewards[i])
            else:
                stats[i].add_observation(actions[i], rewards[i])


def _realization_job(args):
    config, master_seed, realization = args
    return run_realization(config, master_seed, realization)


def run_experiment(config, master_seed=None, workers=1):
    """Run all configured realizations, optionally over a worker pool.

    Results are assembled in realization order and each realization's streams
    depend only on (master seed, realization index), so the output is
    bit-identical for any worker count.
    """
    if master_seed is None:
        master_seed = config.master_seed
    jobs = [(config, master_seed, r) for r in range(config.realizations)]
    if workers <= 1 or config.realizations == 1:
        return [_realization_job(job) for job in jobs]
    with Pool(processes=workers) as pool:
        return pool.map(_realization_job, jobs)


def aggregate(traces):
    """Pointwise mean/std curves and summary statistics over equal-length traces."""
    if not traces:
        raise ValueError("no traces to aggregate")
    horizon = traces[0].horizon
    if any(tr.horizon != horizon for tr in traces):
        raise ValueError("trace length mismatch")
    n_agents = traces[0].n_agents
    cum = np.stack([tr.cum_regret for tr in traces])
    mean = cum.mean(axis=0)
    std = cum.std(axis=0, ddof=1) if len(traces) > 1 else np.zeros(horizon)
    comm_cum = np.stack([np.cumsum(tr.scalars) for tr in traces]).mean(axis=0)
    phases_cum = np.stack([tr.phases_started for tr in traces]).mean(axis=0)
    violations_cum = np.stack([np.cumsum(tr.violations) for tr in traces]).mean(axis=0)
    return {
        "regret_mean": mean,
        "regret_std": std,
        "per_agent_regret_mean": mean / n_agents,
        "comm_scalars_cum": comm_cum,
        "phases_cum": phases_cum,
        "violations_cum": violations_cum,
    }


