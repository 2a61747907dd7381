import numpy as np
import pytest

from gossipbandits.bandit import DecisionSet
from gossipbandits.config import parse_config
from gossipbandits.sim import (
    Environment,
    aggregate,
    feedback,
    optimal_value,
    run_experiment,
    run_realization,
    sample_environment,
)


def cfg(**overrides):
    base = {"topology": "ring", "N": 5, "d": 3, "T": 40, "algorithm": "dlucb",
            "realizations": 1}
    base.update(overrides)
    return parse_config(base)


# ------------------------------------------------------------- environment

def test_theta_star_is_unit_norm():
    rng = np.random.default_rng(0)
    for _ in range(50):
        env = sample_environment(5, False, rng)
        assert abs(np.linalg.norm(env.theta_star) - 1.0) < 1e-12


def test_environment_reproducible():
    a = sample_environment(4, False, np.random.default_rng(3))
    b = sample_environment(4, False, np.random.default_rng(3))
    assert np.array_equal(a.theta_star, b.theta_star)


def test_theta_star_isotropic():
    rng = np.random.default_rng(0)
    draws = np.stack([sample_environment(5, False, rng).theta_star for _ in range(10_000)])
    assert np.linalg.norm(draws.mean(axis=0)) <= 0.02


def test_safe_environment_margin():
    rng = np.random.default_rng(2)
    for _ in range(50):
        env = sample_environment(3, True, rng, c_min=0.3)
        assert abs(np.linalg.norm(env.mu_star) - 1.0) < 1e-12
        assert env.c > 0.0 and env.c >= 0.3


def test_feedback_noiseless_and_deterministic():
    env = Environment(theta_star=np.array([0.6, 0.8]), sigma=0.0)
    env.attach_noise(np.zeros((2, 5)))
    x = np.array([0.5, 0.5])
    y, z = feedback(env, x, 0, 3)
    assert y == 0.7 and z is None


def test_feedback_noise_variance():
    rng = np.random.default_rng(4)
    n_draws = 100_000
    noise = 0.1 * rng.standard_normal((1, n_draws))
    env = Environment(theta_star=np.array([1.0, 0.0]), sigma=0.1)
    env.attach_noise(noise)
    ys = np.array([feedback(env, np.zeros(2), 0, t)[0] for t in range(1, n_draws + 1)])
    assert abs(ys.var() / 0.01 - 1.0) < 0.03


def test_feedback_rejects_oversized_action():
    env = Environment(theta_star=np.array([1.0, 0.0]))
    env.attach_noise(np.zeros((1, 1)))
    with pytest.raises(ValueError, match="norm"):
        feedback(env, np.array([2.0, 0.0]), 0, 1)


def test_optimal_value_box_sign_rule():
    env = Environment(theta_star=np.array([0.6, -0.8]))
    x_star, value = optimal_value(env, DecisionSet.box(2))
    assert np.array_equal(x_star, [1.0, -1.0])
    assert abs(value - 1.4) < 1e-12


def test_optimal_value_finite_matches_enumeration():
    rng = np.random.default_rng(5)
    arms = rng.standard_normal((3, 4))
    arms /= np.linalg.norm(arms, axis=1, keepdims=True)
    env = Environment(theta_star=arms[1])
    _, value = optimal_value(env, DecisionSet.finite(arms))
    assert abs(value - (arms @ arms[1]).max()) < 1e-12


def test_safe_optimum_never_beats_unconstrained():
    rng = np.random.default_rng(6)
    for _ in range(20):
        arms = rng.standard_normal((6, 3))
        arms /= np.linalg.norm(arms, axis=1, keepdims=True)
        arms = np.vstack([arms, np.zeros(3)])
        env = sample_environment(3, True, rng)
        dset = DecisionSet.finite(arms)
        _, free = optimal_value(env, dset)
        _, safe = optimal_value(env, dset, safe=True)
        assert safe <= free + 1e-12


# ------------------------------------------------------------- realizations

def test_zero_horizon_trace_is_empty():
    trace = run_realization(cfg(T=0), master_seed=0)
    assert trace.horizon == 0
    assert trace.final_regret == 0.0
    assert trace.total_comm_scalars == 0


def test_no_comm_never_transmits():
    trace = run_realization(cfg(algorithm="no_comm", T=30), master_seed=0)
    assert np.all(trace.scalars == 0)


def test_cumulative_regret_monotone_and_instantaneous_nonnegative():
    for algo in ("dlucb", "dlts", "rc_dlucb", "no_comm", "centralized"):
        trace = run_realization(cfg(algorithm=algo, T=60), master_seed=1)
        assert np.all(trace.inst_regret >= -1e-12)
        assert np.all(np.diff(trace.cum_regret) >= -1e-12)


def test_safe_regret_nonnegative_when_no_violation():
    config = parse_config({"topology": "path", "N": 3, "d": 2, "T": 80,
                           "algorithm": "safe_dlucb",
                           "decision_set": {"variant": "finite", "num_arms": 6},
                           "safe": {"c_min": 0.3}, "realizations": 1})
    trace = run_realization(config, master_seed=2)
    clean = trace.violations == 0
    assert np.all(trace.inst_regret[clean] >= -1e-12)


def test_gossip_comm_cost_closed_form():
    config = cfg(T=30)
    trace = run_realization(config, master_seed=3)
    s = trace.s_rounds
    directed = 2 * 5  # ring: |E| = N
    width = 5 * (3 + 1)
    for t in range(1, 31):
        expected = directed * min(t, s) * width
        assert trace.scalars[t - 1] == expected


def test_safe_comm_includes_third_channel():
    config = parse_config({"topology": "path", "N": 3, "d": 2, "T": 20,
                           "algorithm": "safe_dlucb",
                           "decision_set": {"variant": "finite", "num_arms": 4},
                           "safe": {"c_min": 0.3}, "realizations": 1})
    trace = run_realization(config, master_seed=3)
    s = trace.s_rounds
    directed = 2 * 2  # path with 3 nodes: 2 edges
    width = 3 * (2 + 2)
    assert trace.scalars[-1] == directed * s * width


def test_rc_comm_cost_bounded_by_phase_budget():
    config = cfg(algorithm="rc_dlucb", T=150)
    trace = run_realization(config, master_seed=4)
    directed = 2 * 5
    budget = trace.phase_count * trace.s_rounds * directed * 3 * (3 + 1)
    assert trace.total_comm_scalars <= budget
    assert np.all(trace.scalars[trace.phase_id == 0] == 0)


def test_centralized_comm_cost():
    trace = run_realization(cfg(algorithm="centralized", T=10), master_seed=5)
    assert np.all(trace.scalars == 5 * 4 * (3 + 1))


def test_aggregate_single_trace_zero_std():
    trace = run_realization(cfg(T=20), master_seed=6)
    curves = aggregate([trace])
    assert np.all(curves["regret_std"] == 0.0)
    assert np.array_equal(curves["regret_mean"], trace.cum_regret)


def test_aggregate_two_point_formula():
    base = run_realization(cfg(T=15), master_seed=7)
    tripled = aggregate([base, _scale_trace(base, 3.0)])
    assert np.allclose(tripled["regret_mean"], 2.0 * base.cum_regret)
    assert np.allclose(tripled["regret_std"], np.sqrt(2.0) * base.cum_regret)


def _scale_trace(trace, factor):
    import dataclasses

    return dataclasses.replace(trace, inst_regret=factor * trace.inst_regret,
                               cum_regret=factor * trace.cum_regret)


def test_aggregate_rejects_length_mismatch():
    a = run_realization(cfg(T=10), master_seed=8)
    b = run_realization(cfg(T=12), master_seed=8)
    with pytest.raises(ValueError, match="mismatch"):
        aggregate([a, b])


def test_worker_count_does_not_change_traces():
    config = parse_config({"topology": {"kind": "erdos_renyi", "p": 0.5}, "N": 6,
                           "d": 3, "T": 40, "algorithm": "dlucb", "realizations": 4})
    serial = run_experiment(config, workers=1)
    pooled = run_experiment(config, workers=4)
    for a, b in zip(serial, pooled):
        assert np.array_equal(a.cum_regret, b.cum_regret)
        assert np.array_equal(a.scalars, b.scalars)
        assert a.s_rounds == b.s_rounds


def test_erdos_renyi_graph_resampling_flag():
    base = {"topology": {"kind": "erdos_renyi", "p": 0.5}, "N": 8, "d": 2, "T": 5,
            "algorithm": "dlucb", "realizations": 1}
    resampled = parse_config(base)
    s_values = {run_realization(resampled, master_seed=0, realization=r).lambda2_abs
                for r in range(6)}
    assert len(s_values) > 1
    fixed = parse_config({**base, "resample_graph": False})
    s_fixed = {run_realization(fixed, master_seed=0, realization=r).lambda2_abs
               for r in range(6)}
    assert len(s_fixed) == 1
