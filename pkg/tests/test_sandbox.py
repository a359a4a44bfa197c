import math

import numpy as np
import pytest

from mfg_sandbox.environment import CongestionGridParams, MfgEnvironment, make_congestion_env, make_fixed_mdp_env
from mfg_sandbox.oracle import make_diagnostics_oracle
from mfg_sandbox.sandbox import (
    NonFiniteError,
    SandboxConfig,
    episode_diagnostics,
    run_sandbox,
    update_mean_field,
    update_policy,
)
from mfg_sandbox.schedules import ScheduleParams, build_epsilon_net, exploration_floor
from mfg_sandbox import snapshots


def small_env(side=2, **kw):
    return make_congestion_env(CongestionGridParams(side=side, **kw))


def small_config(env, **kw):
    defaults = dict(
        env=env,
        schedule=ScheduleParams(),
        num_episodes=4,
        steps_per_episode=100,
        rho=0.7,
        seed=3,
    )
    defaults.update(kw)
    return SandboxConfig(**defaults)


def test_config_validation():
    env = small_env()
    with pytest.raises(ValueError):
        small_config(env, num_episodes=1)
    with pytest.raises(ValueError):
        small_config(env, steps_per_episode=1)
    with pytest.raises(ValueError):
        small_config(env, rho=1.0)
    with pytest.raises(ValueError):
        small_config(env, use_projection=True)  # projection without a net


def test_update_mean_field_examples():
    mu = np.array([0.5, 0.5])
    assert np.allclose(update_mean_field(mu, np.eye(2), 0.7), mu)
    p_hat = np.array([[1.0, 0.0], [1.0, 0.0]])
    out = update_mean_field(mu, p_hat, 0.5)
    assert np.allclose(out, [0.75, 0.25])
    with pytest.raises(ValueError):
        update_mean_field(mu, np.array([[0.9, 0.0], [0.5, 0.5]]), 0.5)
    with pytest.raises(ValueError):
        update_mean_field(mu, np.eye(2), 0.0)


def test_update_mean_field_projection():
    net = build_epsilon_net(2, 1.0)
    out = update_mean_field(np.array([0.95, 0.05]), np.eye(2), 0.5, project=True, net=net)
    assert np.allclose(out, [1.0, 0.0])


def test_update_policy_examples():
    pi = np.full((1, 2), 0.5)
    q = np.array([[1.0, 0.0]])
    out = update_policy(pi, q, 0.5, 0.0, math.log(3))
    assert np.allclose(out, [[0.625, 0.375]])
    # pure-noise degenerate case
    out = update_policy(pi, q, 1.0, 1.0, 2.0)
    assert np.allclose(out, 0.5)
    # zero noise leaves softmax as the whole target
    out = update_policy(pi, q, 1.0, 0.0, math.log(3))
    assert np.allclose(out, [[0.75, 0.25]])


def test_run_single_state_environment():
    env = make_fixed_mdp_env(np.ones((1, 2, 1)), np.array([[0.9, 0.1]]))
    config = SandboxConfig(
        env=env, schedule=ScheduleParams(), num_episodes=3, steps_per_episode=400, rho=0.7, seed=0
    )
    result = run_sandbox(config)
    assert np.allclose(result.mu_first_steps, 1.0)
    assert np.allclose(result.avg_mean_field.probs, [1.0])
    # the policy should have drifted toward the better action's softmax weight
    assert result.avg_policy.table[0, 0] > 0.5


def test_run_is_deterministic():
    env = small_env(side=3)
    config = small_config(env)
    r1 = run_sandbox(config)
    r2 = run_sandbox(config)
    assert np.array_equal(r1.avg_mean_field.probs, r2.avg_mean_field.probs)
    assert np.array_equal(r1.avg_policy.table, r2.avg_policy.table)
    assert np.array_equal(r1.mu_first_steps, r2.mu_first_steps)
    assert r1.min_policy_entry == r2.min_policy_entry
    for a, b in zip(r1.per_episode, r2.per_episode):
        assert a == b


class RecordingEnv(MfgEnvironment):
    """Forces the mu-dependent sampling path and logs every transition query."""

    kernel_depends_on_mu = True

    def __init__(self, inner):
        self.inner = inner
        self.dims = inner.dims
        self.initial_distribution = inner.initial_distribution
        self.calls = []

    def transition_dist(self, s, a, mu):
        self.calls.append((int(s), int(a)))
        return self.inner.transition_dist(s, a, mu)

    def reward(self, s, a, mu):
        return self.inner.reward(s, a, mu)

    def transition_kernel(self, mu=None):
        # diagnostics use this; keep it out of the sampling log
        return self.inner.transition_kernel(mu)


def test_single_sample_path_without_reinitialization():
    env = RecordingEnv(small_env(side=2, jostle_p=0.2))
    K, T = 3, 50
    run_sandbox(small_config(env, num_episodes=K, steps_per_episode=T))
    assert len(env.calls) == K * T  # exactly one transition per step
    kernel = env.inner.transition_kernel()
    for (s, a), (s_next, _) in zip(env.calls, env.calls[1:]):
        # the next query starts where a positive-probability transition
        # could land, including across episode boundaries
        assert kernel[s, a, s_next] > 0.0


def test_averaging_matches_first_step_snapshots():
    env = small_env(side=3)
    K = 5
    result = run_sandbox(small_config(env, num_episodes=K))
    assert np.allclose(result.avg_mean_field.probs, result.mu_first_steps[: K - 1].mean(axis=0))
    assert np.allclose(result.avg_policy.table, result.pi_first_steps[: K - 1].mean(axis=0))
    # every stored snapshot is a valid distribution pair
    assert np.abs(result.mu_first_steps.sum(axis=1) - 1.0).max() < 1e-9
    assert np.abs(result.pi_first_steps.sum(axis=2) - 1.0).max() < 1e-9


def test_every_step_validation_run():
    env = small_env(side=2, jostle_p=0.3)
    run_sandbox(small_config(env, validate_every=1))  # raises on any violation


def test_exploration_floor_holds_on_small_run():
    env = small_env(side=3)
    sched = ScheduleParams()
    K, T = 8, 200
    result = run_sandbox(small_config(env, schedule=sched, num_episodes=K, steps_per_episode=T))
    floor = exploration_floor(sched, env.dims.num_actions, K, T)
    assert result.min_policy_entry >= floor - 1e-12
    for d in result.per_episode:
        assert d.min_policy >= floor - 1e-12


def test_projection_snaps_first_steps_onto_net():
    env = small_env(side=2)
    net = build_epsilon_net(4, 0.5)
    result = run_sandbox(small_config(env, use_projection=True, net=net))
    for mu in result.mu_first_steps:
        gaps = np.abs(net.points - mu).sum(axis=1)
        assert gaps.min() < 1e-12


def test_per_step_residual_trace():
    env = small_env(side=2)
    K, T = 3, 40
    result = run_sandbox(
        small_config(env, num_episodes=K, steps_per_episode=T, per_step_residual=True)
    )
    assert result.per_step_residual.shape == (K * T,)
    assert np.all(result.per_step_residual >= 0.0)


class NanRewardEnv(MfgEnvironment):
    kernel_depends_on_mu = True

    def __init__(self, inner, bad_after):
        self.inner = inner
        self.dims = inner.dims
        self.initial_distribution = inner.initial_distribution
        self.bad_after = bad_after
        self.count = 0

    def transition_dist(self, s, a, mu):
        return self.inner.transition_dist(s, a, mu)

    def reward(self, s, a, mu):
        self.count += 1
        if self.count > self.bad_after:
            return math.nan
        return self.inner.reward(s, a, mu)


def test_non_finite_reward_aborts_with_snapshot():
    env = NanRewardEnv(small_env(side=2), bad_after=130)
    with pytest.raises(NonFiniteError) as err:
        run_sandbox(small_config(env, num_episodes=3, steps_per_episode=100))
    abort = err.value
    assert (abort.episode, abort.step) == (2, 31)
    snap = abort.snapshot
    assert snap["schema_version"] == snapshots.SCHEMA_VERSION
    assert len(snap["mean_field"]) == 4
    assert len(snap["q_values"]) == 4
    # the snapshot round-trips through the JSON codec and restores the rng
    doc = snapshots.dumps(snap)
    import json

    restored = json.loads(doc)
    gen = snapshots.restore_rng(restored["rng_state"])
    assert isinstance(gen.random(), float)


def test_snapshot_file_round_trip(tmp_path):
    doc = snapshots.run_state_snapshot(
        episode=2,
        step=7,
        agent_state=1,
        mean_field=np.array([0.25, 0.75]),
        policy=np.array([[0.5, 0.5], [0.1, 0.9]]),
        q_values=np.zeros((2, 2)),
        pair_counts=np.zeros((2, 2), dtype=np.int64),
        state_counts=np.zeros(2, dtype=np.int64),
        cached_estimate=np.full((2, 2), 0.5),
        rng_state=np.random.default_rng(0).bit_generator.state,
    )
    path = tmp_path / "state.json"
    snapshots.write_json(path, doc)
    assert snapshots.read_json(path) == doc


def test_episode_diagnostics_zero_cases():
    env = small_env(side=2)
    oracle, pair = make_diagnostics_oracle(env, lam=1.0, rho=0.7, tol=1e-9)
    mu_star = pair.mean_field.probs
    pi_star = pair.policy.table
    chain = oracle.kernel(pi_star, mu_star)
    q_star = oracle.q_star_values(mu_star)
    diag = episode_diagnostics(5, mu_star, pi_star, chain, q_star, oracle, min_policy=0.1)
    assert diag.k == 5
    assert diag.e_pi == pytest.approx(0.0, abs=1e-12)
    assert diag.e_mu == pytest.approx(0.0, abs=1e-12)
    assert diag.eps_P == pytest.approx(0.0, abs=1e-12)
    assert diag.eps_Q == pytest.approx(0.0, abs=1e-12)
    assert diag.residual_mu <= 2e-9
    assert 0.0 <= diag.e_pi <= 2.0 and 0.0 <= diag.e_mu <= 2.0


def test_episode_diagnostics_requires_oracle():
    with pytest.raises(ValueError):
        episode_diagnostics(1, np.array([1.0]), np.array([[1.0]]), np.eye(1), np.zeros((1, 1)), None)


def test_diagnostics_during_run_decrease_on_average():
    env = small_env(side=2, jostle_p=0.2)
    oracle, _ = make_diagnostics_oracle(env, lam=1.0, rho=0.7)
    result = run_sandbox(
        small_config(env, num_episodes=12, steps_per_episode=300, diagnostics_oracle=oracle)
    )
    assert len(result.per_episode) == 12
    e_mu = np.array([d.e_mu for d in result.per_episode])
    assert not np.isnan(e_mu).any()
    assert e_mu[-4:].mean() < e_mu[:4].mean()


def test_diagnostics_stride_leaves_gaps():
    env = small_env(side=2)
    oracle, _ = make_diagnostics_oracle(env, lam=1.0, rho=0.7)
    result = run_sandbox(
        small_config(env, num_episodes=5, steps_per_episode=60, diagnostics_oracle=oracle, diagnostics_every=2)
    )
    filled = [not math.isnan(d.e_mu) for d in result.per_episode]
    assert filled == [True, False, True, False, True]
    # residual_mu is computed for every episode regardless
    assert all(not math.isnan(d.residual_mu) for d in result.per_episode)
