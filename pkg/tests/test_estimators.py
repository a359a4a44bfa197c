import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfg_sandbox.core import frobenius_norm
from mfg_sandbox.estimators import QLearner, TransitionCounter


def test_zero_count_estimate_is_uniform():
    counter = TransitionCounter(4)
    assert np.allclose(counter.estimate(), 0.25)
    assert np.abs(counter.estimate().sum(axis=1) - 1.0).max() < 1e-12


def test_single_observation_estimate():
    counter = TransitionCounter(2)
    counter.record(0, 1)
    # (1 + 1/2) / (1 + 1) and (0 + 1/2) / (1 + 1)
    assert counter.estimate()[0, 1] == pytest.approx(0.75)
    assert counter.estimate()[0, 0] == pytest.approx(0.25)
    assert counter.pair_counts[0, 1] == 1
    assert counter.state_counts[0] == 1


def test_record_out_of_range():
    counter = TransitionCounter(3)
    with pytest.raises(IndexError):
        counter.record(3, 0)
    with pytest.raises(IndexError):
        counter.record(0, -1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), max_size=200))
def test_counts_and_row_sums_invariant(transitions):
    counter = TransitionCounter(5)
    for i, j in transitions:
        counter.record(i, j)
    assert np.array_equal(counter.state_counts, counter.pair_counts.sum(axis=1))
    assert counter.state_counts.sum() == len(transitions)
    assert np.abs(counter.estimate().sum(axis=1) - 1.0).max() < 1e-12


def test_reset_caches_final_estimate():
    counter = TransitionCounter(3)
    for i, j in [(0, 1), (1, 2), (2, 0), (0, 1)]:
        counter.record(i, j)
    before = counter.estimate().copy()
    counter.reset()
    assert np.array_equal(counter.cached_estimate, before)
    assert np.allclose(counter.estimate(), 1 / 3)
    assert counter.state_counts.sum() == 0
    # idempotent: a second reset caches the uniform table and changes nothing else
    counter.reset()
    assert np.allclose(counter.cached_estimate, 1 / 3)
    assert counter.state_counts.sum() == 0


def test_estimate_accuracy_on_fixed_chain():
    rng = np.random.default_rng(5)
    chain = rng.dirichlet(np.ones(5) * 2.0, size=5)
    cdf = np.cumsum(chain, axis=1)
    counter = TransitionCounter(5)
    s = 0
    for u in rng.random(100_000):
        nxt = int(np.searchsorted(cdf[s], u, side="right"))
        nxt = min(nxt, 4)
        counter.record(s, nxt)
        s = nxt
    assert frobenius_norm(counter.estimate() - chain) <= 0.05


def test_qlearner_validation():
    with pytest.raises(ValueError):
        QLearner(2, 2, rho=1.0, c_beta=5.0, nu=0.55)
    with pytest.raises(ValueError):
        QLearner(2, 2, rho=0.7, c_beta=5.0, nu=0.5)
    with pytest.raises(ValueError):
        QLearner(2, 2, rho=0.7, c_beta=5.0, nu=0.55, initial=np.full((2, 2), 99.0))


def test_step_size_clamped_to_one():
    learner = QLearner(1, 1, rho=0.7, c_beta=5.0, nu=0.55)
    assert learner.step_size() == 1.0
    learner.t = 10**6
    assert learner.step_size() == pytest.approx(5.0 / (10**6 + 1) ** 0.55)


def test_first_update_with_clamped_step():
    # beta clamps to 1, so Q becomes r + rho * max Q(s') = 1 + 0.7 * 0
    learner = QLearner(1, 1, rho=0.7, c_beta=5.0, nu=0.55)
    learner.update(0, 0, 1.0, 0)
    assert learner.q[0, 0] == pytest.approx(1.0)
    assert learner.t == 1


def test_update_touches_single_entry():
    learner = QLearner(3, 2, rho=0.7, c_beta=5.0, nu=0.55)
    learner.update(1, 0, 0.5, 2)
    changed = np.nonzero(learner.q)
    assert changed[0].tolist() == [1] and changed[1].tolist() == [0]


def test_update_rejects_bad_inputs():
    learner = QLearner(2, 2, rho=0.7, c_beta=5.0, nu=0.55)
    with pytest.raises(ValueError):
        learner.update(0, 0, 1.5, 1)
    with pytest.raises(IndexError):
        learner.update(2, 0, 0.5, 1)
    with pytest.raises(IndexError):
        learner.update(0, 2, 0.5, 1)


def test_constant_reward_fixed_point():
    # single state, single action, reward 1: Q converges to 1 / (1 - rho)
    learner = QLearner(1, 1, rho=0.7, c_beta=5.0, nu=0.55)
    for _ in range(100_000):
        learner.update(0, 0, 1.0, 0)
    assert abs(learner.q[0, 0] - 10 / 3) < 0.01


def test_q_stays_in_bounds():
    rng = np.random.default_rng(9)
    learner = QLearner(4, 3, rho=0.7, c_beta=5.0, nu=0.55)
    bound = 1 / (1 - 0.7)
    for _ in range(20_000):
        learner.update(
            int(rng.integers(4)), int(rng.integers(3)), float(rng.random()), int(rng.integers(4))
        )
    assert learner.q.min() >= 0.0
    assert learner.q.max() <= bound
    table = learner.q_table()
    assert table.rho == 0.7


def test_reset_clock_restarts_schedule_but_keeps_table():
    learner = QLearner(2, 2, rho=0.7, c_beta=5.0, nu=0.55)
    for _ in range(50):
        learner.update(0, 0, 1.0, 1)
    q_before = learner.q.copy()
    learner.reset_clock()
    assert learner.t == 0
    assert np.array_equal(learner.q, q_before)


def test_estimators_are_deterministic():
    def run():
        rng = np.random.default_rng(123)
        counter = TransitionCounter(4)
        learner = QLearner(4, 2, rho=0.7, c_beta=5.0, nu=0.55)
        for _ in range(2000):
            i, j = int(rng.integers(4)), int(rng.integers(4))
            counter.record(i, j)
            learner.update(i, int(rng.integers(2)), float(rng.random()), j)
        return counter.estimate().copy(), learner.q.copy()

    e1, q1 = run()
    e2, q2 = run()
    assert np.array_equal(e1, e2)
    assert np.array_equal(q1, q2)
