"""Online estimators fed by the single sample path.

TransitionCounter maintains smoothed empirical transition probabilities of
the state chain; QLearner runs asynchronous tabular Q-learning with a
polynomial step size. Both are single-owner mutable objects: one instance
per run, never shared across threads.
"""

from __future__ import annotations

import numpy as np

from .core import QTable


class TransitionCounter:
    """Smoothed transition-probability estimator.

    Entry (i, j) of the estimate is (N(i, j) + 1/S) / (N(i) + 1), so every
    row sums to 1 identically, including never-visited rows (uniform 1/S).
    Counts cover the current episode only; reset() caches the final estimate
    so the next episode's first mean-field update can reuse it before any
    new observations arrive.
    """

    def __init__(self, num_states: int):
        if num_states < 1:
            raise ValueError("num_states must be >= 1")
        self.num_states = num_states
        self.pair_counts = np.zeros((num_states, num_states), dtype=np.int64)
        self.state_counts = np.zeros(num_states, dtype=np.int64)
        self._estimate = np.full((num_states, num_states), 1.0 / num_states)
        self.cached_estimate = self._estimate.copy()

    def record(self, i: int, j: int) -> None:
        """Count one observed transition i -> j and refresh row i."""
        n = self.num_states
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"transition ({i}, {j}) out of range for {n} states")
        self.pair_counts[i, j] += 1
        self.state_counts[i] += 1
        self._estimate[i] = (self.pair_counts[i] + 1.0 / n) / (self.state_counts[i] + 1.0)

    def estimate(self) -> np.ndarray:
        """Current smoothed row-stochastic estimate.

        Returns the live internal buffer for speed; copy before mutating.
        """
        return self._estimate

    def reset(self) -> None:
        """Cache the current estimate, zero the counts, return to uniform."""
        self.cached_estimate = self._estimate.copy()
        self.pair_counts[:] = 0
        self.state_counts[:] = 0
        self._estimate[:] = 1.0 / self.num_states


class QLearner:
    """Asynchronous tabular Q-learner.

    The step size at internal clock t is min(1, c_beta / (t + 1)**nu) with
    0.5 < nu <= 1; the clamp keeps early updates valid convex combinations
    when c_beta > 1. The clock starts at 0 and reset_clock() restarts it at
    episode boundaries while the table itself carries over.
    """

    def __init__(self, num_states, num_actions, rho, c_beta, nu, initial=None):
        if not 0.0 < rho < 1.0:
            raise ValueError("discount rho must lie in (0, 1)")
        if c_beta <= 0.0:
            raise ValueError("c_beta must be > 0")
        if not 0.5 < nu <= 1.0:
            raise ValueError("nu must lie in (0.5, 1]")
        self.rho = float(rho)
        self.c_beta = float(c_beta)
        self.nu = float(nu)
        self.t = 0
        if initial is None:
            self.q = np.zeros((num_states, num_actions))
        else:
            self.q = np.array(initial, dtype=np.float64)
            if self.q.shape != (num_states, num_actions):
                raise ValueError("initial Q-table has the wrong shape")
            bound = 1.0 / (1.0 - self.rho)
            if self.q.min() < 0.0 or self.q.max() > bound:
                raise ValueError(f"initial Q-table entries must lie in [0, {bound!r}]")

    def step_size(self) -> float:
        return min(1.0, self.c_beta / (self.t + 1.0) ** self.nu)

    def update(self, s: int, a: int, r: float, s_next: int) -> None:
        """One-entry Bellman update from a sampled transition; advances the clock."""
        q = self.q
        if not (0 <= s < q.shape[0] and 0 <= s_next < q.shape[0]):
            raise IndexError("state index out of range")
        if not 0 <= a < q.shape[1]:
            raise IndexError("action index out of range")
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reward {r} outside [0, 1]")
        beta = self.step_size()
        q[s, a] = (1.0 - beta) * q[s, a] + beta * (r + self.rho * q[s_next].max())
        self.t += 1

    def reset_clock(self) -> None:
        self.t = 0

    def q_table(self) -> QTable:
        return QTable(self.q.copy(), self.rho)
