"""Mean-field game environments.

Provides the abstract environment interface (population-dependent kernel and
reward), the congestion grid worlds used in the experiments, and a fixed-MDP
wrapper for estimator unit tests. Grid coordinates are (x, y) with x, y in
1..side; the flat state index is (x - 1) * side + (y - 1) (row major).
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .core import SIMPLEX_ATOL, MeanField, StateActionDims, as_probs

# Diagonal moves; each action shifts both coordinates by +-1 before clamping.
GRID_ACTIONS = ((-1, -1), (-1, 1), (1, -1), (1, 1))

# Non-closed communicating class of the two-class grid variant (side 5 only).
TWO_CLASS_OPEN_STATES = ((4, 5), (5, 4), (5, 5))


class MfgEnvironment(abc.ABC):
    """Environment whose transitions and rewards may depend on the mean-field.

    Instances are immutable after construction; transition_dist and reward
    are pure functions and safe to share across concurrent runs.
    """

    dims: StateActionDims
    initial_distribution: MeanField
    # False when the kernel ignores mu; callers may then cache the kernel.
    kernel_depends_on_mu: bool = True

    @abc.abstractmethod
    def transition_dist(self, s: int, a: int, mu) -> np.ndarray:
        """Distribution of the next state given (s, a) and mean-field mu."""

    @abc.abstractmethod
    def reward(self, s: int, a: int, mu) -> float:
        """Instantaneous reward in [0, 1]."""

    def transition_kernel(self, mu=None) -> np.ndarray:
        """Exact (S, A, S) kernel at mean-field mu."""
        dims = self.dims
        out = np.empty((dims.num_states, dims.num_actions, dims.num_states))
        for s in range(dims.num_states):
            for a in range(dims.num_actions):
                out[s, a] = self.transition_dist(s, a, mu)
        return out

    def reward_table(self, mu) -> np.ndarray:
        """Exact (S, A) reward table at mean-field mu."""
        dims = self.dims
        out = np.empty((dims.num_states, dims.num_actions))
        for s in range(dims.num_states):
            for a in range(dims.num_actions):
                out[s, a] = self.reward(s, a, mu)
        return out


def state_index(x: int, y: int, side: int) -> int:
    return (x - 1) * side + (y - 1)


def state_coords(idx: int, side: int) -> tuple[int, int]:
    return idx // side + 1, idx % side + 1


def _clamp(v: int, side: int) -> int:
    return min(max(v, 1), side)


@dataclass(frozen=True)
class CongestionGridParams:
    """Parameters of the congestion grid world.

    The agent moves diagonally on a side-by-side grid, gets jostled to a
    neighboring cell with probability jostle_p, and earns
    (1 - congestion_c * mu(s)) * R(s) where R(s) is favorable_reward on the
    favorable cells and baseline_reward elsewhere. When favorable_states is
    None, the default is the 2x2 block just past the grid center, e.g.
    {(3,3), (3,4), (4,3), (4,4)} for side 5.
    """

    side: int = 5
    jostle_p: float = 0.1
    congestion_c: float = 0.5
    favorable_reward: float = 1.0
    baseline_reward: float = 0.1
    favorable_states: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("grid side must be >= 1")
        if not 0.0 <= self.jostle_p < 1.0:
            raise ValueError("jostle_p must lie in [0, 1)")
        if self.congestion_c < 0.0:
            raise ValueError("congestion_c must be >= 0")
        if not 0.0 < self.favorable_reward <= 1.0:
            raise ValueError("favorable_reward must lie in (0, 1]")
        if not 0.0 <= self.baseline_reward < self.favorable_reward:
            raise ValueError("baseline_reward must lie in [0, favorable_reward)")
        if self.favorable_states is not None:
            cells = tuple(tuple(int(v) for v in cell) for cell in self.favorable_states)
            for x, y in cells:
                if not (1 <= x <= self.side and 1 <= y <= self.side):
                    raise ValueError(f"favorable state {(x, y)} is outside the grid")
            object.__setattr__(self, "favorable_states", cells)

    def resolved_favorable_states(self) -> tuple[tuple[int, int], ...]:
        if self.favorable_states is not None:
            return self.favorable_states
        lo = (self.side + 1) // 2
        hi = min(lo + 1, self.side)
        return tuple(sorted({(x, y) for x in (lo, hi) for y in (lo, hi)}))


def _grid_kernel(side: int, jostle_p: float) -> np.ndarray:
    """(S, 4, S) kernel of the jostled diagonal-move grid.

    Landing cell is clamp(s + a) with probability 1 - p; with probability p
    the agent lands uniformly on the clamped, deduplicated 4-neighborhood of
    that cell (which can include the cell itself at grid corners).
    """
    num_states = side * side
    kernel = np.zeros((num_states, len(GRID_ACTIONS), num_states))
    for s in range(num_states):
        x, y = state_coords(s, side)
        for ai, (ax, ay) in enumerate(GRID_ACTIONS):
            tx, ty = _clamp(x + ax, side), _clamp(y + ay, side)
            target = state_index(tx, ty, side)
            kernel[s, ai, target] += 1.0 - jostle_p
            if jostle_p > 0.0:
                neighborhood = sorted(
                    {
                        state_index(_clamp(tx + dx, side), _clamp(ty + dy, side), side)
                        for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1))
                    }
                )
                for nb in neighborhood:
                    kernel[s, ai, nb] += jostle_p / len(neighborhood)
    return kernel


class CongestionGridEnv(MfgEnvironment):
    """Congestion-averse grid world with a mean-field-independent kernel."""

    kernel_depends_on_mu = False

    def __init__(self, params: CongestionGridParams, kernel: np.ndarray):
        side = params.side
        self.params = params
        self.dims = StateActionDims(side * side, len(GRID_ACTIONS))
        self.initial_distribution = MeanField.uniform(self.dims.num_states)
        kernel = np.ascontiguousarray(kernel)
        kernel.flags.writeable = False
        self._kernel = kernel
        state_reward = np.full(self.dims.num_states, params.baseline_reward)
        for x, y in params.resolved_favorable_states():
            state_reward[state_index(x, y, side)] = params.favorable_reward
        state_reward.flags.writeable = False
        self._state_reward = state_reward

    def transition_dist(self, s, a, mu):
        return self._kernel[s, a]

    def reward(self, s, a, mu):
        mu = as_probs(mu)
        return float((1.0 - self.params.congestion_c * mu[s]) * self._state_reward[s])

    def transition_kernel(self, mu=None):
        return self._kernel

    def reward_table(self, mu):
        mu = as_probs(mu)
        scale = 1.0 - self.params.congestion_c * mu
        return np.repeat((scale * self._state_reward)[:, None], self.dims.num_actions, axis=1)


def make_congestion_env(params: CongestionGridParams) -> CongestionGridEnv:
    """Congestion grid world; communicating for jostle_p > 0 and side >= 2."""
    return CongestionGridEnv(params, _grid_kernel(params.side, params.jostle_p))


def make_two_class_env(params: CongestionGridParams) -> CongestionGridEnv:
    """Congestion grid variant whose state space splits into two classes.

    Transitions from the closed class (everything outside
    TWO_CLASS_OPEN_STATES) into the open class are zeroed and the removed
    mass is redistributed proportionally over the remaining support. One
    state-action pair, (4,4) moving (+1,+1), has its entire support inside
    the open class; its mass becomes a self loop.
    """
    if params.side != 5:
        raise ValueError("the two-class grid variant is defined for side 5 only")
    kernel = _grid_kernel(params.side, params.jostle_p)
    open_idx = [state_index(x, y, params.side) for x, y in TWO_CLASS_OPEN_STATES]
    for s in range(kernel.shape[0]):
        if s in open_idx:
            continue
        for a in range(kernel.shape[1]):
            row = kernel[s, a]
            if row[open_idx].sum() == 0.0:
                continue
            row[open_idx] = 0.0
            remaining = row.sum()
            if remaining > 0.0:
                row /= remaining
            else:
                row[s] = 1.0
    return CongestionGridEnv(params, kernel)


class FixedMdpEnv(MfgEnvironment):
    """Mean-field-independent MDP used as a ground-truth test environment."""

    kernel_depends_on_mu = False

    def __init__(self, kernel: np.ndarray, rewards: np.ndarray, initial=None):
        kernel = np.asarray(kernel, dtype=np.float64)
        rewards = np.asarray(rewards, dtype=np.float64)
        if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[2]:
            raise ValueError("kernel must have shape (S, A, S)")
        if rewards.shape != kernel.shape[:2]:
            raise ValueError("rewards must have shape (S, A)")
        if kernel.min() < -SIMPLEX_ATOL:
            raise ValueError("kernel entries must be nonnegative")
        if np.abs(kernel.sum(axis=2) - 1.0).max() > SIMPLEX_ATOL:
            raise ValueError("kernel rows must each sum to 1")
        if rewards.min() < 0.0 or rewards.max() > 1.0:
            raise ValueError("rewards must lie in [0, 1]")
        self.dims = StateActionDims(kernel.shape[0], kernel.shape[1])
        if initial is None:
            self.initial_distribution = MeanField.uniform(self.dims.num_states)
        else:
            self.initial_distribution = MeanField(as_probs(initial))
        kernel = kernel.copy()
        kernel.flags.writeable = False
        self._kernel = kernel
        rewards = rewards.copy()
        rewards.flags.writeable = False
        self._rewards = rewards

    def transition_dist(self, s, a, mu):
        return self._kernel[s, a]

    def reward(self, s, a, mu):
        return float(self._rewards[s, a])

    def transition_kernel(self, mu=None):
        return self._kernel

    def reward_table(self, mu):
        return self._rewards


def make_fixed_mdp_env(kernel, rewards, initial=None) -> FixedMdpEnv:
    """Wrap an explicit (S, A, S) kernel and (S, A) reward table."""
    return FixedMdpEnv(kernel, rewards, initial)


def sample_from_cdf(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: smallest index whose cumulative mass exceeds u."""
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(cdf) - 1)


def env_step(env: MfgEnvironment, s: int, a: int, mu, rng) -> tuple[int, float]:
    """Sample one transition with a single uniform draw from rng.

    Returns (next_state, reward); the reward is evaluated at the current
    state, action, and mean-field.
    """
    if not 0 <= s < env.dims.num_states:
        raise IndexError(f"state {s} out of range for {env.dims.num_states} states")
    if not 0 <= a < env.dims.num_actions:
        raise IndexError(f"action {a} out of range for {env.dims.num_actions} actions")
    dist = env.transition_dist(s, a, mu)
    next_state = sample_from_cdf(np.cumsum(dist), rng.random())
    return next_state, float(env.reward(s, a, mu))
