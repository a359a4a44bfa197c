"""Episodic two-timescale step sizes, exploration noise, and the simplex net.

Step sizes have the form c / (k**exponent * t**zeta): summable within an
episode (zeta > 1, so the agent's chain varies slowly inside an episode) and
non-summable across episodes. The policy exponent theta is smaller than the
mean-field exponent gamma, so the policy moves on the faster timescale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_probs


@dataclass(frozen=True)
class ScheduleParams:
    """Learning-rate and exploration constants shared by a whole run.

    constant_psi switches the exploration-noise coefficient from the default
    episode-dependent schedule (zero on each episode's first step, then
    psi / (1 - c_pi / k**theta)) to the plain constant psi.
    """

    c_mu: float = 0.5
    c_pi: float = 0.5
    gamma: float = 0.6
    theta: float = 0.55
    zeta: float = 1.1
    c_beta: float = 5.0
    nu: float = 0.55
    psi: float = 0.2
    lam: float = 1.0
    constant_psi: bool = False

    def __post_init__(self):
        if not 0.0 < self.c_mu <= 1.0:
            raise ValueError("c_mu must lie in (0, 1]")
        if not 0.0 < self.c_pi <= 1.0:
            raise ValueError("c_pi must lie in (0, 1]")
        if not 0.0 < self.theta < self.gamma:
            raise ValueError("theta must satisfy 0 < theta < gamma")
        if not self.gamma < 1.0:
            raise ValueError("gamma must be < 1")
        if not self.zeta > 1.0:
            raise ValueError("zeta must be > 1")
        if self.c_beta <= 0.0:
            raise ValueError("c_beta must be > 0")
        if not 0.5 < self.nu <= 1.0:
            raise ValueError("nu must lie in (0.5, 1]")
        if not 0.0 < self.psi < 1.0 - self.c_pi:
            raise ValueError("psi must lie in (0, 1 - c_pi)")
        if self.lam <= 0.0 or not math.isfinite(self.lam):
            raise ValueError("lambda must be a finite positive real")


def step_size_mu(params: ScheduleParams, k: int, t: int) -> float:
    """Mean-field step size c_mu / (k**gamma * t**zeta) for k, t >= 1."""
    return params.c_mu / (k**params.gamma * t**params.zeta)


def step_size_pi(params: ScheduleParams, k: int, t: int) -> float:
    """Policy step size c_pi / (k**theta * t**zeta) for k, t >= 1."""
    return params.c_pi / (k**params.theta * t**params.zeta)


def exploration_coeff(params: ScheduleParams, k: int, t: int) -> float:
    """Weight of the uniform exploration noise in the policy update.

    Default schedule: 0 on each episode's first step; psi / (1 - c_pi /
    k**theta) afterwards, decreasing toward psi as k grows. The constant
    variant returns psi for every step.
    """
    if params.constant_psi:
        return params.psi
    if t == 1:
        return 0.0
    return params.psi / (1.0 - params.c_pi / k**params.theta)


def exploration_floor(params: ScheduleParams, num_actions: int, num_episodes: int, steps_per_episode: int) -> float:
    """Uniform lower bound on policy entries over steps t > 1 of every episode.

    Each policy entry obeys pi_t >= (1 - c_t) * pi_{t-1} + c_t * psi_t / A
    because the Boltzmann part of the update is nonnegative, so the scalar
    recursion started from the uniform initial policy (entry 1/A) minorizes
    the true minimum entry along the whole run. Evaluated in closed form per
    episode via cumulative products.
    """
    if num_actions < 1 or num_episodes < 1 or steps_per_episode < 1:
        raise ValueError("num_actions, num_episodes, steps_per_episode must be >= 1")
    steps = np.arange(1, steps_per_episode + 1, dtype=np.float64)
    inv_tz = steps ** (-params.zeta)
    x = 1.0 / num_actions
    floor = math.inf
    for k in range(1, num_episodes + 1):
        c = (params.c_pi / k**params.theta) * inv_tz
        noise = np.full(steps_per_episode, exploration_coeff(params, k, 2) / num_actions)
        noise[0] = exploration_coeff(params, k, 1) / num_actions
        keep = 1.0 - c
        # x_t = prod(keep[1..t]) * (x_0 + sum_{l<=t} c_l * noise_l / prod(keep[1..l]))
        cum_keep = np.cumprod(keep)
        x_t = cum_keep * (x + np.cumsum(c * noise / cum_keep))
        if steps_per_episode > 1:
            floor = min(floor, float(x_t[1:].min()))
        x = float(x_t[-1])
    return floor


@dataclass(frozen=True)
class EpsilonNet:
    """Finite cover of the probability simplex with L1 radius <= mesh.

    points has shape (N, S); rows are simplex points sorted lexicographically
    so ties in the projection resolve to the lexicographically smallest point.
    """

    mesh: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("net must contain at least one simplex point")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def num_points(self) -> int:
        return int(self.points.shape[0])


def simplex_grid_size(num_states: int, resolution: int) -> int:
    """Number of grid points with coordinates m/resolution summing to 1."""
    return math.comb(resolution + num_states - 1, num_states - 1)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def build_epsilon_net(num_states: int, mesh: float, max_points: int = 1_000_000) -> EpsilonNet:
    """Regular simplex grid of resolution ceil(S / mesh).

    Neighboring grid points are 2/resolution apart in L1 and rounding any
    simplex point onto the grid moves it by at most S/resolution <= mesh, so
    the L1 covering radius is <= mesh. Raises when the grid would exceed
    max_points; the error reports the budget the requested mesh would need.
    """
    if mesh <= 0.0:
        raise ValueError("mesh must be > 0")
    if num_states < 1:
        raise ValueError("num_states must be >= 1")
    resolution = math.ceil(num_states / mesh)
    count = simplex_grid_size(num_states, resolution)
    if count > max_points:
        raise ValueError(
            f"mesh {mesh} over {num_states} states needs {count} net points, "
            f"exceeding the budget of {max_points}; coarsen the mesh"
        )
    points = np.array(list(_compositions(resolution, num_states)), dtype=np.float64)
    points /= resolution
    return EpsilonNet(mesh=float(mesh), points=points)


def feasible_mesh(num_states: int, mesh: float, max_points: int = 1_000_000) -> float:
    """Smallest mesh >= the requested one whose grid fits the point budget."""
    wanted = math.ceil(num_states / mesh)
    if simplex_grid_size(num_states, wanted) <= max_points:
        return mesh
    lo, hi = 1, wanted
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if simplex_grid_size(num_states, mid) <= max_points:
            lo = mid
        else:
            hi = mid
    return num_states / lo


def project_to_net(net: EpsilonNet, mu) -> np.ndarray:
    """Net point with minimal L1 distance to mu.

    Ties resolve to the lexicographically smallest point because the net rows
    are stored in lexicographic order. Idempotent: net points map to
    themselves.
    """
    mu = as_probs(mu)
    distances = np.abs(net.points - mu).sum(axis=1)
    return net.points[int(np.argmin(distances))]
