"""Observation encoding, action decoding, rewards, and the two-layer controller.

The driving layer maps one (herder, selected target) pair to a velocity
command; the selection layer assigns a target index to each herder. All
indicator terms are evaluated in goal-centered coordinates so the same
rewards and policies work unchanged when the goal region moves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .episode import IDLE
from .nets import forward
from .sim import WorldState

VELOCITY_BINS = 5  # per component: {-v, -v/2, 0, v/2, v}


@dataclass(frozen=True)
class RewardGains:
    """Gains of the driving reward (k_a, k_s, k_c, k_h) and the selection
    reward (k_t). The driving gains should satisfy k_s > k_a > k_c."""

    k_a: float
    k_s: float
    k_c: float
    k_h: float
    k_t: float

    def __post_init__(self):
        if min(self.k_a, self.k_s, self.k_c, self.k_h, self.k_t) < 0:
            raise ValueError("reward gains must be >= 0")
        if not (self.k_s > self.k_a > self.k_c):
            warnings.warn("expected gain hierarchy k_s > k_a > k_c",
                          stacklevel=2)

    @classmethod
    def for_dqn(cls) -> "RewardGains":
        return cls(k_a=0.5, k_s=1.0, k_c=0.1, k_h=5.0, k_t=1.0)

    @classmethod
    def for_ppo(cls) -> "RewardGains":
        return cls(k_a=0.05, k_s=0.1, k_c=0.001, k_h=5.0, k_t=0.01)


def _centered(state: WorldState):
    return (state.herder_pos - state.goal_center,
            state.target_pos - state.goal_center)


def driving_obs_dqn(state: WorldState, herder_idx: int, target_idx: int) -> np.ndarray:
    """[T_x, T_y, H_x, H_y] in goal-centered coordinates."""
    h, t = _centered(state)
    return np.concatenate((t[target_idx], h[herder_idx]))


def driving_obs_ppo(state: WorldState, herder_idx: int, target_idx: int,
                    rho_0: float) -> np.ndarray:
    """[T, T - H] / rho_0 in goal-centered coordinates."""
    if rho_0 <= 0:
        raise ValueError("rho_0 must be > 0")
    h, t = _centered(state)
    return np.concatenate((t[target_idx], t[target_idx] - h[herder_idx])) / rho_0


def decode_discrete_action(index: int, v_max: float) -> np.ndarray:
    """Map a flat action index in [0, 25) onto the 5x5 velocity grid.

    Row-major: vx bin = index // 5, vy bin = index % 5, with bins
    {-v, -v/2, 0, v/2, v}.
    """
    if not 0 <= index < VELOCITY_BINS**2:
        raise ValueError(f"action index {index} outside [0, {VELOCITY_BINS**2})")
    bins = np.array([-1.0, -0.5, 0.0, 0.5, 1.0]) * v_max
    return np.array([bins[index // VELOCITY_BINS], bins[index % VELOCITY_BINS]])


def driving_reward(state: WorldState, control, gains: RewardGains,
                   rho_G: float, herder_idx: int = 0, target_idx: int = 0) -> float:
    """Single herder-target driving reward: approach, steer, effort, and the
    stay-out-of-the-goal penalty. All terms are <= 0."""
    h, t = _centered(state)
    hj, ti = h[herder_idx], t[target_idx]
    u = np.asarray(control, dtype=float)
    t_dist = np.linalg.norm(ti)
    r = -gains.k_a * np.linalg.norm(ti - hj)
    if t_dist > rho_G:
        r -= gains.k_s * (t_dist - rho_G)
    r -= gains.k_c * np.linalg.norm(u)
    if np.linalg.norm(hj) <= rho_G:
        r -= gains.k_h
    return float(r)


def selection_obs(state: WorldState, herder_idx: int, scale: float | None = None) -> np.ndarray:
    """[own position, other herders' positions, all target positions].

    Ego-centric layout: the observing herder always occupies the first two
    slots. `scale` divides everything (used by the actor-critic policies).
    """
    h, t = _centered(state)
    others = np.delete(h, herder_idx, axis=0)
    obs = np.concatenate((h[herder_idx], others.ravel(), t.ravel()))
    return obs / scale if scale else obs


def selection_reward(state: WorldState, k_t: float, rho_G: float) -> float:
    """Global target-selection reward: minus the summed distances of targets
    still outside the goal; identical for every herder."""
    _, t = _centered(state)
    dist = np.linalg.norm(t, axis=1)
    outside = dist > rho_G
    return float(-k_t * (dist[outside] - rho_G).sum())


def clamp_controls(controls, v_max: float) -> np.ndarray:
    return np.clip(np.asarray(controls, dtype=float), -v_max, v_max)


class DrivingPolicy:
    """Interface of the low-level layer: one control per (herder, target)."""

    def control(self, state: WorldState, herder_idx: int, target_idx: int) -> np.ndarray:
        raise NotImplementedError


class SelectionPolicy:
    """Interface of the high-level layer: one target index per herder."""

    def select(self, state: WorldState, herder_idx: int) -> int:
        raise NotImplementedError


class DQNDrivingPolicy(DrivingPolicy):
    """Greedy decode of the discrete driving Q-network."""

    def __init__(self, net, v_max: float):
        self.net = net
        self.v_max = v_max

    def control(self, state, herder_idx, target_idx):
        q = forward(self.net, driving_obs_dqn(state, herder_idx, target_idx))
        return decode_discrete_action(int(np.argmax(q)), self.v_max)


class PPODrivingPolicy(DrivingPolicy):
    """Deterministic mean of the Gaussian driving actor, scaled to the box."""

    def __init__(self, actor_net, v_max: float, rho_0: float):
        self.net = actor_net
        self.v_max = v_max
        self.rho_0 = rho_0

    def control(self, state, herder_idx, target_idx):
        obs = driving_obs_ppo(state, herder_idx, target_idx, self.rho_0)
        return self.v_max * forward(self.net, obs)

    def batch_controls(self, obs_batch: np.ndarray) -> np.ndarray:
        return self.v_max * forward(self.net, obs_batch)


class DQNSelectionPolicy(SelectionPolicy):
    """Greedy target choice from the shared selection Q-network."""

    def __init__(self, net):
        self.net = net

    def select(self, state, herder_idx):
        return int(np.argmax(forward(self.net, selection_obs(state, herder_idx))))


class MAPPOSelectionPolicy(SelectionPolicy):
    """Argmax of the shared softmax actor over normalized observations."""

    def __init__(self, actor_net, scale: float):
        self.net = actor_net
        self.scale = scale

    def select(self, state, herder_idx):
        obs = selection_obs(state, herder_idx, scale=self.scale)
        return int(np.argmax(forward(self.net, obs)))


class HierarchicalController:
    """Two-layer controller: periodic target selection feeding the driver.

    During training the selection layer is queried every `n_w` steps and the
    stored choice is reused in between; with `evaluate=True` the constraint
    is removed and selection runs every step. With a single target the
    selection layer is bypassed entirely.

    `view_fn(state, herder_idx)` may supply a reduced world view (limited
    topological sensing); it must return an object with a `state` attribute
    whose first herder is the ego herder, plus `target_ids` mapping view
    targets back to the full world. Selections are stored as full-world
    indices, so a herder keeps pursuing the same physical target between
    queries even if its view churns.
    """

    def __init__(self, driving: DrivingPolicy, selection: SelectionPolicy | None,
                 params, n_w: int = 10, evaluate: bool = True, view_fn=None):
        if n_w < 1:
            raise ValueError("n_w must be >= 1")
        self.driving = driving
        self.selection = selection
        self.params = params
        self.n_w = n_w
        self.evaluate = evaluate
        self.view_fn = view_fn
        self.reset()

    def reset(self):
        self._step = 0
        self._selected = None

    def _select_one(self, state: WorldState, j: int) -> int:
        if self.view_fn is None:
            return int(self.selection.select(state, j))
        view = self.view_fn(state, j)
        local = int(self.selection.select(view.state, 0))
        return int(view.target_ids[local])

    def _select_all(self, state: WorldState) -> np.ndarray:
        if state.n_targets == 1:
            return np.zeros(state.n_herders, dtype=int)
        if self.selection is None:
            raise RuntimeError("no selection policy loaded")
        return np.array([self._select_one(state, j)
                         for j in range(state.n_herders)], dtype=int)

    def act(self, state: WorldState):
        if self.driving is None:
            raise RuntimeError("no driving policy loaded")
        if self.evaluate or self._selected is None or self._step % self.n_w == 0:
            self._selected = self._select_all(state)
        self._step += 1
        sel = self._selected
        controls = np.zeros((state.n_herders, 2))
        for j in range(state.n_herders):
            if sel[j] == IDLE:
                continue
            controls[j] = self.driving.control(state, j, int(sel[j]))
        return clamp_controls(controls, self.params.v_max), sel.copy()
