"""Topological-sensing views for large worlds and moving-goal support.

Limited topological sensing reduces an arbitrarily large world to the fixed
agent counts the trained networks expect; the goal-frame transform and the
sigmoid goal path let the same weights track a moving goal region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import WorldState


@dataclass(frozen=True)
class ReducedView:
    """k-nearest view of the world from one herder.

    `state` holds the ego herder first; `herder_ids` / `target_ids` map view
    rows back to full-world indices so selections stay world-addressable.
    """

    state: WorldState
    herder_ids: np.ndarray
    target_ids: np.ndarray


def _nearest(ego, points, k):
    d = np.linalg.norm(np.asarray(points) - ego, axis=1)
    # stable argsort => ties broken by lower index
    return np.argsort(d, kind="stable")[:k]


def topological_filter(state: WorldState, herder_idx: int,
                       n_obs_herders: int, m_obs_targets: int) -> ReducedView:
    """Ego herder plus its nearest other herders and targets, by Euclidean
    distance, ties to the lower index."""
    if state.n_herders - 1 < n_obs_herders:
        raise ValueError("not enough other herders for the sensing budget")
    if state.n_targets < m_obs_targets:
        raise ValueError("not enough targets for the sensing budget")
    ego = state.herder_pos[herder_idx]
    other_ids = np.delete(np.arange(state.n_herders), herder_idx)
    keep_h = other_ids[_nearest(ego, state.herder_pos[other_ids], n_obs_herders)]
    keep_t = _nearest(ego, state.target_pos, m_obs_targets)
    herder_ids = np.concatenate(([herder_idx], keep_h))
    view = WorldState(state.herder_pos[herder_ids],
                      state.target_pos[keep_t],
                      state.target_vel[keep_t],
                      state.goal_center, state.time)
    return ReducedView(view, herder_ids, np.asarray(keep_t))


def goal_frame_transform(state: WorldState, goal_center) -> WorldState:
    """Shift every position by -goal_center and recenter the goal at the
    origin; velocities are unchanged."""
    c = np.asarray(goal_center, dtype=float)
    return WorldState(state.herder_pos - c, state.target_pos - c,
                      state.target_vel, np.zeros(2), state.time)


def _sigmoid_path(start, end, steepness):
    """S-shaped path from start to end: linear sweep in x, normalized
    logistic sweep in y. Works on scalar or array parameters."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    lo = 1.0 / (1.0 + np.exp(steepness / 2))
    hi = 1.0 / (1.0 + np.exp(-steepness / 2))

    def point(tau):
        tau = np.clip(tau, 0.0, 1.0)
        sig = (1.0 / (1.0 + np.exp(-steepness * (tau - 0.5))) - lo) / (hi - lo)
        x = start[0] + tau * (end[0] - start[0])
        y = start[1] + sig * (end[1] - start[1])
        return np.stack((x, y), axis=-1)

    return point


def sigmoid_goal_trajectory(t, start, end, speed_ratio: float = 50.0,
                            agent_speed: float = 12.0,
                            steepness: float = 8.0) -> np.ndarray:
    """Goal center at time t moving along an S-shaped path at constant speed
    agent_speed / speed_ratio, resting at the end point once reached."""
    return make_sigmoid_goal_trajectory(start, end, speed_ratio, agent_speed,
                                        steepness)(t)


def make_sigmoid_goal_trajectory(start, end, speed_ratio: float = 50.0,
                                 agent_speed: float = 12.0,
                                 steepness: float = 8.0):
    """Precompute the arc-length table once and return t -> goal center."""
    if speed_ratio <= 0 or agent_speed <= 0:
        raise ValueError("speed_ratio and agent_speed must be > 0")
    path = _sigmoid_path(start, end, steepness)
    taus = np.linspace(0.0, 1.0, 50_001)
    pts = path(taus)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    speed = agent_speed / speed_ratio

    def trajectory(t):
        s = min(speed * max(float(t), 0.0), total)
        tau = np.interp(s, arc, taus)
        return path(tau)

    return trajectory


def tracking_containment_fraction(log, chi_star: float) -> float:
    """Fraction of post-gathering steps whose mean target position stays
    within the goal radius of the (possibly moving) goal center."""
    chi = log.chi_series()
    hits = np.flatnonzero(chi >= chi_star)
    if hits.size == 0:
        return 0.0
    k0 = int(hits[0])
    mean_t = np.asarray(log.target_pos)[k0:].mean(axis=1)
    dev = np.linalg.norm(mean_t - np.asarray(log.goal_center)[k0:], axis=1)
    return float((dev <= log.params.rho_G).mean())
