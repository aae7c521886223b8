"""Heuristic comparison policies and the cohesive-target dynamics variant.

The peer-to-peer strategy partitions the plane into angular sectors about
the goal, anchored to the herders' current bearings, and sends each herder
behind the farthest outside target of its sector. The sector construction is
a reconstruction of the published rule, not a line-by-line port.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import clamp_controls
from .episode import IDLE
from .sim import SimParams, WorldState, target_accelerations, uniform_disk

COHESIVE_INIT_RADIUS = 2.0


@dataclass(frozen=True)
class P2PConfig:
    standoff: float = 1.0   # driving distance behind the target (m)
    p_gain: float = 10.0    # proportional gain of the drive-to-point law

    def __post_init__(self):
        if self.standoff <= 0:
            raise ValueError("standoff must be > 0")


def _bearings(points, center):
    d = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    return np.arctan2(d[:, 1], d[:, 0])


def p2p_select(state: WorldState, rho_G: float) -> np.ndarray:
    """One target index per herder; IDLE when nothing is left to fetch.

    Sectors are bounded by the angular bisectors between consecutive herder
    bearings about the goal center; each herder claims the outside target
    farthest from the goal within its sector, falling back to the farthest
    unclaimed target when its sector is empty. No two herders ever share a
    target while enough distinct targets remain.
    """
    n = state.n_herders
    t_dist = np.linalg.norm(state.target_pos - state.goal_center, axis=1)
    outside = np.flatnonzero(t_dist > rho_G)
    selections = np.full(n, IDLE, dtype=int)
    if outside.size == 0:
        return selections
    if n == 1:
        selections[0] = outside[np.argmax(t_dist[outside])]
        return selections

    h_ang = _bearings(state.herder_pos, state.goal_center)
    # nudge duplicate bearings apart so sector bounds stay well defined
    order = np.lexsort((np.arange(n), h_ang))
    sorted_ang = h_ang[order].copy()
    for i in range(1, n):
        if sorted_ang[i] <= sorted_ang[i - 1]:
            sorted_ang[i] = sorted_ang[i - 1] + 1e-9
    t_ang = _bearings(state.target_pos, state.goal_center)

    # sector of sorted herder i: between bisector(i-1, i) and bisector(i, i+1)
    two_pi = 2 * np.pi
    next_ang = np.roll(sorted_ang, -1).copy()
    next_ang[-1] += two_pi
    upper = (sorted_ang + next_ang) / 2          # bisector with the next herder
    lower = np.roll(upper, 1).copy()
    lower[0] -= two_pi

    claimed: set[int] = set()
    for rank, j in enumerate(order):
        rel = np.mod(t_ang[outside] - lower[rank], two_pi)
        width = upper[rank] - lower[rank]
        in_sector = outside[rel < width]
        in_sector = np.array([i for i in in_sector if i not in claimed], dtype=int)
        if in_sector.size:
            pick = in_sector[np.argmax(t_dist[in_sector])]
        else:
            free = np.array([i for i in outside if i not in claimed], dtype=int)
            if free.size == 0:
                continue  # more herders than outside targets: stay idle
            pick = free[np.argmax(t_dist[free])]
        selections[j] = pick
        claimed.add(int(pick))
    return selections


def behind_target_drive(herder_pos, target_pos, goal_center, standoff: float,
                        v_max: float, p_gain: float = 10.0) -> np.ndarray:
    """Proportional drive toward the point `standoff` behind the target
    (behind = away from the goal). Holds position when the target sits on
    the goal center and the direction is undefined."""
    h = np.asarray(herder_pos, dtype=float)
    t = np.asarray(target_pos, dtype=float)
    away = t - np.asarray(goal_center, dtype=float)
    dist = np.linalg.norm(away)
    if dist < 1e-12:
        return np.zeros(2)
    desired = t + standoff * away / dist
    return clamp_controls(p_gain * (desired - h), v_max)


class P2PController:
    """Full heuristic stack: sector-based selection plus behind-target driving."""

    def __init__(self, config: P2PConfig, params: SimParams):
        self.config = config
        self.params = params

    def reset(self):
        pass

    def act(self, state: WorldState):
        sel = p2p_select(state, self.params.rho_G)
        controls = np.zeros((state.n_herders, 2))
        for j in range(state.n_herders):
            if sel[j] == IDLE:
                continue
            controls[j] = behind_target_drive(
                state.herder_pos[j], state.target_pos[sel[j]],
                state.goal_center, self.config.standoff, self.params.v_max,
                self.config.p_gain)
        return controls, sel


@dataclass(frozen=True)
class CohesionParams:
    gain: float = 2.0  # linear spring toward the targets' center of mass

    def __post_init__(self):
        if self.gain < 0:
            raise ValueError("cohesion gain must be >= 0")


def cohesive_target_step(state: WorldState, cohesion: CohesionParams,
                         params: SimParams, rng: np.random.Generator) -> WorldState:
    """Target step with an added attraction toward the targets' center of
    mass; with gain 0 it reduces exactly to the nominal dynamics."""
    acc = target_accelerations(state.target_pos, state.target_vel,
                               state.herder_pos, params)
    if cohesion.gain > 0:
        com = state.target_pos.mean(axis=0)
        acc = acc + cohesion.gain * (com - state.target_pos)
    noise = rng.standard_normal(state.target_pos.shape)
    vel = state.target_vel + params.dt * acc \
        + params.diffusion * np.sqrt(params.dt) * noise
    pos = state.target_pos + params.dt * vel
    return WorldState(state.herder_pos, pos, vel, state.goal_center,
                      state.time + params.dt)


def cohesive_init_episode(params: SimParams, seed: int) -> WorldState:
    """Herders uniform over the placement disk; targets packed inside a
    radius-2 neighborhood around a random cluster center."""
    from .sim import episode_rng

    rng = episode_rng(seed)
    herders = uniform_disk(rng, params.n_herders, params.rho_0)
    max_center = max(params.rho_0 - COHESIVE_INIT_RADIUS, 0.0)
    center = uniform_disk(rng, 1, max_center)[0]
    targets = uniform_disk(rng, params.n_targets, COHESIVE_INIT_RADIUS, center)
    return WorldState(herders, targets, np.zeros_like(targets))
