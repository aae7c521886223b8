"""Seeded integration of the coupled herder-target dynamics.

Targets follow damped second-order stochastic dynamics with long-range
repulsion from herders and short-range collision avoidance between all
agents. Herders are velocity-controlled single integrators. Integration is
explicit Euler-Maruyama with sqrt(dt) noise scaling.

All force helpers broadcast over leading batch dimensions so the training
environments can step many episodes at once through the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# Distances below this are floored in force denominators unless strict mode
# is requested; keeps mid-episode singularities from killing training runs.
DISTANCE_FLOOR = 1e-6


class SimulationBlowupError(RuntimeError):
    """Integration produced a non-finite value for one agent."""

    def __init__(self, kind: str, index: int):
        self.kind = kind
        self.index = index
        super().__init__(f"non-finite state for {kind} {index}")


@dataclass(frozen=True)
class SimParams:
    """Physical constants of the herder-target model.

    Defaults are the nominal simulation values; `dt` switches between the
    nominal integration step (0.01 s) and the coarse training step (0.05 s).
    """

    zeta: float = 4.0        # damping coefficient (1/s)
    diffusion: float = 3.0   # noise strength D
    lam: float = 40.0        # long-range herder->target repulsion strength
    beta: float = 40.0       # short-range repulsion strength
    r_c: float = 0.1         # safety radius (m)
    v_max: float = 12.0      # herder speed bound per component (m/s)
    rho_0: float = 25.0      # initial placement radius (m)
    rho_G: float = 5.0       # goal region radius (m)
    dt: float = 0.01         # integration step (s)
    n_herders: int = 1
    n_targets: int = 1

    def __post_init__(self):
        if min(self.diffusion, self.lam, self.beta) < 0:
            raise ValueError("interaction strengths must be >= 0")
        if self.zeta <= 0:
            raise ValueError("zeta must be > 0")
        if not self.rho_G < self.rho_0:
            raise ValueError("rho_G must be smaller than rho_0")
        for name in ("dt", "r_c", "v_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.n_herders < 1 or self.n_targets < 1:
            raise ValueError("need at least one herder and one target")

    def with_(self, **kwargs) -> "SimParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class WorldState:
    """Immutable snapshot of every agent plus the goal geometry.

    Arrays are copied on construction and marked read-only, so snapshots can
    be shared freely between threads and log entries.
    """

    herder_pos: np.ndarray           # (N, 2)
    target_pos: np.ndarray           # (M, 2)
    target_vel: np.ndarray           # (M, 2)
    goal_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    time: float = 0.0

    def __post_init__(self):
        for name in ("herder_pos", "target_pos", "target_vel", "goal_center"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.herder_pos.ndim != 2 or self.herder_pos.shape[1] != 2:
            raise ValueError("herder_pos must have shape (N, 2)")
        if self.target_pos.shape != self.target_vel.shape or self.target_pos.shape[1:] != (2,):
            raise ValueError("target_pos and target_vel must have shape (M, 2)")
        if self.goal_center.shape != (2,):
            raise ValueError("goal_center must be a 2-vector")
        for name in ("herder_pos", "target_pos", "target_vel", "goal_center"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"non-finite coordinates in {name}")

    @property
    def n_herders(self) -> int:
        return self.herder_pos.shape[0]

    @property
    def n_targets(self) -> int:
        return self.target_pos.shape[0]

    def with_goal(self, goal_center) -> "WorldState":
        return WorldState(self.herder_pos, self.target_pos, self.target_vel,
                          goal_center, self.time)


def episode_rng(seed: int) -> np.random.Generator:
    """Counter-based stream for one episode; same seed, same draws."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _floored_norm(diff: np.ndarray, strict: bool) -> np.ndarray:
    """Norms of (..., 2) difference vectors with the singularity guard."""
    d = np.linalg.norm(diff, axis=-1)
    if strict and np.any(d < DISTANCE_FLOOR):
        raise ValueError("coincident positions: inter-agent distance below "
                         f"{DISTANCE_FLOOR}")
    return np.maximum(d, DISTANCE_FLOOR)


def long_range_force(target_pos, herder_positions, lam, strict: bool = False) -> np.ndarray:
    """Repulsion exerted by all herders on one target.

    Equals lam * sum_j (T - H_j) / ||T - H_j||^3, i.e. the gradient of the
    interaction potential with respect to the target position, oriented to
    push the target away from every herder.
    """
    t = np.asarray(target_pos, dtype=float)
    h = np.asarray(herder_positions, dtype=float).reshape(-1, 2)
    diff = t - h
    d = _floored_norm(diff, strict)
    return lam * (diff / d[:, None] ** 3).sum(axis=0)


def short_range_force(agent_index, all_positions, beta, r_c, strict: bool = False) -> np.ndarray:
    """Collision-avoidance repulsion from every neighbor within r_c."""
    pos = np.asarray(all_positions, dtype=float).reshape(-1, 2)
    diff = pos[agent_index] - np.delete(pos, agent_index, axis=0)
    if diff.shape[0] == 0:
        return np.zeros(2)
    d = _floored_norm(diff, strict)
    near = d <= r_c
    if not near.any():
        return np.zeros(2)
    return beta * (diff[near] / d[near, None] ** 3).sum(axis=0)


def _pair_repulsion(pos_a, pos_b, strength, r_c=None, exclude_self=False,
                    strict=False):
    """Summed repulsion on each row of pos_a from every row of pos_b.

    pos_a: (..., A, 2), pos_b: (..., B, 2); broadcasts over leading dims.
    With r_c set, only neighbors within the safety radius contribute.
    """
    diff = pos_a[..., :, None, :] - pos_b[..., None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    if exclude_self:
        a = pos_a.shape[-2]
        d[..., np.arange(a), np.arange(a)] = np.inf
    if strict and np.any(d < DISTANCE_FLOOR):
        raise ValueError("coincident positions")
    d = np.maximum(d, DISTANCE_FLOOR)
    w = 1.0 / d**3
    if r_c is not None:
        w = np.where(d <= r_c, w, 0.0)
    return strength * (diff * w[..., None]).sum(axis=-2)


def target_accelerations(target_pos, target_vel, herder_pos, p: SimParams,
                         strict: bool = False) -> np.ndarray:
    """Deterministic part of the target dynamics; broadcasts over batches."""
    acc = -p.zeta * target_vel
    acc = acc + _pair_repulsion(target_pos, herder_pos, p.lam, strict=strict)
    if p.beta > 0:
        acc = acc + _pair_repulsion(target_pos, target_pos, p.beta, r_c=p.r_c,
                                    exclude_self=True)
        acc = acc + _pair_repulsion(target_pos, herder_pos, p.beta, r_c=p.r_c,
                                    strict=strict)
    return acc


def herder_drifts(herder_pos, target_pos, p: SimParams) -> np.ndarray:
    """Short-range collision-avoidance velocity of each herder."""
    if p.beta == 0:
        return np.zeros_like(herder_pos)
    drift = _pair_repulsion(herder_pos, herder_pos, p.beta, r_c=p.r_c,
                            exclude_self=True)
    drift += _pair_repulsion(herder_pos, target_pos, p.beta, r_c=p.r_c)
    return drift


def _check_finite(arr: np.ndarray, kind: str):
    bad = ~np.isfinite(arr).all(axis=-1)
    if bad.any():
        raise SimulationBlowupError(kind, int(np.flatnonzero(bad)[0]))


def step_targets(state: WorldState, params: SimParams,
                 rng: np.random.Generator, strict: bool = False) -> WorldState:
    """One Euler-Maruyama step of the target dynamics.

    v <- v + dt * acc + D * sqrt(dt) * eta, x <- x + dt * v_new; herders do
    not move. Noise is one (M, 2) standard-normal draw from the episode
    stream, so the update is independent of target storage order.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        acc = target_accelerations(state.target_pos, state.target_vel,
                                   state.herder_pos, params, strict=strict)
        noise = rng.standard_normal(state.target_pos.shape)
        vel = state.target_vel + params.dt * acc + params.diffusion * np.sqrt(params.dt) * noise
        pos = state.target_pos + params.dt * vel
    _check_finite(vel, "target")
    _check_finite(pos, "target")
    return WorldState(state.herder_pos, pos, vel, state.goal_center,
                      state.time + params.dt)


def step_herders(state: WorldState, controls, params: SimParams) -> WorldState:
    """One first-order step of the herders under bounded velocity controls."""
    u = np.asarray(controls, dtype=float).reshape(state.n_herders, 2)
    if np.any(np.abs(u) > params.v_max + 1e-12):
        raise ValueError(f"control components must lie within [-{params.v_max}, {params.v_max}]")
    pos = state.herder_pos + params.dt * (herder_drifts(state.herder_pos,
                                                        state.target_pos,
                                                        params) + u)
    _check_finite(pos, "herder")
    return WorldState(pos, state.target_pos, state.target_vel,
                      state.goal_center, state.time)


def uniform_disk(rng: np.random.Generator, n: int, radius: float,
                 center=(0.0, 0.0)) -> np.ndarray:
    """n points i.i.d. uniform over the disk of the given radius."""
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return np.asarray(center, dtype=float) + np.column_stack(
        (r * np.cos(theta), r * np.sin(theta)))


def init_episode(params: SimParams, seed: int) -> WorldState:
    """Initial state: all agents uniform over the placement disk, targets at rest.

    Herder positions are drawn before target positions from the episode
    stream, so identical seeds give bit-identical states.
    """
    rng = episode_rng(seed)
    herders = uniform_disk(rng, params.n_herders, params.rho_0)
    targets = uniform_disk(rng, params.n_targets, params.rho_0)
    return WorldState(herders, targets, np.zeros_like(targets))
