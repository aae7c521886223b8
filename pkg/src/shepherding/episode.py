"""Episode rollout, trajectory logging, and the trajectory CSV format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import containment_fraction
from .sim import SimParams, WorldState, episode_rng, init_episode, step_herders, step_targets

IDLE = -1  # selection index of a herder with nothing to pursue

# Trajectory CSVs carry 9 significant digits.
_FMT = "%.9g"


@dataclass(frozen=True)
class TrajectoryLog:
    """Per-step record of one episode.

    `times` has K+1 entries (initial state included); `controls`,
    `selections` and `rewards` have K entries, one per integration step,
    aligned with the state they were computed from.
    """

    params: SimParams
    times: np.ndarray          # (K+1,)
    herder_pos: np.ndarray     # (K+1, N, 2)
    target_pos: np.ndarray     # (K+1, M, 2)
    target_vel: np.ndarray     # (K+1, M, 2)
    goal_center: np.ndarray    # (K+1, 2)
    controls: np.ndarray       # (K, N, 2)
    selections: np.ndarray     # (K, N) int
    rewards: np.ndarray        # (K, N)

    def __post_init__(self):
        dt = self.params.dt
        gaps = np.diff(self.times)
        if len(gaps) and not np.allclose(gaps, dt, rtol=1e-9, atol=1e-9):
            raise ValueError("time stamps must increase in steps of dt")
        if self.controls.size and np.any(np.abs(self.controls) > self.params.v_max + 1e-9):
            raise ValueError("logged controls exceed the control box")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def state_at(self, k: int) -> WorldState:
        return WorldState(self.herder_pos[k], self.target_pos[k],
                          self.target_vel[k], self.goal_center[k],
                          float(self.times[k]))

    def chi_series(self, chi_star_radius: float | None = None) -> np.ndarray:
        """Containment fraction at every logged instant."""
        rho = self.params.rho_G if chi_star_radius is None else chi_star_radius
        dist = np.linalg.norm(self.target_pos - self.goal_center[:, None, :], axis=2)
        return (dist <= rho).mean(axis=1)

    def write_csv(self, path, provenance: str | None = None):
        n, m = self.params.n_herders, self.params.n_targets
        cols = ["time"]
        cols += [f"h{j}_{c}" for j in range(n) for c in ("x", "y")]
        cols += [f"t{i}_{c}" for i in range(m) for c in ("x", "y", "vx", "vy")]
        cols += [f"u{j}_{c}" for j in range(n) for c in ("x", "y")]
        cols += [f"sel{j}" for j in range(n)]
        cols += [f"r{j}" for j in range(n)]
        cols += ["goal_x", "goal_y"]
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            fh.write(",".join(cols) + "\n")
            for k in range(len(self.times)):
                row = [_FMT % self.times[k]]
                row += [_FMT % v for v in self.herder_pos[k].ravel()]
                row += [_FMT % v for v in np.column_stack(
                    (self.target_pos[k], self.target_vel[k])).ravel()]
                if k < self.n_steps:
                    row += [_FMT % v for v in self.controls[k].ravel()]
                    row += [str(int(s)) for s in self.selections[k]]
                    row += [_FMT % v for v in self.rewards[k]]
                else:
                    row += [""] * (4 * n)
                row += [_FMT % v for v in self.goal_center[k]]
                fh.write(",".join(row) + "\n")


def read_trajectory_csv(path) -> dict:
    """Read a trajectory CSV back into column arrays (strings parsed lazily)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh
                 if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    raw = [ln.split(",") for ln in lines[1:]]
    out = {}
    for idx, name in enumerate(header):
        vals = [r[idx] for r in raw]
        out[name] = np.array([float(v) if v != "" else np.nan for v in vals])
    return out


class _LogBuilder:
    def __init__(self, params: SimParams):
        self.params = params
        self.times, self.h, self.t, self.v, self.g = [], [], [], [], []
        self.u, self.sel, self.r = [], [], []

    def add_state(self, state: WorldState):
        self.times.append(state.time)
        self.h.append(state.herder_pos)
        self.t.append(state.target_pos)
        self.v.append(state.target_vel)
        self.g.append(state.goal_center)

    def add_step(self, controls, selections, rewards):
        self.u.append(np.asarray(controls, dtype=float))
        self.sel.append(np.asarray(selections, dtype=int))
        self.r.append(np.asarray(rewards, dtype=float))

    def build(self) -> TrajectoryLog:
        n = self.params.n_herders
        return TrajectoryLog(
            self.params,
            np.array(self.times),
            np.array(self.h), np.array(self.t), np.array(self.v),
            np.array(self.g),
            np.array(self.u).reshape(-1, n, 2),
            np.array(self.sel, dtype=int).reshape(-1, n),
            np.array(self.r).reshape(-1, n),
        )


def run_episode(controller, params: SimParams, seed: int, t_max: float,
                t_contain: float, chi_star: float = 0.99,
                goal_trajectory=None, target_step=None, init_state=None,
                reward_fn=None) -> TrajectoryLog:
    """Roll out one episode under the given controller.

    Steps until the containment fraction has stayed at or above `chi_star`
    continuously for `t_contain` seconds, or until `t_max`. The controller
    must expose ``act(state) -> (controls, selections)`` with controls
    already clamped to the control box, and may expose ``reset()``.

    `goal_trajectory(t)` repositions the goal center each step (moving-goal
    episodes); `target_step(state, params, rng)` swaps in alternative target
    dynamics; `reward_fn(state, controls, selections)` fills the per-herder
    reward column of the log.
    """
    rng = episode_rng(seed)
    if init_state is None:
        state = init_episode(params, seed)
    else:
        state = init_state
    if goal_trajectory is not None:
        state = state.with_goal(goal_trajectory(0.0))
    if target_step is None:
        target_step = step_targets
    if hasattr(controller, "reset"):
        controller.reset()

    log = _LogBuilder(params)
    log.add_state(state)
    hold_start = 0.0 if containment_fraction(state, params.rho_G) >= chi_star else None
    n_steps = max(1, int(round(t_max / params.dt)))

    for k in range(n_steps):
        controls, selections = controller.act(state)
        rewards = (np.zeros(params.n_herders) if reward_fn is None
                   else np.asarray(reward_fn(state, controls, selections), dtype=float))
        log.add_step(controls, selections, rewards)

        state = target_step(state, params, rng)
        state = step_herders(state, controls, params)
        if goal_trajectory is not None:
            state = state.with_goal(goal_trajectory(state.time))
        log.add_state(state)

        if containment_fraction(state, params.rho_G) >= chi_star:
            if hold_start is None:
                hold_start = state.time
            if state.time - hold_start >= t_contain * (1 - 1e-12):
                break
        else:
            hold_start = None
    return log.build()
