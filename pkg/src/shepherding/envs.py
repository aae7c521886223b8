"""Batched training environments.

Training runs millions of integration steps, so these environments keep raw
per-slot arrays and advance every slot with the same broadcasting force
arithmetic used by the single-episode stepper. Each slot owns a
counter-based RNG stream keyed by its episode seed.

Protocol shared by both environments: ``reset_all()`` -> obs, ``step(...)``
-> (obs, reward, done). With ``auto_reset`` the observation returned for a
finished slot already belongs to the next episode; completed episode returns
accumulate in ``completed_returns``.
"""

from __future__ import annotations

import numpy as np

from .control import RewardGains, decode_discrete_action
from .sim import SimParams, episode_rng, herder_drifts, target_accelerations, uniform_disk

TRAIN_SEED_OFFSET = 1 << 40  # keep training episode streams away from eval seeds


class _EpisodeSeeder:
    def __init__(self, train_seed: int):
        self.base = TRAIN_SEED_OFFSET + (int(train_seed) << 24)
        self.counter = 0

    def next(self) -> int:
        seed = self.base + self.counter
        self.counter += 1
        return seed


def _update_hold(hold, time, gathered):
    """Start/extend/clear the containment clock of every slot."""
    started = np.where(np.isnan(hold), time, hold)
    return np.where(gathered, started, np.nan)


def _contained(hold, time, t_contain):
    held = time - np.nan_to_num(hold, nan=np.inf)
    return held >= t_contain * (1 - 1e-12)


class BatchDrivingEnv:
    """B parallel single-herder single-target driving episodes."""

    def __init__(self, params: SimParams, gains: RewardGains, batch: int,
                 train_seed: int, obs_mode: str = "ppo",
                 action_mode: str = "continuous", t_max: float = 60.0,
                 t_contain: float = 10.0, chi_star: float = 0.99,
                 auto_reset: bool = True):
        if params.n_herders != 1 or params.n_targets != 1:
            raise ValueError("driving environment is single herder, single target")
        self.p = params
        self.gains = gains
        self.b = batch
        self.obs_mode = obs_mode
        self.action_mode = action_mode
        self.t_max = t_max
        self.t_contain = t_contain
        self.chi_star = chi_star
        self.auto_reset = auto_reset
        self.seeder = _EpisodeSeeder(train_seed)
        self.n_actions = 25
        self.obs_dim = 4
        self.completed_returns: list[float] = []

    def reset_all(self) -> np.ndarray:
        b = self.b
        self.h = np.empty((b, 2))
        self.t = np.empty((b, 2))
        self.v = np.zeros((b, 2))
        self.time = np.zeros(b)
        self.hold = np.full(b, np.nan)
        self.ret = np.zeros(b)
        self.rngs = [None] * b
        for i in range(b):
            self._reset_slot(i)
        return self.obs()

    def _reset_slot(self, i: int):
        rng = episode_rng(self.seeder.next())
        self.rngs[i] = rng
        self.h[i] = uniform_disk(rng, 1, self.p.rho_0)[0]
        self.t[i] = uniform_disk(rng, 1, self.p.rho_0)[0]
        self.v[i] = 0.0
        self.time[i] = 0.0
        self.hold[i] = np.nan
        self.ret[i] = 0.0

    def obs(self) -> np.ndarray:
        if self.obs_mode == "dqn":
            return np.concatenate((self.t, self.h), axis=1)
        return np.concatenate((self.t, self.t - self.h), axis=1) / self.p.rho_0

    def reward(self, u: np.ndarray) -> np.ndarray:
        g, p = self.gains, self.p
        t_dist = np.linalg.norm(self.t, axis=1)
        h_dist = np.linalg.norm(self.h, axis=1)
        r = -g.k_a * np.linalg.norm(self.t - self.h, axis=1)
        r -= g.k_s * np.maximum(t_dist - p.rho_G, 0.0)
        r -= g.k_c * np.linalg.norm(u, axis=1)
        r -= g.k_h * (h_dist <= p.rho_G)
        return r

    def step(self, actions) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = self.p
        if self.action_mode == "discrete":
            u = np.stack([decode_discrete_action(int(a), p.v_max) for a in actions])
        else:
            u = np.clip(np.asarray(actions, dtype=float).reshape(self.b, 2),
                        -p.v_max, p.v_max)
        r = self.reward(u)
        self.ret += r

        acc = target_accelerations(self.t[:, None, :], self.v[:, None, :],
                                   self.h[:, None, :], p)[:, 0, :]
        noise = np.stack([rng.standard_normal(2) for rng in self.rngs])
        self.v += p.dt * acc + p.diffusion * np.sqrt(p.dt) * noise
        self.t += p.dt * self.v
        if p.beta > 0:
            u = u + herder_drifts(self.h[:, None, :], self.t[:, None, :], p)[:, 0, :]
        self.h += p.dt * u
        self.time += p.dt

        chi = (np.linalg.norm(self.t, axis=1) <= p.rho_G).astype(float)
        self.hold = _update_hold(self.hold, self.time, chi >= self.chi_star)
        done = _contained(self.hold, self.time, self.t_contain)
        done |= self.time >= self.t_max * (1 - 1e-12)
        for i in np.flatnonzero(done):
            self.completed_returns.append(float(self.ret[i]))
            if self.auto_reset:
                self._reset_slot(i)
        return self.obs(), r, done


class BatchSelectionEnv:
    """B parallel multi-herder target-selection episodes.

    Each decision step advances ``n_w`` integration steps with the frozen
    driving policy steering every herder toward its selected target. All
    herders receive the same global reward, evaluated at the decision
    boundary.
    """

    def __init__(self, params: SimParams, k_t: float, driving_fn, batch: int,
                 train_seed: int, n_w: int = 10, obs_scale: float | None = None,
                 driving_obs_mode: str = "ppo", t_max: float = 150.0,
                 t_contain: float = 10.0, chi_star: float = 0.99,
                 auto_reset: bool = True):
        self.p = params
        self.k_t = k_t
        self.driving_fn = driving_fn
        self.b = batch
        self.n_w = n_w
        self.obs_scale = obs_scale
        self.driving_obs_mode = driving_obs_mode
        self.t_max = t_max
        self.t_contain = t_contain
        self.chi_star = chi_star
        self.auto_reset = auto_reset
        self.seeder = _EpisodeSeeder(train_seed)
        self.n_agents = params.n_herders
        self.n_actions = params.n_targets
        self.obs_dim = 2 * (params.n_herders + params.n_targets)
        self.completed_returns: list[float] = []

    def reset_all(self) -> np.ndarray:
        b, p = self.b, self.p
        self.h = np.empty((b, p.n_herders, 2))
        self.t = np.empty((b, p.n_targets, 2))
        self.v = np.zeros((b, p.n_targets, 2))
        self.time = np.zeros(b)
        self.hold = np.full(b, np.nan)
        self.done_now = np.zeros(b, dtype=bool)
        self.ret = np.zeros(b)
        self.rngs = [None] * b
        for i in range(b):
            self._reset_slot(i)
        return self.obs()

    def _reset_slot(self, i: int):
        rng = episode_rng(self.seeder.next())
        self.rngs[i] = rng
        self.h[i] = uniform_disk(rng, self.p.n_herders, self.p.rho_0)
        self.t[i] = uniform_disk(rng, self.p.n_targets, self.p.rho_0)
        self.v[i] = 0.0
        self.time[i] = 0.0
        self.hold[i] = np.nan
        self.done_now[i] = False
        self.ret[i] = 0.0

    def obs(self) -> np.ndarray:
        b, n, m = self.b, self.p.n_herders, self.p.n_targets
        out = np.empty((b, n, self.obs_dim))
        flat_t = self.t.reshape(b, 2 * m)
        for j in range(n):
            others = np.delete(self.h, j, axis=1).reshape(b, 2 * (n - 1))
            out[:, j] = np.concatenate((self.h[:, j], others, flat_t), axis=1)
        if self.obs_scale:
            out /= self.obs_scale
        return out

    def reward(self) -> np.ndarray:
        dist = np.linalg.norm(self.t, axis=2)
        excess = np.maximum(dist - self.p.rho_G, 0.0)
        return -self.k_t * excess.sum(axis=1)

    def _driving_controls(self, selections, active) -> np.ndarray:
        b, n = self.b, self.p.n_herders
        sel_t = np.take_along_axis(self.t, selections[:, :, None].clip(min=0),
                                   axis=1)
        if self.driving_obs_mode == "dqn":
            obs = np.concatenate((sel_t, self.h), axis=2)
        else:
            obs = np.concatenate((sel_t, sel_t - self.h), axis=2) / self.p.rho_0
        u = self.driving_fn(obs.reshape(b * n, 4)).reshape(b, n, 2)
        u = np.clip(u, -self.p.v_max, self.p.v_max)
        u[~active] = 0.0
        return u

    def step(self, selections) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = self.p
        selections = np.asarray(selections, dtype=int).reshape(self.b, p.n_herders)
        alive = ~self.done_now
        for _ in range(self.n_w):
            if not alive.any():
                break
            u = self._driving_controls(selections, alive)
            acc = target_accelerations(self.t, self.v, self.h, p)
            noise = np.stack([
                self.rngs[i].standard_normal((p.n_targets, 2)) if alive[i]
                else np.zeros((p.n_targets, 2))
                for i in range(self.b)
            ])
            mask = alive[:, None, None]
            self.v += np.where(mask, p.dt * acc + p.diffusion * np.sqrt(p.dt) * noise, 0.0)
            self.t += np.where(mask, p.dt * self.v, 0.0)
            if p.beta > 0:
                u = u + herder_drifts(self.h, self.t, p)
                u[~alive] = 0.0
            self.h += np.where(mask, p.dt * u, 0.0)
            self.time[alive] += p.dt

            chi = (np.linalg.norm(self.t, axis=2) <= p.rho_G).mean(axis=1)
            new_hold = _update_hold(self.hold, self.time, chi >= self.chi_star)
            self.hold = np.where(alive, new_hold, self.hold)
            ended = _contained(self.hold, self.time, self.t_contain)
            ended |= self.time >= self.t_max * (1 - 1e-12)
            self.done_now |= ended & alive
            alive = ~self.done_now

        r = self.reward()
        self.ret += r
        done = self.done_now.copy()
        for i in np.flatnonzero(done):
            self.completed_returns.append(float(self.ret[i]))
            if self.auto_reset:
                self._reset_slot(i)
        return self.obs(), r, done
