"""Proximal policy optimization with a Gaussian actor for the driving task.

Rollouts are collected from several environment slots up to a fixed horizon,
advantages come from generalized advantage estimation, and updates use the
clipped surrogate objective with value and entropy terms. Gradients are
assembled by hand through the dense-network backward pass; log standard
deviations are free trainable parameters shared across states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dqn import TrainingDiverged
from .nets import AdamState, DenseNet, adam_step, backward, forward, init_orthogonal

PPO_HIDDEN = (64, 64, 64, 64, 64)
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PPOHyper:
    stepsize: float = 5e-4
    gamma: float = 0.98
    gae_lambda: float = 0.95
    clip: float = 0.2
    vf_coeff: float = 0.5
    entropy_coeff: float = 0.1
    epochs: int = 10
    horizon: int = 4096              # steps per actor between updates
    minibatch: int = 128
    actors: int = 8
    normalize_advantages: bool = True
    hidden: tuple[int, ...] = PPO_HIDDEN

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        if (self.horizon * self.actors) % self.minibatch != 0:
            raise ValueError("horizon * actors must be divisible by minibatch")


def gae(rewards, values, bootstrap_value, gamma, lambda_gae, dones=None):
    """Generalized advantage estimation over one collected sequence.

    `dones` marks terminal steps inside the sequence; the value beyond each
    terminal is zero and the recursion restarts there. Returns (advantages,
    returns) with returns = advantages + values.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape:
        raise ValueError("rewards and values must have equal length")
    alive = np.ones_like(r) if dones is None else 1.0 - np.asarray(dones, dtype=float)
    adv = np.empty_like(r)
    next_v = float(bootstrap_value)
    carry = 0.0
    for t in range(r.size - 1, -1, -1):
        delta = r[t] + gamma * next_v * alive[t] - v[t]
        carry = delta + gamma * lambda_gae * alive[t] * carry
        adv[t] = carry
        next_v = v[t]
    return adv, adv + v


@dataclass
class GaussianActor:
    """tanh-headed mean network with state-independent log stds; actions are
    emitted in normalized units and scaled by the control bound outside."""

    net: DenseNet
    log_std: np.ndarray

    def mean(self, obs) -> np.ndarray:
        return forward(self.net, obs)

    def sample(self, obs, rng: np.random.Generator):
        mu = self.mean(obs)
        std = np.exp(self.log_std)
        a = mu + std * rng.standard_normal(mu.shape)
        return a, self.log_prob_given_mean(mu, a)

    def log_prob_given_mean(self, mu, actions) -> np.ndarray:
        std = np.exp(self.log_std)
        z = (actions - mu) / std
        per_comp = -0.5 * z**2 - self.log_std - 0.5 * LOG_2PI
        return per_comp.sum(axis=-1)

    def entropy(self) -> float:
        return float(np.sum(self.log_std + 0.5 * (LOG_2PI + 1.0)))


def make_actor_critic(obs_dim: int, act_dim: int, hidden, seed: int,
                      head: str = "tanh"):
    rng = np.random.default_rng(seed)
    actor_net = init_orthogonal([obs_dim, *hidden, act_dim], rng, head=head,
                                out_gain=0.01)
    critic = init_orthogonal([obs_dim, *hidden, 1], rng, head="linear",
                             out_gain=1.0)
    return actor_net, critic


class PPOTrainer:
    """Collect-then-update PPO over a batch driving environment."""

    def __init__(self, env, hyper: PPOHyper, seed: int):
        if env.b != hyper.actors:
            raise ValueError("environment batch size must equal the actor count")
        self.env = env
        self.h = hyper
        actor_net, critic = make_actor_critic(env.obs_dim, 2, hyper.hidden, seed)
        self.actor = GaussianActor(actor_net, np.zeros(2))
        self.critic = critic
        self.params = self.actor.net.params + [self.actor.log_std] + self.critic.params
        self.adam = AdamState.for_params(self.params)
        self.rng = np.random.default_rng(seed + 1)
        self.v_max = env.p.v_max
        self.curve: list[float] = []

    def collect(self, obs):
        """Roll every actor forward `horizon` steps; returns flat arrays."""
        h, env = self.h, self.env
        b, t = env.b, h.horizon
        o = np.empty((t, b, env.obs_dim))
        a = np.empty((t, b, 2))
        logp = np.empty((t, b))
        rew = np.empty((t, b))
        val = np.empty((t, b))
        done = np.empty((t, b), dtype=bool)
        for k in range(t):
            o[k] = obs
            actions, lp = self.actor.sample(obs, self.rng)
            a[k] = actions
            logp[k] = lp
            val[k] = forward(self.critic, obs)[:, 0]
            obs, r, d = env.step(np.clip(actions * self.v_max, -self.v_max,
                                         self.v_max))
            rew[k] = r
            done[k] = d
        bootstrap = forward(self.critic, obs)[:, 0]
        adv = np.empty((t, b))
        ret = np.empty((t, b))
        for i in range(b):
            adv[:, i], ret[:, i] = gae(rew[:, i], val[:, i], bootstrap[i],
                                       self.h.gamma, self.h.gae_lambda,
                                       dones=done[:, i])
        flat = lambda x: x.reshape(t * b, *x.shape[2:])  # noqa: E731
        return obs, (flat(o), flat(a), flat(logp), flat(adv), flat(ret))

    def update(self, batch):
        h = self.h
        obs, actions, logp_old, adv, ret = batch
        if h.normalize_advantages:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        n = obs.shape[0]
        for _ in range(h.epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, h.minibatch):
                idx = order[start:start + h.minibatch]
                self._minibatch_step(obs[idx], actions[idx], logp_old[idx],
                                     adv[idx], ret[idx])

    def _minibatch_step(self, obs, actions, logp_old, adv, ret):
        h = self.h
        m = obs.shape[0]
        std = np.exp(self.actor.log_std)

        mu = forward(self.actor.net, obs)
        z = (actions - mu) / std
        logp = (-0.5 * z**2 - self.actor.log_std - 0.5 * LOG_2PI).sum(axis=1)
        ratio = np.exp(logp - logp_old)
        if not np.isfinite(ratio).all():
            raise TrainingDiverged("non-finite likelihood ratio")

        unclipped = ratio * adv
        clipped = np.clip(ratio, 1 - h.clip, 1 + h.clip) * adv
        use_unclipped = unclipped <= clipped
        in_band = (ratio > 1 - h.clip) & (ratio < 1 + h.clip)
        active = np.where(use_unclipped, 1.0, in_band.astype(float))
        # d(-surrogate)/d(logp), averaged over the minibatch
        dlogp = -(active * ratio * adv) / m

        # chain into the mean head and the log-std parameters
        dmu = dlogp[:, None] * z / std
        dlogstd = (dlogp[:, None] * (z**2 - 1.0)).sum(axis=0)
        dlogstd -= h.entropy_coeff  # entropy bonus: dH/dlogstd = 1 per dim
        actor_grads = backward(self.actor.net, dmu)

        v = forward(self.critic, obs)[:, 0]
        dv = h.vf_coeff * 2.0 * (v - ret) / m
        critic_grads = backward(self.critic, dv[:, None])

        grads = actor_grads + [dlogstd] + critic_grads
        adam_step(self.params, grads, self.adam, h.stepsize)

    def train(self, episodes: int, progress=None):
        obs = self.env.reset_all()
        while len(self.env.completed_returns) < episodes:
            obs, batch = self.collect(obs)
            self.update(batch)
            if progress is not None:
                progress(len(self.env.completed_returns))
        return np.array(self.env.completed_returns[:episodes])


def ppo_train(env, hyper: PPOHyper, episodes: int, seed: int, progress=None):
    """Train a Gaussian driving actor; returns (actor, critic, curve)."""
    trainer = PPOTrainer(env, hyper, seed)
    curve = trainer.train(episodes, progress)
    return trainer.actor, trainer.critic, curve
