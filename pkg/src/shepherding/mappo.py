"""Parameter-shared multi-agent PPO for the target-selection layer.

One softmax actor and one critic are shared by every herder; rollouts from
all herders across all environment slots are pooled and updates run on the
full collected batch (no minibatching), with entropy regularization
disabled. Training samples from the softmax; deployment takes the argmax.
"""

from __future__ import annotations

import numpy as np

from .dqn import TrainingDiverged
from .nets import AdamState, adam_step, backward, forward
from .ppo import PPOHyper, gae, make_actor_critic

MAPPO_HIDDEN = (256, 128)


def mappo_hyper(**kw) -> PPOHyper:
    base = dict(entropy_coeff=0.0, horizon=32, minibatch=1024, actors=32,
                hidden=MAPPO_HIDDEN)
    base.update(kw)
    return PPOHyper(**base)


class MAPPOTrainer:
    """Centralized training, decentralized execution: herders share one
    actor-critic and pool their experience; each acts on its own view."""

    def __init__(self, env, hyper: PPOHyper, seed: int):
        if env.b != hyper.actors:
            raise ValueError("environment batch size must equal the actor count")
        self.env = env
        self.h = hyper
        self.actor, self.critic = make_actor_critic(
            env.obs_dim, env.n_actions, hyper.hidden, seed, head="softmax")
        self.params = self.actor.params + self.critic.params
        self.adam = AdamState.for_params(self.params)
        self.rng = np.random.default_rng(seed + 1)
        self.n_agents = env.n_agents

    def _sample(self, probs: np.ndarray) -> np.ndarray:
        cdf = probs.cumsum(axis=-1)
        u = self.rng.random(probs.shape[:-1] + (1,))
        return (u > cdf).sum(axis=-1).clip(max=probs.shape[-1] - 1)

    def collect(self, obs):
        h, env = self.h, self.env
        b, n, t = env.b, self.n_agents, h.horizon
        o = np.empty((t, b, n, env.obs_dim))
        a = np.empty((t, b, n), dtype=int)
        logp = np.empty((t, b, n))
        rew = np.empty((t, b))
        val = np.empty((t, b, n))
        done = np.empty((t, b), dtype=bool)
        for k in range(t):
            o[k] = obs
            flat = obs.reshape(b * n, env.obs_dim)
            probs = forward(self.actor, flat)
            actions = self._sample(probs).reshape(b, n)
            a[k] = actions
            pa = probs[np.arange(b * n), actions.ravel()]
            logp[k] = np.log(np.maximum(pa, 1e-300)).reshape(b, n)
            val[k] = forward(self.critic, flat)[:, 0].reshape(b, n)
            obs, r, d = env.step(actions)
            rew[k] = r
            done[k] = d
        bootstrap = forward(self.critic,
                            obs.reshape(b * n, env.obs_dim))[:, 0].reshape(b, n)
        adv = np.empty((t, b, n))
        ret = np.empty((t, b, n))
        for i in range(b):
            for j in range(n):
                adv[:, i, j], ret[:, i, j] = gae(
                    rew[:, i], val[:, i, j], bootstrap[i, j],
                    h.gamma, h.gae_lambda, dones=done[:, i])
        m = t * b * n
        batch = (o.reshape(m, env.obs_dim), a.reshape(m), logp.reshape(m),
                 adv.reshape(m), ret.reshape(m))
        return obs, batch

    def update(self, batch):
        h = self.h
        obs, actions, logp_old, adv, ret = batch
        if h.normalize_advantages:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        m = obs.shape[0]
        idx = np.arange(m)
        for _ in range(h.epochs):
            probs = forward(self.actor, obs)
            pa = probs[idx, actions]
            logp = np.log(np.maximum(pa, 1e-300))
            ratio = np.exp(logp - logp_old)
            if not np.isfinite(ratio).all():
                raise TrainingDiverged("non-finite likelihood ratio")
            unclipped = ratio * adv
            clipped = np.clip(ratio, 1 - h.clip, 1 + h.clip) * adv
            use_unclipped = unclipped <= clipped
            in_band = (ratio > 1 - h.clip) & (ratio < 1 + h.clip)
            active = np.where(use_unclipped, 1.0, in_band.astype(float))
            dlogp = -(active * ratio * adv) / m
            # dlogp/dp_a = 1/p_a; softmax backward lives in the net head
            dprobs = np.zeros_like(probs)
            dprobs[idx, actions] = dlogp / np.maximum(pa, 1e-300)
            if h.entropy_coeff:
                # H = -sum p log p; d(-cH)/dp = c (log p + 1)
                safe = np.maximum(probs, 1e-300)
                dprobs += h.entropy_coeff * (np.log(safe) + 1.0) / m
            actor_grads = backward(self.actor, dprobs)

            v = forward(self.critic, obs)[:, 0]
            dv = h.vf_coeff * 2.0 * (v - ret) / m
            critic_grads = backward(self.critic, dv[:, None])
            adam_step(self.params, actor_grads + critic_grads, self.adam,
                      h.stepsize)

    def train(self, episodes: int, progress=None):
        obs = self.env.reset_all()
        while len(self.env.completed_returns) < episodes:
            obs, batch = self.collect(obs)
            self.update(batch)
            if progress is not None:
                progress(len(self.env.completed_returns))
        return np.array(self.env.completed_returns[:episodes])


def mappo_train(env, hyper: PPOHyper, episodes: int, seed: int, progress=None):
    """Train the shared selection actor-critic; returns (actor, critic, curve)."""
    trainer = MAPPOTrainer(env, hyper, seed)
    curve = trainer.train(episodes, progress)
    return trainer.actor, trainer.critic, curve
