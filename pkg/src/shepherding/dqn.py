"""Deep Q-learning with uniform replay, a periodically copied target
network, and epsilon-greedy exploration.

The same loop trains the single-herder driving policy and, through parameter
sharing over a replay buffer that all herders contribute to, the multi-agent
target-selection policy: the environment reports an (agents, obs) block per
step and every agent's transition lands in the shared buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import AdamState, DenseNet, adam_step, backward, forward, init_uniform_fanin

DRIVING_DQN_HIDDEN = (256, 128)
SELECTION_DQN_HIDDEN = (512, 256)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class DQNHyper:
    stepsize: float = 5e-5
    gamma: float = 0.99
    eps0: float = 1.0
    eps_min: float = 0.05
    eps_decay: float = 1e-3
    eps_decay_kind: str = "exp"      # "exp" or "linear", per episode
    target_period: int = 10_000      # learner steps between target syncs
    minibatch: int = 64
    replay_capacity: int = 500_000
    warmup: int = 1_000              # transitions before learning starts
    update_every: int = 2            # env steps between learner steps
    hidden: tuple[int, ...] = DRIVING_DQN_HIDDEN
    huber: bool = False              # squared TD loss by default

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.eps_min > self.eps0:
            raise ValueError("eps_min must not exceed eps0")
        if self.target_period < 1:
            raise ValueError("target_period must be >= 1")

    @classmethod
    def selection(cls, **kw) -> "DQNHyper":
        base = dict(stepsize=1e-4, eps_decay=5e-5, target_period=1_000,
                    hidden=SELECTION_DQN_HIDDEN)
        base.update(kw)
        return cls(**base)


def epsilon_schedule(episode: int, eps0: float, eps_min: float, decay: float,
                     kind: str = "exp") -> float:
    """Per-episode exploration rate; exponential by default."""
    if decay <= 0:
        raise ValueError("decay must be > 0")
    if kind == "linear":
        return max(eps_min, eps0 - decay * episode)
    return max(eps_min, eps0 * np.exp(-decay * episode))


@dataclass
class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling."""

    capacity: int
    obs_dim: int
    _size: int = 0
    _pos: int = 0

    def __post_init__(self):
        self.obs = np.empty((self.capacity, self.obs_dim))
        self.actions = np.empty(self.capacity, dtype=np.int64)
        self.rewards = np.empty(self.capacity)
        self.next_obs = np.empty((self.capacity, self.obs_dim))
        self.terminal = np.empty(self.capacity, dtype=bool)

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward, next_obs, terminal):
        i = self._pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminal[i] = terminal
        self._pos = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int):
        idx = rng.integers(0, self._size, size=batch)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.terminal[idx])


@dataclass
class DQNTrainer:
    """Stepwise DQN learner; `train` drives it for a full episode budget."""

    env: object                     # reset_all() -> (A, obs) block; step((A,)) -> ...
    hyper: DQNHyper
    seed: int
    net: DenseNet = field(init=False)
    target: DenseNet = field(init=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        sizes = [self.env.obs_dim, *self.hyper.hidden, self.env.n_actions]
        self.net = init_uniform_fanin(sizes, rng)
        self.target = self.net.copy()
        self.adam = AdamState.for_params(self.net.params)
        self.buffer = ReplayBuffer(self.hyper.replay_capacity, self.env.obs_dim)
        self.rng = rng
        self.env_steps = 0
        self.learn_steps = 0

    def act(self, obs_block: np.ndarray, eps: float) -> np.ndarray:
        """Epsilon-greedy actions for every parameter-sharing agent."""
        q = forward(self.net, obs_block)
        greedy = np.argmax(q, axis=1)
        explore = self.rng.random(obs_block.shape[0]) < eps
        random_actions = self.rng.integers(0, self.env.n_actions,
                                           size=obs_block.shape[0])
        return np.where(explore, random_actions, greedy)

    def learn_step(self):
        h = self.hyper
        obs, actions, rewards, next_obs, terminal = self.buffer.sample(
            self.rng, h.minibatch)
        q_next = forward(self.target, next_obs).max(axis=1)
        targets = rewards + h.gamma * q_next * ~terminal
        q = forward(self.net, obs)
        idx = np.arange(h.minibatch)
        td = q[idx, actions] - targets
        if not np.isfinite(td).all():
            raise TrainingDiverged("non-finite temporal-difference error")
        grad_q = np.zeros_like(q)
        if h.huber:
            grad_q[idx, actions] = np.clip(td, -1.0, 1.0) / h.minibatch
        else:
            grad_q[idx, actions] = 2.0 * td / h.minibatch
        grads = backward(self.net, grad_q)
        adam_step(self.net.params, grads, self.adam, h.stepsize)
        self.learn_steps += 1
        if self.learn_steps % h.target_period == 0:
            self.target.set_from(self.net)

    def run_episode(self, episode_index: int) -> float:
        """One full episode of acting plus interleaved learner steps.

        The environment may expose extra leading dimensions (batch slot,
        parameter-sharing agents); every agent's transition goes into the
        shared buffer with the shared reward and done flag.
        """
        h = self.hyper
        eps = epsilon_schedule(episode_index, h.eps0, h.eps_min, h.eps_decay,
                               h.eps_decay_kind)
        raw = self.env.reset_all()
        lead_shape = raw.shape[:-1]
        obs = raw.reshape(-1, self.env.obs_dim)
        agents = obs.shape[0]
        done = False
        while not done:
            actions = self.act(obs, eps)
            raw_next, reward, done_flags = self.env.step(
                actions.reshape(lead_shape))
            next_obs = raw_next.reshape(-1, self.env.obs_dim)
            done = bool(np.asarray(done_flags).ravel()[0])
            rewards = np.broadcast_to(np.asarray(reward, dtype=float).ravel(),
                                      (agents,))
            for a in range(agents):
                self.buffer.add(obs[a], actions[a], rewards[a],
                                next_obs[a], done)
            obs = next_obs
            self.env_steps += 1
            if len(self.buffer) >= max(h.warmup, h.minibatch) and \
                    self.env_steps % h.update_every == 0:
                self.learn_step()
        return self.env.completed_returns.pop()


def dqn_train(env, hyper: DQNHyper, episodes: int, seed: int,
              progress=None) -> tuple[DenseNet, np.ndarray]:
    """Train on `env` for the episode budget; returns the greedy Q-network
    and the per-episode cumulative rewards."""
    trainer = DQNTrainer(env, hyper, seed)
    curve = np.empty(episodes)
    for ep in range(episodes):
        curve[ep] = trainer.run_episode(ep)
        if progress is not None:
            progress(ep, curve[ep])
    return trainer.net, curve
