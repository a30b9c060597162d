"""TD3 learner: twin critics, target policy smoothing, delayed actor updates.

Self-contained on top of networks.py; no autograd framework. All updates
are deterministic given the RNG stream, so fixed seed + fixed data yields
bit-identical parameters in single-threaded mode.
"""

from __future__ import annotations

import copy
import pickle
from dataclasses import dataclass, asdict

import numpy as np

from .networks import Actor, Adam, Critic

STATE_DIM = 6
ACTION_DIM = 3
HIDDEN = (400, 300)

CHECKPOINT_VERSION = 1


@dataclass
class TD3Config:
    gamma: float = 0.99
    batch_size: int = 100
    learning_rate: float = 0.001
    polyak: float = 0.995
    noise_clip: float = 1.0          # clip for target smoothing noise, in units of eta
    policy_delay: int = 2
    target_noise_sigma: float = 0.2  # std of target smoothing noise, in units of eta
    exploration_noise_sigma: float = 0.1  # per-axis exploration std, in units of eta
    eta: float = 0.02                # max force magnitude (N)
    capacity: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0,1), got {self.gamma}")
        if not 0.0 < self.polyak <= 1.0:
            raise ValueError(f"polyak must be in (0,1], got {self.polyak}")
        if not self.eta > 0.0:
            raise ValueError(f"eta must be > 0, got {self.eta}")


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


class ReplayBuffer:
    """Bounded ring buffer with uniform sampling over occupied slots."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM, action_dim: int = ACTION_DIM):
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, state_dim))
        self.a = np.zeros((self.capacity, action_dim))
        self.r = np.zeros(self.capacity)
        self.s_next = np.zeros((self.capacity, state_dim))
        self.done = np.zeros(self.capacity)
        self.ptr = 0
        self.size = 0

    def add(self, s, a, r, s_next, done):
        i = self.ptr
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.done[i] = float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add_transition(self, t: Transition):
        self.add(t.s, t.a, t.r, t.s_next, t.done)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size < batch_size:
            raise ValueError(f"buffer has {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx])


def clip_action_norm(a: np.ndarray, eta: float) -> np.ndarray:
    """Rescale rows of a so that each has norm <= eta."""
    a = np.atleast_2d(a)
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    factor = np.where(norms > eta, eta / np.where(norms == 0.0, 1.0, norms), 1.0)
    return a * factor


class TD3Learner:
    def __init__(self, config: TD3Config, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.actor = Actor(STATE_DIM, HIDDEN, rng)
        self.critic1 = Critic(STATE_DIM, ACTION_DIM, HIDDEN, rng)
        self.critic2 = Critic(STATE_DIM, ACTION_DIM, HIDDEN, rng)
        self.actor_target = copy.deepcopy(self.actor)
        self.critic1_target = copy.deepcopy(self.critic1)
        self.critic2_target = copy.deepcopy(self.critic2)
        lr = config.learning_rate
        self.actor_opt = Adam(self.actor.params, lr=lr)
        self.critic1_opt = Adam(self.critic1.params, lr=lr)
        self.critic2_opt = Adam(self.critic2.params, lr=lr)
        self.buffer = ReplayBuffer(config.capacity)
        self.total_updates = 0

    def select_action(self, s, noise_sigma: float | None = None) -> np.ndarray:
        """Policy action with optional exploration noise; norm clipped to eta.

        s may be a single 6-vector or a (batch, 6) array; the result matches.
        """
        cfg = self.config
        if noise_sigma is None:
            noise_sigma = cfg.exploration_noise_sigma
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        single = np.asarray(s).ndim == 1
        a = self.actor.action(np.atleast_2d(s), cfg.eta)
        if noise_sigma > 0:
            a = a + self.rng.normal(0.0, noise_sigma * cfg.eta, size=a.shape)
        a = clip_action_norm(a, cfg.eta)
        return a[0] if single else a

    def compute_targets(self, r, s_next, done) -> np.ndarray:
        """Bootstrap targets: r + gamma*(1-done)*min(Q1', Q2') at the smoothed
        target action."""
        cfg = self.config
        a_next = self.actor_target.action(s_next, cfg.eta)
        noise = self.rng.normal(0.0, cfg.target_noise_sigma * cfg.eta, size=a_next.shape)
        noise = np.clip(noise, -cfg.noise_clip * cfg.eta, cfg.noise_clip * cfg.eta)
        a_next = clip_action_norm(a_next + noise, cfg.eta)
        q1_t = self.critic1_target(s_next, a_next)[:, 0]
        q2_t = self.critic2_target(s_next, a_next)[:, 0]
        return r + cfg.gamma * (1.0 - done) * np.minimum(q1_t, q2_t)

    def update(self, batch=None):
        """One TD3 update step; returns dict of scalar losses."""
        cfg = self.config
        if batch is None:
            if self.buffer.size < cfg.batch_size:
                raise ValueError("not enough transitions in the replay buffer")
            batch = self.buffer.sample(cfg.batch_size, self.rng)
        s, a, r, s_next, done = batch
        n = len(r)
        target = self.compute_targets(r, s_next, done)[:, None]

        losses = {}
        for name, critic, opt in (("critic1_loss", self.critic1, self.critic1_opt),
                                  ("critic2_loss", self.critic2, self.critic2_opt)):
            q, cache = critic.forward(s, a)
            err = q - target
            losses[name] = float(np.mean(err ** 2))
            grads, _, _ = critic.backward(cache, 2.0 * err / n)
            opt.step(grads)

        self.total_updates += 1
        if self.total_updates % cfg.policy_delay == 0:
            out, cache = self.actor.forward(s)
            a_pi = out.direction * out.scale * cfg.eta
            q, q_cache = self.critic1.forward(s, a_pi)
            losses["actor_loss"] = float(-np.mean(q))
            _, _, g_action = self.critic1.backward(q_cache, np.full_like(q, -1.0 / n))
            actor_grads = self.actor.backward_action(cache, g_action, cfg.eta)
            self.actor_opt.step(actor_grads)
            self._polyak_all()
        return losses

    def _polyak_all(self):
        p = self.config.polyak
        for net, tgt in ((self.actor, self.actor_target),
                         (self.critic1, self.critic1_target),
                         (self.critic2, self.critic2_target)):
            for w, wt in zip(net.params, tgt.params):
                wt *= p
                wt += (1.0 - p) * w

    # ---- checkpointing -------------------------------------------------

    def save(self, path):
        blob = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "total_updates": self.total_updates,
            "rng_state": self.rng.bit_generator.state,
            "params": {
                "actor": [p.copy() for p in self.actor.params],
                "critic1": [p.copy() for p in self.critic1.params],
                "critic2": [p.copy() for p in self.critic2.params],
                "actor_target": [p.copy() for p in self.actor_target.params],
                "critic1_target": [p.copy() for p in self.critic1_target.params],
                "critic2_target": [p.copy() for p in self.critic2_target.params],
            },
            "optim": {
                "actor": self.actor_opt.state(),
                "critic1": self.critic1_opt.state(),
                "critic2": self.critic2_opt.state(),
            },
        }
        with open(path, "wb") as f:
            pickle.dump(blob, f, protocol=4)

    @classmethod
    def load(cls, path) -> "TD3Learner":
        with open(path, "rb") as f:
            blob = pickle.load(f)
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
        config = TD3Config(**blob["config"])
        learner = cls(config, np.random.default_rng(0))
        learner.rng.bit_generator.state = blob["rng_state"]
        learner.total_updates = int(blob["total_updates"])
        for key, net in (("actor", learner.actor), ("critic1", learner.critic1),
                         ("critic2", learner.critic2), ("actor_target", learner.actor_target),
                         ("critic1_target", learner.critic1_target),
                         ("critic2_target", learner.critic2_target)):
            for dst, src in zip(net.params, blob["params"][key]):
                dst[...] = src
        learner.actor_opt.load_state(blob["optim"]["actor"])
        learner.critic1_opt.load_state(blob["optim"]["critic1"])
        learner.critic2_opt.load_state(blob["optim"]["critic2"])
        return learner
