"""Small fully-connected networks with hand-written backpropagation.

Everything is float64 numpy. Layers are stored as (W, b) pairs with W of
shape (fan_in, fan_out); forward passes cache pre-activations so the
backward pass can be driven either from a loss on the output or from an
upstream gradient (needed for the deterministic policy gradient, where the
critic supplies d(loss)/d(action)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIRECTION_FALLBACK = np.array([1.0, 0.0, 0.0])
_NORM_EPS = 1e-12


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class MLP:
    """Plain feed-forward net: ReLU hidden layers, linear output."""

    def __init__(self, widths, rng: np.random.Generator):
        if len(widths) < 2:
            raise ValueError("MLP needs at least input and output widths")
        self.widths = list(int(w) for w in widths)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            # He initialization for the ReLU trunk
            scale = math.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray):
        """Returns (output, cache). x has shape (batch, widths[0])."""
        acts = [x]
        h = x
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = relu(z) if i < n - 1 else z
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Backprop an upstream gradient; returns (param_grads, grad_input).

        param_grads is ordered like .params (W0, b0, W1, b1, ...).
        """
        n = len(self.weights)
        grads_w = [None] * n
        grads_b = [None] * n
        g = grad_out
        for i in range(n - 1, -1, -1):
            if i < n - 1:
                g = g * (cache[i + 1] > 0.0)  # ReLU mask from stored activation
            grads_w[i] = cache[i].T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.append(gw)
            out.append(gb)
        return out, g


@dataclass
class ActorOutput:
    direction: np.ndarray  # (batch, 3), unit rows
    scale: np.ndarray  # (batch, 1) in [0, 1]


class Actor:
    """Two-headed policy net: shared ReLU trunk, direction and scale heads.

    The direction head normalizes its raw 3-vector onto the unit sphere
    (falling back to a fixed unit vector when the raw norm underflows);
    the scale head squashes through a sigmoid into [0, 1].
    """

    def __init__(self, state_dim: int, hidden, rng: np.random.Generator):
        self.trunk = MLP([state_dim, *hidden], rng)
        last = hidden[-1]
        scale = math.sqrt(1.0 / last)
        self.w_dir = rng.normal(0.0, scale, size=(last, 3))
        self.b_dir = np.zeros(3)
        self.w_scale = rng.normal(0.0, scale, size=(last, 1))
        self.b_scale = np.zeros(1)

    @property
    def params(self):
        return [*self.trunk.params, self.w_dir, self.b_dir, self.w_scale, self.b_scale]

    def forward(self, s: np.ndarray):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        if not np.all(np.isfinite(s)):
            raise ValueError("actor input must be finite")
        feat, trunk_cache = self.trunk.forward(s)
        feat = relu(feat)
        raw = feat @ self.w_dir + self.b_dir
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        degenerate = norms[:, 0] < _NORM_EPS
        safe = np.where(norms < _NORM_EPS, 1.0, norms)
        direction = raw / safe
        direction[degenerate] = DIRECTION_FALLBACK
        z_scale = feat @ self.w_scale + self.b_scale
        scale = sigmoid(z_scale)
        cache = (trunk_cache, feat, raw, norms, degenerate, direction, scale)
        return ActorOutput(direction=direction, scale=scale), cache

    def __call__(self, s):
        return self.forward(s)[0]

    def action(self, s, eta: float) -> np.ndarray:
        """Deterministic action a = direction * scale * eta, shape (batch, 3)."""
        out = self(s)
        return out.direction * out.scale * eta

    def backward_action(self, cache, grad_action: np.ndarray, eta: float):
        """Backprop d(loss)/d(action) through a = dir * scale * eta.

        Returns parameter gradients ordered like .params.
        """
        trunk_cache, feat, raw, norms, degenerate, direction, scale = cache
        g_dir = grad_action * scale * eta
        g_scale = (grad_action * direction).sum(axis=1, keepdims=True) * eta

        # unit-normalization jacobian: (I - u u^T) / |raw|
        dot = (g_dir * direction).sum(axis=1, keepdims=True)
        safe = np.where(norms < _NORM_EPS, 1.0, norms)
        g_raw = (g_dir - direction * dot) / safe
        g_raw[degenerate] = 0.0

        g_z_scale = g_scale * scale * (1.0 - scale)

        gw_dir = feat.T @ g_raw
        gb_dir = g_raw.sum(axis=0)
        gw_scale = feat.T @ g_z_scale
        gb_scale = g_z_scale.sum(axis=0)

        g_feat = g_raw @ self.w_dir.T + g_z_scale @ self.w_scale.T
        g_feat = g_feat * (feat > 0.0)
        trunk_grads, _ = self.trunk.backward(trunk_cache, g_feat)
        return [*trunk_grads, gw_dir, gb_dir, gw_scale, gb_scale]


class Critic:
    """Q-network: (state, action) -> scalar."""

    def __init__(self, state_dim: int, action_dim: int, hidden, rng: np.random.Generator):
        self.net = MLP([state_dim + action_dim, *hidden, 1], rng)
        self.action_dim = action_dim

    @property
    def params(self):
        return self.net.params

    def forward(self, s: np.ndarray, a: np.ndarray):
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)
        return self.net.forward(x)

    def __call__(self, s, a):
        return self.forward(s, a)[0]

    def backward(self, cache, grad_q: np.ndarray):
        """Returns (param_grads, grad_state, grad_action)."""
        grads, g_in = self.net.backward(cache, grad_q)
        return grads, g_in[:, : -self.action_dim], g_in[:, -self.action_dim:]


class Adam:
    """Adam optimizer over a fixed list of parameter arrays (updated in place)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self._buf = [np.empty_like(p) for p in self.params]  # scratch, avoids temporaries
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v, buf in zip(self.params, grads, self.m, self.v, self._buf):
            m *= self.beta1
            np.multiply(g, 1.0 - self.beta1, out=buf)
            m += buf
            v *= self.beta2
            np.multiply(g, g, out=buf)
            buf *= 1.0 - self.beta2
            v += buf
            np.divide(v, b2t, out=buf)
            np.sqrt(buf, out=buf)
            buf += self.eps
            np.divide(m, buf, out=buf)
            buf *= self.lr / b1t
            p -= buf

    def state(self):
        return {"m": [x.copy() for x in self.m], "v": [x.copy() for x in self.v], "t": self.t}

    def load_state(self, state):
        for dst, src in zip(self.m, state["m"]):
            dst[...] = src
        for dst, src in zip(self.v, state["v"]):
            dst[...] = src
        self.t = int(state["t"])


def gradient_check(loss_and_grads, params, rng: np.random.Generator,
                   n_samples: int = 30, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_and_grads() recomputes the scalar loss and its analytic parameter
    gradients from the current (in-place mutable) params. A random sample of
    n_samples scalar entries per parameter array is probed.
    """
    _, grads = loss_and_grads()
    worst = 0.0
    for p, g in zip(params, grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        k = min(n_samples, flat_p.size)
        idx = rng.choice(flat_p.size, size=k, replace=False)
        for i in idx:
            orig = flat_p[i]
            flat_p[i] = orig + eps
            lo_hi, _ = loss_and_grads()
            flat_p[i] = orig - eps
            lo_lo, _ = loss_and_grads()
            flat_p[i] = orig
            fd = (lo_hi - lo_lo) / (2.0 * eps)
            denom = max(abs(fd), abs(flat_g[i]), 1e-8)
            worst = max(worst, abs(fd - flat_g[i]) / denom)
    return worst
