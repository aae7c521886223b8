"""Dense feed-forward networks with hand-derived reverse-mode gradients.

ReLU hidden layers with a linear, tanh, or softmax output head cover every
architecture used by the training algorithms. Gradients are exact and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HEADS = ("linear", "tanh", "softmax")


@dataclass
class DenseNet:
    sizes: list[int]
    weights: list[np.ndarray]        # (out, in) per layer
    biases: list[np.ndarray]         # (out,) per layer
    head: str = "linear"
    _cache: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[l + 1], self.sizes[l]) or b.shape != (self.sizes[l + 1],):
                raise ValueError("parameter shapes do not match layer sizes")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite parameters")

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(list(self.sizes), [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.head)

    def set_from(self, other: "DenseNet"):
        for dst, src in zip(self.params, other.params):
            dst[...] = src


def init_uniform_fanin(sizes, rng: np.random.Generator, head="linear") -> DenseNet:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases (Q-networks)."""
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(rng.uniform(-bound, bound, size=fan_out))
    return DenseNet(list(sizes), ws, bs, head)


def init_orthogonal(sizes, rng: np.random.Generator, head="linear",
                    out_gain: float = 1.0) -> DenseNet:
    """Orthogonal weights, sqrt(2) gain on hidden layers, zero biases
    (actor/critic networks)."""
    ws, bs = [], []
    n_layers = len(sizes) - 1
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        a = rng.standard_normal((max(fan_out, fan_in), min(fan_out, fan_in)))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        if fan_out < fan_in:
            q = q.T
        gain = out_gain if l == n_layers - 1 else np.sqrt(2.0)
        ws.append(gain * q)
        bs.append(np.zeros(fan_out))
    return DenseNet(list(sizes), ws, bs, head)


def _apply_head(z: np.ndarray, head: str) -> np.ndarray:
    if head == "linear":
        return z
    if head == "tanh":
        return np.tanh(z)
    zs = z - z.max(axis=-1, keepdims=True)
    e = np.exp(zs)
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: DenseNet, x) -> np.ndarray:
    """Run the network on one input or a batch; caches activations for
    backward()."""
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != net.sizes[0]:
        raise ValueError(f"input size {a.shape[-1]} != layer size {net.sizes[0]}")
    acts = [a]
    pre = []
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if l < len(net.weights) - 1 else z
        acts.append(a)
    y = _apply_head(acts[-1], net.head)
    net._cache = (acts, pre, y)
    return y


def backward(net: DenseNet, grad_output) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter, given dL/d(output).

    Requires a cached forward pass on the same batch; returns gradients in
    the order of net.params (W0, b0, W1, b1, ...).
    """
    if net._cache is None:
        raise RuntimeError("no cached forward pass; call forward() first")
    acts, pre, y = net._cache
    g = np.asarray(grad_output, dtype=float)
    if g.shape != y.shape:
        raise RuntimeError("stale cache: gradient shape does not match the "
                           "last forward output")
    if net.head == "tanh":
        g = g * (1.0 - y**2)
    elif net.head == "softmax":
        g = y * (g - (g * y).sum(axis=-1, keepdims=True))
    single = g.ndim == 1
    if single:
        g = g[None, :]
    grads = []
    dz = g
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[l] if not single else acts[l][None, :]
        grads.append(dz.sum(axis=0))          # db
        grads.append(dz.T @ a_prev)           # dW
        if l > 0:
            z_prev = pre[l - 1] if not single else pre[l - 1][None, :]
            dz = (dz @ net.weights[l]) * (z_prev > 0)
    grads.reverse()
    # reverse() yields [dW0, db0, ...] pairs already ordered per layer
    return grads


class AdamState:
    """First/second moment accumulators, stored flat so one update touches
    two contiguous vectors instead of many small arrays."""

    def __init__(self, shapes: list[tuple]):
        self.shapes = list(shapes)
        self.sizes = [int(np.prod(s)) if s else 1 for s in self.shapes]
        self.offsets = np.concatenate(([0], np.cumsum(self.sizes)))
        total = int(self.offsets[-1])
        self.m = np.zeros(total)
        self.v = np.zeros(total)
        self.t = 0
        self._g = np.empty(total)    # scratch, reused across steps
        self._tmp = np.empty(total)

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([p.shape for p in params])

    def flatten(self, arrays) -> np.ndarray:
        for a, start, size in zip(arrays, self.offsets, self.sizes):
            self._g[start:start + size] = np.ravel(a)
        return self._g


def adam_step(params, grads, state: AdamState, stepsize: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place; returns the params."""
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError("gradient shape mismatch")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    g = state.flatten(grads)
    m, v, tmp = state.m, state.v, state._tmp
    m *= beta1
    np.multiply(g, 1.0 - beta1, out=tmp)
    m += tmp
    v *= beta2
    np.multiply(g, g, out=g)
    g *= 1.0 - beta2
    v += g
    np.divide(v, c2, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += eps
    tmp *= c1
    np.divide(m, tmp, out=tmp)
    tmp *= stepsize
    for p, start, size in zip(params, state.offsets, state.sizes):
        p -= tmp[start:start + size].reshape(p.shape)
    return params
