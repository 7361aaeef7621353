"""A small numpy MLP with manual backprop and an Adam optimizer."""
from __future__ import annotations

import json

import numpy as np

CHECKPOINT_VERSION = 1


class MLP:
    """ReLU multilayer perceptron, linear output layer. float64 throughout."""

    def __init__(self, sizes, rng=None, zero_head=False):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = i == len(self.sizes) - 2
            if last and zero_head:
                W = np.zeros((fan_in, fan_out))
            else:
                W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.params += [W, np.zeros(fan_out)]

    @property
    def num_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x, keep=False):
        h = np.asarray(x, float)
        acts = [h]
        for i in range(self.num_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < self.num_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return (h, acts) if keep else h

    __call__ = forward

    def backward(self, acts, grad_out):
        """Parameter gradients given dL/d(output)."""
        grads = [None] * len(self.params)
        g = grad_out
        for i in reversed(range(self.num_layers)):
            if i < self.num_layers - 1:
                g = g * (acts[i + 1] > 0)
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ self.params[2 * i].T
        return grads

    def copy_from(self, other: "MLP") -> None:
        self.params = [p.copy() for p in other.params]

    def clone(self) -> "MLP":
        twin = MLP.__new__(MLP)
        twin.sizes = list(self.sizes)
        twin.params = [p.copy() for p in self.params]
        return twin

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec) -> None:
        vec = np.asarray(vec, float)
        off = 0
        for i, p in enumerate(self.params):
            n = p.size
            self.params[i] = vec[off:off + n].reshape(p.shape).copy()
            off += n

    def state(self) -> dict:
        out = {"version": np.array(CHECKPOINT_VERSION), "sizes": np.array(self.sizes)}
        for i, p in enumerate(self.params):
            out[f"p{i}"] = p
        return out

    @classmethod
    def from_state(cls, state) -> "MLP":
        version = int(state["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = cls.__new__(cls)
        net.sizes = [int(s) for s in state["sizes"]]
        net.params = [np.array(state[f"p{i}"], float) for i in range(2 * (len(net.sizes) - 1))]
        return net

    def describe(self) -> str:
        return json.dumps({"sizes": self.sizes, "num_params": int(self.flat().size)})


class Adam:
    """Adam with bias correction and global-norm gradient clipping."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        if self.clip_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.clip_norm:
                grads = [g * (self.clip_norm / norm) for g in grads]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, g in enumerate(grads):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            params[i] = params[i] - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
        return params
