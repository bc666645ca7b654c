"""Dense networks with explicit forward/backward passes and Adam.

Kept deliberately small: fully-connected layers, ELU hidden activations, an
optional tanh output squash, and hand-written backprop so training has no
framework dependency.  Parameters are float32 by default; float64 instances
are used for finite-difference checking.
"""
from __future__ import annotations

import numpy as np

from .rng import substream


def elu(z):
    # expm1 only sees the negative branch; large positive z would overflow
    return np.where(z > 0.0, z, np.expm1(np.minimum(z, 0.0)))


def elu_grad(z, a):
    # a = elu(z): derivative is exp(z) = a + 1 on the negative branch
    return np.where(z > 0.0, 1.0, a + 1.0)


class Mlp:
    """Feed-forward network; layer sizes include input and output."""

    def __init__(self, sizes, out_tanh: bool = False, rng=None, seed: int = 0,
                 dtype=np.float32):
        sizes = tuple(int(n) for n in sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        if rng is None:
            rng = substream(seed, "mlp-init", *sizes)
        self.sizes = sizes
        self.out_tanh = out_tanh
        self.dtype = np.dtype(dtype)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(
                rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype))
            self.biases.append(
                rng.uniform(-bound, bound, fan_out).astype(self.dtype))

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def forward(self, x, want_cache: bool = False):
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        a = np.atleast_2d(x)
        acts = [a]
        pre = []
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            pre.append(z)
            if l < last:
                a = elu(z)
            elif self.out_tanh:
                a = np.tanh(z)
            else:
                a = z
            acts.append(a)
        y = acts[-1][0] if single else acts[-1]
        if want_cache:
            return y, (acts, pre)
        return y

    def backward(self, cache, grad_out):
        """Backprop through a cached forward pass.

        Returns ((dW list, db list), grad wrt the batch input).
        """
        acts, pre = cache
        g = np.atleast_2d(np.asarray(grad_out, dtype=self.dtype))
        n = len(self.weights)
        d_w = [None] * n
        d_b = [None] * n
        for l in range(n - 1, -1, -1):
            a = acts[l + 1]
            if l == n - 1:
                delta = g * (1.0 - a * a) if self.out_tanh else g
            else:
                delta = g * elu_grad(pre[l], a)
            d_w[l] = acts[l].T @ delta
            d_b[l] = delta.sum(axis=0)
            g = delta @ self.weights[l].T
        return (d_w, d_b), g

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.out_tanh = self.out_tanh
        dup.dtype = self.dtype
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def assign(self, other: "Mlp"):
        for mine, theirs in zip(self.weights, other.weights):
            np.copyto(mine, theirs)
        for mine, theirs in zip(self.biases, other.biases):
            np.copyto(mine, theirs)

    def get_flat(self) -> np.ndarray:
        parts = [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        return np.concatenate(parts)

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=self.dtype)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} params, got {vec.size}")
        k = 0
        for w in self.weights:
            w[...] = vec[k:k + w.size].reshape(w.shape)
            k += w.size
        for b in self.biases:
            b[...] = vec[k:k + b.size]
            k += b.size


class Adam:
    """Per-network Adam state; updates parameters in place."""

    def __init__(self, net: Mlp, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.weights + net.biases]
        self.v = [np.zeros_like(p) for p in net.weights + net.biases]

    def step(self, net: Mlp, grads):
        d_w, d_b = grads
        self.t += 1
        scale = self.lr * np.sqrt(1.0 - self.beta2 ** self.t) \
            / (1.0 - self.beta1 ** self.t)
        params = net.weights + net.biases
        for p, g, m, v in zip(params, list(d_w) + list(d_b), self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (scale * m / (np.sqrt(v) + self.eps)).astype(p.dtype)
