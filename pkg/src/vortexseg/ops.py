"""Differentiable tensor primitives with hand-derived gradients.

Tensors are plain C-contiguous numpy arrays, float32 for training and
float64 when checking gradients against finite differences. Each
forward returns (output, cache) and the matching backward consumes the
cache plus the upstream gradient; max reductions route gradients to the
first (lowest-index) argmax so everything stays deterministic.
"""

from __future__ import annotations

import numpy as np

LEAKY_SLOPE = 0.2


def pointwise_linear(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """y = x @ w + b applied row-wise (the shared-MLP building block)."""
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ValueError(
            f"shape mismatch: x{x.shape} @ w{w.shape} + b{b.shape}"
        )
    return x @ w + b, (x, w)


def pointwise_linear_backward(cache, dy: np.ndarray):
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def leaky_relu(x: np.ndarray, slope: float = LEAKY_SLOPE):
    """max(x, slope*x); the subgradient at 0 uses the slope."""
    pos = x > 0
    return np.where(pos, x, slope * x), (pos, slope)


def leaky_relu_backward(cache, dy: np.ndarray):
    pos, slope = cache
    return np.where(pos, dy, slope * dy)


def global_maxpool(x: np.ndarray):
    """Per-channel max over all points; n x d -> d."""
    if x.shape[0] < 1:
        raise ValueError("global_maxpool needs at least one point")
    arg = np.argmax(x, axis=0)  # first occurrence = lowest point index
    cols = np.arange(x.shape[1])
    return x[arg, cols], (arg, x.shape)


def global_maxpool_backward(cache, dy: np.ndarray):
    arg, shape = cache
    dx = np.zeros(shape, dtype=dy.dtype)
    dx[arg, np.arange(shape[1])] = dy
    return dx


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood over points and its logits gradient.

    Stabilized by max subtraction; returns (loss, grad) where
    grad = (softmax - onehot) / n.
    """
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c}), got {labels.min()}..{labels.max()}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    loss = -log_probs[np.arange(n), labels].mean()
    grad = exp / total
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return float(loss), grad.astype(logits.dtype)


class Adam:
    """Adam with bias correction over a dict of named parameter arrays."""

    def __init__(self, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != param shape "
                                 f"{p.shape} for {name!r}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)
