"""Feed-forward networks in plain numpy with explicit backpropagation.

Parameters live in one flat vector so the optimiser and finite-difference
checks can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def inv_softplus(y):
    return np.log(np.expm1(y))


@dataclass(frozen=True)
class NetworkParams:
    """Layer sizes plus the flat parameter vector (weights then bias, layer by layer)."""

    sizes: tuple[int, ...]
    flat: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        expected = sum(m * n + n for m, n in zip(self.sizes[:-1], self.sizes[1:]))
        if self.flat.shape != (expected,):
            raise ValueError(f"parameter vector has {self.flat.size} entries, layers need {expected}")
        if not np.all(np.isfinite(self.flat)):
            raise ValueError("network parameters must be finite")


class MLP:
    """Fully connected network: tanh hidden layers, linear output layer."""

    def __init__(self, sizes):
        self.sizes = tuple(int(s) for s in sizes)
        self.shapes = list(zip(self.sizes[:-1], self.sizes[1:]))
        self.n_params = sum(m * n + n for m, n in self.shapes)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        chunks = []
        for m, n in self.shapes:
            chunks.append(rng.normal(scale=np.sqrt(1.0 / m), size=m * n))
            chunks.append(np.zeros(n))
        return np.concatenate(chunks)

    def unpack(self, flat):
        layers, i = [], 0
        for m, n in self.shapes:
            W = flat[i:i + m * n].reshape(m, n)
            i += m * n
            b = flat[i:i + n]
            i += n
            layers.append((W, b))
        return layers

    def output_bias_slice(self) -> slice:
        n = self.sizes[-1]
        return slice(self.n_params - n, self.n_params)

    def forward(self, flat, x):
        """Return outputs and the cache needed by :meth:`backward`."""
        layers = self.unpack(flat)
        acts = [x]
        h = x
        for j, (W, b) in enumerate(layers):
            h = h @ W + b
            if j < len(layers) - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, flat, acts, grad_out):
        """Gradient of the loss w.r.t. the flat parameters given d(loss)/d(output)."""
        layers = self.unpack(flat)
        grads = [None] * len(layers)
        delta = grad_out
        for j in range(len(layers) - 1, -1, -1):
            W, _ = layers[j]
            grads[j] = (acts[j].T @ delta, delta.sum(axis=0))
            if j > 0:
                delta = (delta @ W.T) * (1.0 - acts[j] ** 2)
        return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


class Adam:
    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(loss_and_grad, params, *, lr, max_epochs, patience, min_delta):
    """Full-batch Adam with early stopping once the loss stops improving.

    Returns ``(best_params, best_loss, history)``; raises ``FloatingPointError``
    on a non-finite loss.
    """
    opt = Adam(lr=lr)
    best, best_loss, stale = params.copy(), np.inf, 0
    history = []
    for _ in range(max_epochs):
        loss, grad = loss_and_grad(params)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise FloatingPointError(f"non-finite training loss after {len(history)} epochs")
        history.append(loss)
        if loss < best_loss - min_delta * max(1.0, abs(best_loss) if np.isfinite(best_loss) else 1.0):
            best, best_loss, stale = params.copy(), loss, 0
        else:
            stale += 1
            if stale >= patience:
                break
        params = opt.step(params, grad)
    return best, best_loss, history
