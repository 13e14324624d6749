"""Fully connected ReLU network with a linear or softmax head, trained by plain SGD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    softmax: bool = False

    def __post_init__(self):
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, sizes say {self.sizes}")

    @classmethod
    def create(cls, sizes, seed=0, softmax=False, out_scale=1.0) -> Mlp:
        """He-initialized network; ``out_scale`` shrinks the last layer."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            if i == len(sizes) - 2:
                w *= out_scale
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(list(sizes), weights, biases, softmax)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> Mlp:
        return Mlp(list(self.sizes), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.softmax)

    def __call__(self, x):
        return mlp_forward(self, x)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(net: Mlp, x: np.ndarray):
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def _as_batch(net: Mlp, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != net.sizes[0]:
        raise ValueError(f"input has {x.shape[1]} features, network expects {net.sizes[0]}")
    return x, single


def mlp_forward(net: Mlp, x, logits: bool = False) -> np.ndarray:
    """Evaluate on one vector or a (batch, features) array."""
    x, single = _as_batch(net, x)
    out = _forward(net, x)[-1]
    if net.softmax and not logits:
        out = softmax(out)
    return out[0] if single else out


def mlp_backward(net: Mlp, x, grad_out, through_head: bool = True):
    """Gradients of ``sum(grad_out * f(x))`` w.r.t. every weight and bias.

    With a softmax head, ``through_head=False`` treats ``grad_out`` as the
    gradient with respect to the logits. Returns ``(weight_grads, bias_grads)``
    summed over the batch.
    """
    x, single = _as_batch(net, x)
    g = np.asarray(grad_out, dtype=np.float64)
    g = g[None] if single else g
    if g.shape != (x.shape[0], net.sizes[-1]):
        raise ValueError(f"grad_out shape {g.shape} does not match output {(x.shape[0], net.sizes[-1])}")
    acts = _forward(net, x)
    if net.softmax and through_head:
        s = softmax(acts[-1])
        g = s * (g - (g * s).sum(axis=-1, keepdims=True))
    wgrads = [None] * len(net.weights)
    bgrads = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        wgrads[i] = acts[i].T @ g
        bgrads[i] = g.sum(axis=0)
        if i:
            g = (g @ net.weights[i].T) * (acts[i] > 0)
    return wgrads, bgrads


def sgd_step(net: Mlp, grads, lr: float) -> None:
    wgrads, bgrads = grads
    for w, gw in zip(net.weights, wgrads):
        w -= lr * gw
    for b, gb in zip(net.biases, bgrads):
        b -= lr * gb


def train_classifier(x, y, hidden=(128,), classes=None, epochs=30, lr=0.1, batch=32, seed=0) -> Mlp:
    """Softmax classifier fit by minibatch SGD on mean cross-entropy."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = int(y.max()) + 1 if classes is None else classes
    net = Mlp.create([x.shape[1], *hidden, classes], seed=seed, softmax=True)
    rng = np.random.default_rng(seed + 1)
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), batch):
            idx = order[start : start + batch]
            probs = mlp_forward(net, x[idx])
            grad = probs.copy()
            grad[np.arange(len(idx)), y[idx]] -= 1.0
            sgd_step(net, mlp_backward(net, x[idx], grad / len(idx), through_head=False), lr)
    return net


def predict(net: Mlp, x) -> np.ndarray:
    return np.argmax(mlp_forward(net, x, logits=True), axis=-1)


def accuracy(net: Mlp, x, y) -> float:
    return float(np.mean(predict(net, x) == np.asarray(y)))
