"""One-hidden-layer sigmoid network with a homogeneity penalty.

The output layer has no bias, so a high prediction requires at least one
active positive node. The penalty pushes positive nodes to be active only
on high-target items and negative nodes (inhibitors) only on low-target
items, which makes the per-node views far easier to read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, NodelensError


class NonFiniteLoss(NodelensError):
    """Training diverged. Carries the partial loss curve."""

    def __init__(self, step: int, curve: list):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.curve = curve


@dataclass
class Network:
    input_weights: np.ndarray   # (H, D), row i feeds hidden node i
    biases: np.ndarray          # (H,)
    output_weights: np.ndarray  # (H,), no output-layer bias by design

    @property
    def n_hidden(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_weights.shape[1]

    def copy(self) -> "Network":
        return Network(self.input_weights.copy(), self.biases.copy(),
                       self.output_weights.copy())

    def to_json_obj(self) -> dict:
        return {
            "W": self.input_weights.tolist(),
            "b": self.biases.tolist(),
            "v": self.output_weights.tolist(),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "Network":
        return Network(np.asarray(obj["W"], dtype=float),
                       np.asarray(obj["b"], dtype=float),
                       np.asarray(obj["v"], dtype=float))


@dataclass
class TrainConfig:
    hidden_nodes: int = 20
    iterations: int = 10_000
    beta: float = 0.1
    learning_rate: float = 0.01
    batch_size: int = 32
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    seed: int = 0
    threshold: float = 0.5

    def to_json_obj(self) -> dict:
        return {
            "hiddenNodes": self.hidden_nodes,
            "iterations": self.iterations,
            "beta": self.beta,
            "learningRate": self.learning_rate,
            "batchSize": self.batch_size,
            "rmspropDecay": self.rmsprop_decay,
            "rmspropEpsilon": self.rmsprop_epsilon,
            "seed": self.seed,
            "threshold": self.threshold,
        }


@dataclass
class TrainResult:
    network: Network
    loss_curve: list[dict]      # entries {step, loss, mse} on the full set
    final_mse: float
    config: TrainConfig


def sigmoid(z):
    """Numerically safe logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def hidden_outputs(net: Network, x: np.ndarray) -> np.ndarray:
    """Activations of all hidden nodes for one item or a batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.n_inputs:
        raise DimensionMismatch(
            f"expected {net.n_inputs} inputs, got {x.shape[-1]}")
    return sigmoid(x @ net.input_weights.T + net.biases)


def predict(net: Network, x: np.ndarray):
    """Weighted sum of hidden activations; unbounded, no final bias."""
    h = hidden_outputs(net, x)
    return h @ net.output_weights


def penalty_indicator(y: float, v_i: float, tau: float) -> int:
    """1 when the node works against its role: an inhibitor on a
    high-value item, or a positive node on a low-value item."""
    if y >= tau and v_i < 0:
        return 1
    if y < tau and v_i > 0:
        return 1
    return 0


def _indicator_matrix(y: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    high = (y >= tau)[:, None]
    pos, neg = v > 0, v < 0
    return (high & neg[None, :]) | (~high & pos[None, :])


def loss(net: Network, x: np.ndarray, y: float, tau: float, beta: float) -> float:
    """Per-item loss: squared error plus the homogeneity penalty."""
    h = hidden_outputs(net, x)
    y_p = float(h @ net.output_weights)
    a = np.array([penalty_indicator(y, v_i, tau) for v_i in net.output_weights])
    return 0.5 * (y_p - y) ** 2 + 0.5 * beta * float(a @ (h * h))


def batch_loss(net: Network, X: np.ndarray, y: np.ndarray,
               tau: float, beta: float) -> float:
    """Mean per-item loss over a batch."""
    h = hidden_outputs(net, X)
    y_p = h @ net.output_weights
    a = _indicator_matrix(y, net.output_weights, tau)
    sq = 0.5 * np.mean((y_p - y) ** 2)
    reg = 0.5 * beta * np.mean(np.sum(a * h * h, axis=1))
    return float(sq + reg)


def gradients(net: Network, X: np.ndarray, y: np.ndarray,
              tau: float, beta: float):
    """Exact gradients of the mean batch loss w.r.t. (W, b, v).

    The penalty indicator is held constant per item; its jump at v_i = 0
    gets subgradient 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise DimensionMismatch("batch shape does not match the network")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    n = X.shape[0]

    h = hidden_outputs(net, X)                       # (n, H)
    e = h @ net.output_weights - y                   # (n,)
    a = _indicator_matrix(y, net.output_weights, tau)

    # dL/dh = e*v + beta*a*h, chained through h' = h(1-h)
    back = (e[:, None] * net.output_weights[None, :] + beta * a * h) * h * (1.0 - h)
    grad_w = back.T @ X / n
    grad_b = back.mean(axis=0)
    grad_v = h.T @ e / n
    return grad_w, grad_b, grad_v


def init_network(n_inputs: int, n_hidden: int, seed: int) -> Network:
    """W ~ U(-1/sqrt(D), 1/sqrt(D)), b = 0, v ~ U(-0.5, 0.5)."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(n_inputs)
    w = rng.uniform(-bound, bound, size=(n_hidden, n_inputs))
    v = rng.uniform(-0.5, 0.5, size=n_hidden)
    return Network(w, np.zeros(n_hidden), v)


class TrainingCancelled(NodelensError):
    pass


def train(dataset: Dataset, cfg: TrainConfig,
          progress=None, cancel=None) -> TrainResult:
    """Mini-batch RMSprop on the homogeneity loss.

    Batches are consecutive slices of a per-epoch shuffled permutation
    (seeded), so a (dataset, cfg) pair always yields the same result.
    `progress(step, total, loss)` fires at logging points; `cancel()`
    returning True aborts with TrainingCancelled.
    """
    n = dataset.n_items
    if cfg.batch_size > n:
        raise ValueError(f"batch size {cfg.batch_size} exceeds {n} items")
    if cfg.batch_size < 1 or cfg.hidden_nodes < 1:
        raise ValueError("batch size and hidden nodes must be >= 1")

    net = init_network(dataset.n_inputs, cfg.hidden_nodes, cfg.seed)
    X, y, tau, beta = dataset.rows, dataset.target, cfg.threshold, cfg.beta
    shuffle_rng = np.random.default_rng([cfg.seed, 0x5eed])

    acc = [np.zeros_like(net.input_weights), np.zeros_like(net.biases),
           np.zeros_like(net.output_weights)]
    params = [net.input_weights, net.biases, net.output_weights]
    rho, eps, lr = cfg.rmsprop_decay, cfg.rmsprop_epsilon, cfg.learning_rate

    log_every = max(1, cfg.iterations // 100)
    curve: list[dict] = []

    def log_point(step: int):
        with np.errstate(over="ignore"):
            h = hidden_outputs(net, X)
            y_p = h @ net.output_weights
            mse = float(np.mean((y_p - y) ** 2))
            a = _indicator_matrix(y, net.output_weights, tau)
            full = 0.5 * mse + 0.5 * beta * float(np.mean(np.sum(a * h * h, axis=1)))
        if not np.isfinite(full):
            raise NonFiniteLoss(step, curve)
        curve.append({"step": step, "loss": full, "mse": mse})
        if progress is not None:
            progress(step, cfg.iterations, full)
        return mse

    mse = log_point(0)
    order = np.empty(0, dtype=int)
    cursor = 0
    for step in range(1, cfg.iterations + 1):
        if cancel is not None and cancel():
            raise TrainingCancelled(f"cancelled at step {step}")
        if cursor >= len(order):
            order = shuffle_rng.permutation(n)
            cursor = 0
        batch = order[cursor:cursor + cfg.batch_size]
        cursor += cfg.batch_size

        grads = gradients(net, X[batch], y[batch], tau, beta)
        for p, s, g in zip(params, acc, grads):
            if not np.all(np.isfinite(g)):
                raise NonFiniteLoss(step, curve)
            s *= rho
            s += (1.0 - rho) * g * g
            p -= lr * g / np.sqrt(s + eps)

        if step % log_every == 0 or step == cfg.iterations:
            mse = log_point(step)

    return TrainResult(net, curve, mse, cfg)
