"""Feed-forward network with a two-output uncertainty head.

The regression head emits (mu, log sigma) per row and trains on the
Gaussian likelihood loss

    L = mean( 2 ln sigma + ((y - mu) / sigma)^2 ),

so sigma grows wherever the squared error is large and acts as a
per-prediction confidence. A single-logit head with weighted cross-entropy
reuses the same trunk for the binary receptivity task. Optimization is
plain mini-batch gradient descent with a fixed step; exact gradients are
backpropagated, which keeps them finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_HIDDEN = (256, 128, 64)
LOG_SIGMA_BOUND = 6.0


def hetero_loss(mu: np.ndarray, log_sigma: np.ndarray, y: np.ndarray) -> float:
    """Batch-mean uncertainty loss; zero when mu matches y at sigma = 1."""
    mu = np.asarray(mu, dtype=float)
    ls = np.asarray(log_sigma, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.isfinite(mu).all() and np.isfinite(ls).all() and np.isfinite(y).all()):
        raise ValueError("hetero_loss requires finite inputs")
    r = (y - mu) * np.exp(-ls)
    return float(np.mean(2.0 * ls + r * r))


def hetero_loss_grads(
    mu: np.ndarray, log_sigma: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Exact dL/dmu and dL/dlog_sigma for the batch-mean loss."""
    mu = np.asarray(mu, dtype=float)
    ls = np.asarray(log_sigma, dtype=float)
    y = np.asarray(y, dtype=float)
    n = mu.size
    inv_var = np.exp(-2.0 * ls)
    resid = y - mu
    d_mu = -2.0 * resid * inv_var / n
    d_ls = (2.0 - 2.0 * resid * resid * inv_var) / n
    return d_mu, d_ls


@dataclass(eq=False)
class HeteroNet:
    """Dense trunk plus either the (mu, log sigma) head or a single logit."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str                      # "hetero" | "binary"
    hidden: tuple[int, ...] = DEFAULT_HIDDEN


def init_net(
    n_inputs: int,
    head: str = "hetero",
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    seed: int = 0,
    dtype=np.float64,
) -> HeteroNet:
    """Fan-in-scaled normal init from a seeded generator; zero biases."""
    if head not in ("hetero", "binary"):
        raise ValueError(f"unknown head {head!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    sizes = (n_inputs, *hidden, 2 if head == "hetero" else 1)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = np.sqrt(2.0 / fan_in)
        if head == "hetero" and i == len(sizes) - 2:
            # Small head start: the first steps see mu ~ 0 and sigma ~ 1,
            # which keeps the exponential variance term from blowing up.
            scale *= 0.01
        weights.append((rng.standard_normal((fan_in, fan_out)) * scale).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return HeteroNet(weights=weights, biases=biases, head=head, hidden=tuple(hidden))


def _forward(net: HeteroNet, X: np.ndarray):
    acts = [X]
    a = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        if i == last:
            if net.head == "hetero":
                # Bounded log-sigma head: smooth squash keeps the
                # exponential variance term finite for any weights.
                z = z.copy()
                z[:, 1] = LOG_SIGMA_BOUND * np.tanh(z[:, 1] / LOG_SIGMA_BOUND)
            a = z
        else:
            a = np.maximum(z, 0.0)
        acts.append(a)
    return acts


def loss_and_grads(
    net: HeteroNet,
    X: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray | None = None,
):
    """Loss plus exact parameter gradients for one batch."""
    acts = _forward(net, X)
    out = acts[-1]
    n = X.shape[0]
    if net.head == "hetero":
        mu, ls = out[:, 0], out[:, 1]
        resid = y - mu
        inv_var = np.exp(-2.0 * ls)
        loss = float(np.mean(2.0 * ls + resid * resid * inv_var))
        d_out = np.empty_like(out)
        d_out[:, 0] = -2.0 * resid * inv_var / n
        # Chain rule through the bounded log-sigma squash.
        d_out[:, 1] = (2.0 - 2.0 * resid * resid * inv_var) / n * (
            1.0 - (ls / LOG_SIGMA_BOUND) ** 2
        )
    else:
        z = out[:, 0]
        w = np.ones(n, dtype=out.dtype) if sample_weights is None else sample_weights
        total = float(w.sum())
        # softplus(z) - y z, numerically stable for large |z|
        softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        loss = float(np.sum(w * (softplus - y * z)) / total)
        p = 1.0 / (1.0 + np.exp(-z))
        d_out = (w * (p - y) / total)[:, None]

    grads_w = [np.empty(0)] * len(net.weights)
    grads_b = [np.empty(0)] * len(net.biases)
    delta = d_out
    for i in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[i]
        grads_w[i] = a_prev.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (acts[i] > 0.0)
    return loss, grads_w, grads_b


@dataclass
class TrainInfo:
    epoch_losses: list[float] = field(default_factory=list)


def net_train(
    X: np.ndarray,
    y: np.ndarray,
    head: str = "hetero",
    epochs: int = 200,
    batch_size: int = 32,
    step: float = 1e-3,
    seed: int = 0,
    class_weights: dict[int, float] | None = None,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    dtype=np.float64,
) -> tuple[HeteroNet, TrainInfo]:
    """Mini-batch gradient descent on the head's loss.

    Raises RuntimeError with diagnostics if the loss goes non-finite.
    """
    X = np.asarray(X, dtype=dtype)
    y = np.asarray(y, dtype=dtype)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    net = init_net(X.shape[1], head=head, hidden=hidden, seed=seed, dtype=dtype)
    sample_w = None
    if head == "binary" and class_weights is not None:
        sample_w = np.array([class_weights[int(v)] for v in y], dtype=dtype)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    n = X.shape[0]
    info = TrainInfo()
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            rows = perm[lo : lo + batch_size]
            loss, gw, gb = loss_and_grads(
                net, X[rows], y[rows],
                None if sample_w is None else sample_w[rows],
            )
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: loss={loss!r}; "
                    "reduce the step size or normalize inputs"
                )
            total += loss * rows.size
            for i in range(len(net.weights)):
                net.weights[i] -= step * gw[i]
                net.biases[i] -= step * gb[i]
        info.epoch_losses.append(total / n)
    return net, info


def net_predict(net: HeteroNet, X: np.ndarray):
    """(mu, sigma) for the uncertainty head, P(positive) for the binary head."""
    X = np.atleast_2d(np.asarray(X, dtype=net.weights[0].dtype))
    out = _forward(net, X)[-1]
    if net.head == "hetero":
        return out[:, 0].astype(float), np.exp(out[:, 1]).astype(float)
    return (1.0 / (1.0 + np.exp(-out[:, 0]))).astype(float)
