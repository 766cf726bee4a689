"""Multilayer perceptron with backpropagation and Adam, in plain NumPy.

Hidden layers use the rectifier; the output layer is linear.  Training
supports mini-batches, L2 weight decay, and optional early stopping on a
held-out validation split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInput, TrainingDiverged


class Mlp:
    """Fully connected network with ReLU hidden activations."""

    def __init__(self, layer_dims, weights, biases):
        self.layer_dims = list(layer_dims)
        self.weights = weights  # list of (d_in, d_out)
        self.biases = biases  # list of (d_out,)

    @classmethod
    def init(cls, layer_dims, rng=None):
        """He-initialized network: W ~ N(0, 2/d_in), zero biases."""
        if len(layer_dims) < 2:
            raise InvalidInput("need at least input and output dims")
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / d_in), (d_in, d_out)))
            biases.append(np.zeros(d_out))
        return cls(layer_dims, weights, biases)

    @property
    def n_layers(self):
        return len(self.weights)

    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cached(self, x):
        acts = [x]  # post-activation inputs to each layer
        pre = []
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        return h, acts, pre

    def _backward(self, acts, pre, grad_out):
        """Backpropagate dL/d(output); returns per-layer (dW, db)."""
        grads = [None] * self.n_layers
        delta = grad_out
        for i in range(self.n_layers - 1, -1, -1):
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
                delta = delta * (pre[i - 1] > 0)
        return grads

    def copy(self):
        return Mlp(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def state_dict(self):
        out = {"layer_dims": list(self.layer_dims)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out

    @classmethod
    def from_state_dict(cls, state):
        dims = list(state["layer_dims"])
        n = len(dims) - 1
        weights = [np.asarray(state[f"w{i}"], dtype=float) for i in range(n)]
        biases = [np.asarray(state[f"b{i}"], dtype=float) for i in range(n)]
        return cls(dims, weights, biases)


@dataclass
class AdamState:
    """Adam accumulator; moment shapes mirror the network parameters."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        state = cls(learning_rate, beta1, beta2, epsilon)
        for w, b in zip(net.weights, net.biases):
            state.m.extend([np.zeros_like(w), np.zeros_like(b)])
            state.v.extend([np.zeros_like(w), np.zeros_like(b)])
        return state

    def apply(self, net, grads):
        self.step += 1
        t = self.step
        lr = self.learning_rate
        params = []
        for w, b in zip(net.weights, net.biases):
            params.extend([w, b])
        flat_grads = []
        for dw, db in grads:
            flat_grads.extend([dw, db])
        for p, g, m, v in zip(params, flat_grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g**2
            mhat = m / (1 - self.beta1**t)
            vhat = v / (1 - self.beta2**t)
            p -= lr * mhat / (np.sqrt(vhat) + self.epsilon)


class MseLoss:
    """Mean squared error over every output entry."""

    @staticmethod
    def value_and_grad(pred, target):
        diff = pred - target
        loss = float(np.mean(diff**2))
        return loss, 2.0 * diff / diff.size


@dataclass
class TrainSchedule:
    """Epoch/batch plan plus regularization and early-stopping knobs."""

    epochs: int = 100
    batch_size: int = 32
    weight_decay: float = 0.0
    validation_fraction: float = 0.0
    patience: int | None = None
    shuffle: bool = True


def _epoch_loss(net, loss_spec, inputs, targets, weight_decay):
    pred = net.forward(inputs)
    loss, _ = loss_spec.value_and_grad(pred, targets)
    if weight_decay > 0:
        loss += weight_decay * sum(float((w**2).sum()) for w in net.weights)
    return loss


def mlp_train(net, inputs, targets, loss_spec=None, adam=None, schedule=None, rng=None):
    """Train ``net`` in place by mini-batch Adam; returns the network.

    Loss gradients come from ``loss_spec.value_and_grad`` and are
    backpropagated through the network.  When a validation split is
    requested, the best-validation parameters are restored at the end;
    otherwise the best-training-loss parameters are restored, so the final
    loss never exceeds the starting loss.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if inputs.shape[0] != targets.shape[0]:
        raise InvalidInput("inputs and targets disagree on row count")
    if inputs.shape[1] != net.layer_dims[0]:
        raise InvalidInput(
            f"input dim {inputs.shape[1]} != net input {net.layer_dims[0]}"
        )
    loss_spec = loss_spec or MseLoss()
    schedule = schedule or TrainSchedule()
    adam = adam or AdamState.for_net(net)
    rng = np.random.default_rng(rng)

    n = inputs.shape[0]
    if schedule.validation_fraction > 0 and n >= 10:
        n_val = max(1, int(round(schedule.validation_fraction * n)))
        perm = rng.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        train_idx = np.arange(n)
        val_idx = np.array([], dtype=int)
    x_train, y_train = inputs[train_idx], targets[train_idx]
    x_val, y_val = inputs[val_idx], targets[val_idx]
    use_val = len(val_idx) > 0 and schedule.patience is not None

    wd = schedule.weight_decay
    start_loss = _epoch_loss(net, loss_spec, x_train, y_train, wd)
    best_train_loss = start_loss
    best_params = net.copy()
    best_val = np.inf
    stale = 0
    batch = max(1, min(schedule.batch_size, len(x_train)))

    for _ in range(schedule.epochs):
        order = rng.permutation(len(x_train)) if schedule.shuffle else np.arange(len(x_train))
        for lo in range(0, len(x_train), batch):
            idx = order[lo : lo + batch]
            xb, yb = x_train[idx], y_train[idx]
            pred, acts, pre = net._forward_cached(xb)
            loss, grad_out = loss_spec.value_and_grad(pred, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss}")
            grads = net._backward(acts, pre, grad_out)
            if wd > 0:
                grads = [
                    (dw + 2.0 * wd * w, db)
                    for (dw, db), w in zip(grads, net.weights)
                ]
            adam.apply(net, grads)

        ep_loss = _epoch_loss(net, loss_spec, x_train, y_train, wd)
        if not np.isfinite(ep_loss):
            raise TrainingDiverged("epoch loss became non-finite")
        if use_val:
            val_loss = _epoch_loss(net, loss_spec, x_val, y_val, 0.0)
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_params = net.copy()
                stale = 0
            else:
                stale += 1
                if stale > schedule.patience:
                    break
        elif ep_loss < best_train_loss:
            best_train_loss = ep_loss
            best_params = net.copy()

    if use_val:
        net.weights = best_params.weights
        net.biases = best_params.biases
    elif _epoch_loss(net, loss_spec, x_train, y_train, wd) > best_train_loss:
        net.weights = best_params.weights
        net.biases = best_params.biases
    return net


def gradient_check(net, inputs, targets, loss_spec=None, eps=1e-6):
    """Max relative error between backprop and central-difference gradients."""
    loss_spec = loss_spec or MseLoss()
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    pred, acts, pre = net._forward_cached(inputs)
    _, grad_out = loss_spec.value_and_grad(pred, targets)
    analytic = net._backward(acts, pre, grad_out)

    def loss_at():
        p = net.forward(inputs)
        return loss_spec.value_and_grad(p, targets)[0]

    worst = 0.0
    for li, (w, b) in enumerate(zip(net.weights, net.biases)):
        for arr, grad in ((w, analytic[li][0]), (b, analytic[li][1])):
            flat = arr.ravel()
            gflat = grad.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = loss_at()
                flat[i] = orig - eps
                dn = loss_at()
                flat[i] = orig
                fd = (up - dn) / (2 * eps)
                denom = max(abs(fd), abs(gflat[i]), 1e-8)
                worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst
