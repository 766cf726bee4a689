"""Full schedules from summary indicators via truncated core-weight prediction.

A small network maps logit child mortality (and optionally adult
mortality) to the leading effective-core weights; multiplying by the
truncated Kronecker reconstruction matrix gives the complete stacked
logit schedule for both sexes at once.  The loss lives in schedule
space, with the ten age 0-4 cells upweighted so the prediction honors
the within-childhood age pattern and reproduces the input indicator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InvalidInput
from .lifetable import expit, logit
from .numerics import AdamState, Mlp
from .numerics.neural import TrainSchedule, mlp_train


@dataclass
class ReconMatrix:
    """Kronecker reconstruction matrix, optionally age-truncated.

    matrix @ vec(G_ct[:, :c_age]) equals the stacked schedule built from
    the first c_age age components; with c_age = r2 it reproduces
    reconstruct_pair exactly.
    """

    matrix: np.ndarray  # (2A, r1 * c_age)
    c_age: int
    r1: int
    n_ages: int

    @property
    def n_weights(self):
        return self.matrix.shape[1]

    def reconstruct(self, weights):
        return np.asarray(weights, dtype=float) @ self.matrix.T

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "matrix.npy", self.matrix)
        meta = {"c_age": self.c_age, "r1": self.r1, "n_ages": self.n_ages}
        (directory / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "manifest.json").read_text())
        return cls(
            matrix=np.load(directory / "matrix.npy"),
            c_age=meta["c_age"],
            r1=meta["r1"],
            n_ages=meta["n_ages"],
        )


def build_recon(model, c_age=6):
    """Truncated reconstruction matrix kron(S, A[:, :c_age])."""
    r2 = model.A.shape[1]
    if c_age > r2:
        raise InvalidInput(f"c_age {c_age} exceeds age rank {r2}")
    return ReconMatrix(
        matrix=np.kron(model.S, model.A[:, :c_age]),
        c_age=c_age,
        r1=model.S.shape[1],
        n_ages=model.A.shape[0],
    )


def child_mortality(qx):
    """5q0: probability of dying before exact age 5."""
    qx = np.asarray(qx, dtype=float)
    return 1.0 - np.prod(1.0 - qx[:5])


def adult_mortality(qx):
    """45q15: probability a 15-year-old dies before exact age 60."""
    qx = np.asarray(qx, dtype=float)
    return 1.0 - np.prod(1.0 - qx[15:60])


def indicators_from_schedule(qx_pair):
    """Summary indicators of a stacked (female, male) qx vector."""
    qx_pair = np.asarray(qx_pair, dtype=float)
    half = qx_pair.size // 2
    qf, qm = qx_pair[:half], qx_pair[half:]
    return {
        "q5_female": child_mortality(qf),
        "q5_male": child_mortality(qm),
        "q45_female": adult_mortality(qf),
        "q45_male": adult_mortality(qm),
    }


class ReconstructionLoss:
    """Schedule-space loss with age 0-4 upweighting.

    The network predicts core weights w; the loss compares R_c w against
    the observed logit schedule: mean squared error over all 2A cells
    plus ``alpha`` times the mean over the ten age 0-4 cells.  Gradients
    flow back through R_c by the chain rule.
    """

    def __init__(self, recon, alpha=10.0):
        self.recon = recon
        self.alpha = alpha
        n_ages = recon.n_ages
        self.child_cells = np.concatenate(
            [np.arange(5), n_ages + np.arange(5)]
        )

    def value_and_grad(self, pred_weights, target_z):
        r = self.recon.matrix
        z_hat = pred_weights @ r.T
        diff = z_hat - target_z
        n = diff.shape[0]
        n_cells = diff.shape[1]
        child = diff[:, self.child_cells]
        loss = float(np.mean(diff**2)) + self.alpha * float(np.mean(child**2))
        grad_z = 2.0 * diff / (n * n_cells)
        grad_z[:, self.child_cells] += (
            2.0 * self.alpha * child / (n * len(self.child_cells))
        )
        return loss, grad_z @ r


VARIANT_INPUTS = {"one": 2, "two": 4}


@dataclass
class IndicatorModel:
    variant: str  # "one" (5q0 only) or "two" (5q0 + 45q15)
    net: Mlp
    recon: ReconMatrix
    alpha: float = 10.0
    validation_rmse: float = np.nan

    def _encode(self, q5_female, q5_male, q45_female=None, q45_male=None):
        for v in (q5_female, q5_male):
            if not (0.0 < v < 1.0):
                raise DomainError(f"probability {v} outside (0, 1)")
        inputs = [logit(q5_female), logit(q5_male)]
        if self.variant == "two":
            if q45_female is None or q45_male is None:
                raise InvalidInput("two-parameter model needs adult inputs")
            for v in (q45_female, q45_male):
                if not (0.0 < v < 1.0):
                    raise DomainError(f"probability {v} outside (0, 1)")
            inputs += [logit(q45_female), logit(q45_male)]
        return np.array(inputs, dtype=float)

    def predict_weights(self, **indicators):
        x = self._encode(**indicators)
        return self.net.forward(x[None, :])[0]

    def predict_schedule(self, **indicators):
        """Stacked (female, male) qx vector from summary indicators."""
        z_hat = self.recon.reconstruct(self.predict_weights(**indicators))
        return expit(z_hat)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        state = self.net.state_dict()
        dims = state.pop("layer_dims")
        np.savez(directory / "net.npz", **state)
        self.recon.save(directory / "recon")
        meta = {
            "variant": self.variant,
            "alpha": self.alpha,
            "layer_dims": dims,
            "validation_rmse": None if np.isnan(self.validation_rmse) else self.validation_rmse,
        }
        (directory / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "manifest.json").read_text())
        with np.load(directory / "net.npz") as payload:
            state = dict(payload)
        state["layer_dims"] = meta["layer_dims"]
        return cls(
            variant=meta["variant"],
            net=Mlp.from_state_dict(state),
            recon=ReconMatrix.load(directory / "recon"),
            alpha=meta["alpha"],
            validation_rmse=meta["validation_rmse"] if meta["validation_rmse"] is not None else np.nan,
        )


def training_rows(tensor, variant):
    """(inputs, targets) over observed ordinary cells: logit indicators to
    observed stacked logit schedules."""
    cells = tensor.observed_cells()
    n_in = VARIANT_INPUTS[variant]
    inputs = np.empty((len(cells), n_in))
    targets = np.empty((len(cells), 2 * tensor.n_ages))
    for i, (c, t) in enumerate(cells):
        z = tensor.z_at(c, t)
        qx = expit(z)
        ind = indicators_from_schedule(qx)
        row = [logit(ind["q5_female"]), logit(ind["q5_male"])]
        if variant == "two":
            row += [logit(ind["q45_female"]), logit(ind["q45_male"])]
        inputs[i] = row
        targets[i] = z
    return inputs, targets


def train_indicator_model(
    tensor,
    recon,
    variant="one",
    hidden=(64, 64),
    alpha=10.0,
    epochs=400,
    batch_size=256,
    learning_rate=1e-3,
    weight_decay=1e-5,
    validation_fraction=0.1,
    patience=30,
    rng=None,
):
    """Train one indicator model on the tensor's observed ordinary cells."""
    if variant not in VARIANT_INPUTS:
        raise InvalidInput(f"variant must be one|two, got {variant!r}")
    rng = np.random.default_rng(rng)
    inputs, targets = training_rows(tensor, variant)
    net = Mlp.init([VARIANT_INPUTS[variant], *hidden, recon.n_weights], rng=rng)
    loss = ReconstructionLoss(recon, alpha=alpha)
    adam = AdamState.for_net(net, learning_rate=learning_rate)
    schedule = TrainSchedule(
        epochs=epochs,
        batch_size=batch_size,
        weight_decay=weight_decay,
        validation_fraction=validation_fraction,
        patience=patience,
    )
    mlp_train(net, inputs, targets, loss, adam, schedule, rng=rng)
    pred_z = net.forward(inputs) @ recon.matrix.T
    rmse = float(np.sqrt(np.mean((pred_z - targets) ** 2)))
    return IndicatorModel(
        variant=variant, net=net, recon=recon, alpha=alpha, validation_rmse=rmse
    )
