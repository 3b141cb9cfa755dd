"""Simulator surrogates: a dense net for takeoff energy and one LSTM per
time series, all mapping the same six inputs (z1, z2, z3, eta, m, t).

The latent coordinates come from the curve generator, so a surrogate
dataset is generated by decoding random latent draws into control
schedules and running each through the simulator. Inputs are
standardized with training-split statistics; each response is min-max
scaled with a single global (lo, hi) pair so the loss weights every
timestep equally.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.preprocessing import StandardScaler

from .nn import LSTM, Adam, Dense, Network, load_network, mlp, mse, save_network
from .simulator import (
    ETA_RANGE,
    MASS_RANGE,
    SURROGATE_SERIES,
    AircraftParams,
    propagate_batch,
)
from .splines import T_BOUNDS
from .validation import check_array

log = logging.getLogger(__name__)

INPUT_NAMES = ("z1", "z2", "z3", "eta", "m", "t")
RESPONSE_NAMES = ("energy_wh",) + SURROGATE_SERIES


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch


def pack_inputs(z, eta, m, t):
    """Assemble the (n, 6) input block shared by every surrogate."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[0]
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,))
    m = np.broadcast_to(np.asarray(m, dtype=float), (n,))
    t = np.broadcast_to(np.asarray(t, dtype=float), (n,))
    return np.column_stack([z, eta, m, t])


def relative_accuracy(pred, true):
    """100 * (1 - mean over samples of |pred - true|_1 / |true|_1).

    Works on scalar responses (n,) and series (n, T) alike. Samples whose
    true response has zero norm carry no scale to compare against and are
    excluded with a warning.
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    true = np.atleast_2d(np.asarray(true, dtype=float))
    if pred.shape != true.shape:
        raise ValueError("prediction/truth shape mismatch")
    norms = np.sum(np.abs(true), axis=-1)
    keep = norms > 0.0
    if not np.all(keep):
        warnings.warn(f"relative_accuracy: excluded {int((~keep).sum())} "
                      "zero-norm samples")
    if not np.any(keep):
        raise ValueError("no samples with nonzero norm")
    ratios = np.sum(np.abs(pred - true), axis=-1)[keep] / norms[keep]
    return 100.0 * (1.0 - float(np.mean(ratios)))


@dataclass
class SurrogateDataset:
    """Inputs plus simulated responses with fixed 64/16/20 splits."""

    inputs: np.ndarray            # (n, 6)
    energy_wh: np.ndarray         # (n,)
    series: dict                  # name -> (n, n_steps)
    seed: int = 0
    n_failed: int = 0

    def __post_init__(self):
        self.inputs = check_array(self.inputs, "inputs", ndim=2)
        n = len(self.inputs)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 2**31]))
        order = rng.permutation(n)
        n_train = int(0.64 * n)
        n_val = int(0.16 * n)
        self.train_idx = order[:n_train]
        self.val_idx = order[n_train:n_train + n_val]
        self.test_idx = order[n_train + n_val:]

    def __len__(self):
        return len(self.inputs)

    def response(self, name):
        if name == "energy_wh":
            return self.energy_wh
        return self.series[name]

    def split(self, name):
        return {"train": self.train_idx, "val": self.val_idx,
                "test": self.test_idx}[name]

    def save(self, path):
        np.savez_compressed(
            path, inputs=self.inputs, energy_wh=self.energy_wh,
            seed=np.int64(self.seed), n_failed=np.int64(self.n_failed),
            **{f"series.{k}": v for k, v in self.series.items()})

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            series = {k.split(".", 1)[1]: data[k] for k in data.files
                      if k.startswith("series.")}
            return cls(inputs=data["inputs"], energy_wh=data["energy_wh"],
                       series=series, seed=int(data["seed"]),
                       n_failed=int(data["n_failed"]))


def gen_surrogate_dataset(twin_gan, n, seed, *, base_params=None,
                          n_steps=500) -> SurrogateDataset:
    """Sample (z, eta, m, t) uniformly, decode through the curve
    generator, simulate, and keep every record the simulator completes.

    Mass and efficiency differ per record, so trajectories run one at a
    time; the compiled kernel keeps that affordable.
    """
    if base_params is None:
        base_params = AircraftParams()
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 1.0, (n, 3))
    eta = rng.uniform(*ETA_RANGE, n)
    m = rng.uniform(*MASS_RANGE, n)
    t = rng.uniform(*T_BOUNDS, n)
    power_cp, wing_cp = twin_gan.generate(z)

    energy = np.empty(n)
    series = {name: np.empty((n, n_steps)) for name in SURROGATE_SERIES}
    ok = np.zeros(n, dtype=bool)
    for i in range(n):
        params = base_params.with_requirements(mass=m[i], eta=eta[i])
        out = propagate_batch(power_cp[i:i + 1], wing_cp[i:i + 1],
                              t[i:i + 1], params, n_steps=n_steps)
        ok[i] = out["ok"][0]
        if not ok[i]:
            continue
        energy[i] = out["energy_wh"][0]
        for name in SURROGATE_SERIES:
            if name == "accel_g":
                series[name][i] = out["accel_g"][0]
            else:
                series[name][i] = out["series"][name][0]
    n_failed = int((~ok).sum())
    if n_failed:
        log.warning("gen_surrogate_dataset: %d of %d records failed the "
                    "simulator and were skipped", n_failed, n)
    inputs = pack_inputs(z, eta, m, t)[ok]
    return SurrogateDataset(
        inputs=inputs, energy_wh=energy[ok],
        series={k: v[ok] for k, v in series.items()},
        seed=seed, n_failed=n_failed)


# ---------------------------------------------------------------------------
# estimators


def _fit_mse(net, x_train, y_train, x_val, y_val, *, lr, epochs, batch_size,
             patience, seed, forward_kw=None):
    """Shared minibatch loop: Adam on MSE, best-validation weights kept."""
    rng = np.random.default_rng(seed)
    opt = Adam(net.parameters(), lr=lr)
    n = len(x_train)
    batch_size = min(batch_size, n)
    best_val = np.inf
    best_state = None
    stale = 0
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            idx = order[start:start + batch_size]
            net.zero_grad()
            pred = net.forward(x_train[idx], training=True)
            loss, grad = mse(pred, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            net.backward(grad)
            opt.step()
        val_pred = net.forward(x_val, training=False, cache=False)
        val_loss, _ = mse(val_pred, y_val)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(epoch, val_loss)
        history.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_state = {k: v.copy() for k, v in net.state_arrays().items()}
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    if best_state is not None:
        net.load_state_arrays(best_state)
    return history


class EnergySurrogate(BaseEstimator):
    """Dense regressor for takeoff energy in Wh."""

    def __init__(self, hidden=(410, 290, 500, 310, 500), lr=1e-3,
                 epochs=400, batch_size=64, patience=60, seed=0):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_array(X, "X", ndim=2)
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        if X_val is None:
            X_val, y_val = X, y
        else:
            X_val = check_array(X_val, "X_val", ndim=2)
            y_val = np.asarray(y_val, dtype=float).reshape(-1, 1)
        self.in_scaler_ = StandardScaler().fit(X)
        self.out_lo_ = float(y.min())
        self.out_hi_ = float(max(y.max(), self.out_lo_ + 1e-12))
        rng = np.random.default_rng(self.seed)
        self.net_ = mlp([X.shape[1], *self.hidden, 1],
                        hidden_activation="leaky_relu", rng=rng,
                        name="energy")
        self.history_ = _fit_mse(
            self.net_, self.in_scaler_.transform(X), self._scale(y),
            self.in_scaler_.transform(X_val), self._scale(y_val),
            lr=self.lr, epochs=self.epochs, batch_size=self.batch_size,
            patience=self.patience, seed=self.seed + 1)
        return self

    def _scale(self, y):
        return (y - self.out_lo_) / (self.out_hi_ - self.out_lo_)

    def _unscale(self, y):
        return y * (self.out_hi_ - self.out_lo_) + self.out_lo_

    def predict(self, X):
        X = check_array(X, "X", ndim=2)
        out = self.net_.forward(self.in_scaler_.transform(X),
                                training=False, cache=False)
        return self._unscale(out)[:, 0]


class SeriesSurrogate(BaseEstimator):
    """LSTM stack predicting one response series from constant inputs.

    The six inputs are repeated at every timestep; the stacked recurrent
    layers emit a hidden sequence and a shared dense head reads one value
    per step.

    ``stride`` trades fidelity for speed: the model is trained on and
    predicts the series sampled every ``stride`` steps (the last step is
    always kept, so final values stay exact targets). Feasibility scans
    push tens of thousands of sequences through these nets, and the
    recurrence cost is linear in sequence length.
    """

    def __init__(self, hidden=(200, 200, 200, 200), lr=1e-3, epochs=150,
                 batch_size=128, patience=25, seed=0, n_steps=500,
                 stride=1, chunk=1024):
        self.hidden = hidden
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.seed = seed
        self.n_steps = n_steps
        self.stride = stride
        self.chunk = chunk

    def grid_indices(self):
        """Timestep indices the model is defined on."""
        idx = np.arange(0, self.n_steps, self.stride)
        if idx[-1] != self.n_steps - 1:
            idx = np.append(idx, self.n_steps - 1)
        return idx

    def _build(self, n_features):
        rng = np.random.default_rng(self.seed)
        layers = []
        fan = n_features
        for i, h in enumerate(self.hidden):
            layers.append(LSTM(fan, h, rng=rng, name=f"lstm{i}"))
            fan = h
        layers.append(Dense(fan, 1, "linear", rng=rng, name="head"))
        return Network(layers, name="series")

    def _repeat(self, Xn):
        return np.repeat(Xn[:, None, :], len(self.grid_indices()), axis=1)

    def fit(self, X, Y, X_val=None, Y_val=None):
        X = check_array(X, "X", ndim=2)
        Y = check_array(Y, "Y", ndim=2)
        if Y.shape[1] != self.n_steps:
            raise ValueError(f"Y must have {self.n_steps} columns")
        if X_val is None:
            X_val, Y_val = X, Y
        else:
            X_val = check_array(X_val, "X_val", ndim=2)
            Y_val = check_array(Y_val, "Y_val", ndim=2)
        grid = self.grid_indices()
        Y = Y[:, grid]
        Y_val = Y_val[:, grid]
        self.in_scaler_ = StandardScaler().fit(X)
        self.out_lo_ = float(Y.min())
        self.out_hi_ = float(max(Y.max(), self.out_lo_ + 1e-12))
        self.net_ = self._build(X.shape[1])
        self.history_ = _fit_mse(
            self.net_,
            self._repeat(self.in_scaler_.transform(X)),
            self._scale(Y)[:, :, None],
            self._repeat(self.in_scaler_.transform(X_val)),
            self._scale(Y_val)[:, :, None],
            lr=self.lr, epochs=self.epochs, batch_size=self.batch_size,
            patience=self.patience, seed=self.seed + 1)
        return self

    def _scale(self, y):
        return (y - self.out_lo_) / (self.out_hi_ - self.out_lo_)

    def _unscale(self, y):
        return y * (self.out_hi_ - self.out_lo_) + self.out_lo_

    def predict(self, X):
        """Predicted series on the model grid, shape (n, len(grid))."""
        X = check_array(X, "X", ndim=2)
        Xn = self.in_scaler_.transform(X)
        out = np.empty((len(X), len(self.grid_indices())))
        for start in range(0, len(X), self.chunk):
            block = self._repeat(Xn[start:start + self.chunk])
            pred = self.net_.forward(block, training=False, cache=False)
            out[start:start + self.chunk] = pred[:, :, 0]
        return self._unscale(out)


class SurrogateBundle:
    """The energy net plus the five series nets behind one input layout.

    ``predict_scalars`` is what the optimizers consume: it derives the
    constraint scalars from predicted series exactly the way the
    simulator derives them from integrated series (final values, series
    minimum, series maximum).
    """

    def __init__(self, energy: EnergySurrogate, series: dict):
        missing = set(SURROGATE_SERIES) - set(series)
        if missing:
            raise ValueError(f"missing series surrogates: {sorted(missing)}")
        self.energy = energy
        self.series = dict(series)
        self.accuracies_ = {}

    @classmethod
    def with_defaults(cls, *, energy_kw=None, series_kw=None, seed=0):
        energy = EnergySurrogate(seed=seed, **(energy_kw or {}))
        series = {}
        for i, name in enumerate(SURROGATE_SERIES):
            series[name] = SeriesSurrogate(seed=seed + 10 + i,
                                           **(series_kw or {}))
        return cls(energy, series)

    def fit(self, dataset: SurrogateDataset):
        tr = dataset.train_idx
        va = dataset.val_idx
        X = dataset.inputs
        self.energy.fit(X[tr], dataset.energy_wh[tr],
                        X[va], dataset.energy_wh[va])
        log.info("energy surrogate trained, %d val epochs",
                 len(self.energy.history_))
        for name, model in self.series.items():
            Y = dataset.series[name]
            model.fit(X[tr], Y[tr], X[va], Y[va])
            log.info("%s surrogate trained, %d val epochs", name,
                     len(model.history_))
        return self

    def _check_bounds(self, X):
        lo = np.array([0.0, 0.0, 0.0, ETA_RANGE[0], MASS_RANGE[0],
                       T_BOUNDS[0]])
        hi = np.array([1.0, 1.0, 1.0, ETA_RANGE[1], MASS_RANGE[1],
                       T_BOUNDS[1]])
        if np.any(X < lo - 1e-9) or np.any(X > hi + 1e-9):
            warnings.warn("surrogate inputs outside the training bounds; "
                          "predictions are extrapolations")

    def predict_energy(self, z, eta, m, t):
        X = pack_inputs(z, eta, m, t)
        self._check_bounds(X)
        return self.energy.predict(X)

    def predict_series(self, name, z, eta, m, t):
        X = pack_inputs(z, eta, m, t)
        self._check_bounds(X)
        return self.series[name].predict(X)

    def predict_scalars(self, z, eta, m, t):
        X = pack_inputs(z, eta, m, t)
        self._check_bounds(X)
        x_s = self.series["x"].predict(X)
        y_s = self.series["y"].predict(X)
        vx_s = self.series["vx"].predict(X)
        a_s = self.series["accel_g"].predict(X)
        return {
            "energy_wh": self.energy.predict(X),
            "x_f": x_s[:, -1],
            "y_f": y_s[:, -1],
            "vx_f": vx_s[:, -1],
            "y_min": y_s.min(axis=1),
            "a_max": a_s.max(axis=1),
        }

    def evaluate(self, dataset: SurrogateDataset, split="test"):
        """Relative accuracy per response on one split."""
        idx = dataset.split(split)
        X = dataset.inputs[idx]
        out = {"energy_wh": relative_accuracy(
            self.energy.predict(X), dataset.energy_wh[idx])}
        for name, model in self.series.items():
            true = dataset.series[name][idx][:, model.grid_indices()]
            out[name] = relative_accuracy(model.predict(X), true)
        self.accuracies_[split] = out
        return out

    # ---- persistence

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"responses": list(self.series),
                    "accuracies": self.accuracies_,
                    "models": {}}
        for name, model in [("energy_wh", self.energy),
                            *self.series.items()]:
            save_network(model.net_, directory / f"{name}.npz")
            manifest["models"][name] = {
                "params": model.get_params(),
                "in_mean": model.in_scaler_.mean_.tolist(),
                "in_scale": model.in_scaler_.scale_.tolist(),
                "out_lo": model.out_lo_,
                "out_hi": model.out_hi_,
            }
        (directory / "manifest.json").write_text(json.dumps(manifest,
                                                            indent=2))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())

        def restore(name, model):
            info = manifest["models"][name]
            model.set_params(**{k: tuple(v) if isinstance(v, list) else v
                                for k, v in info["params"].items()})
            model.net_ = load_network(directory / f"{name}.npz")
            scaler = StandardScaler()
            scaler.mean_ = np.array(info["in_mean"])
            scaler.scale_ = np.array(info["in_scale"])
            scaler.var_ = scaler.scale_ ** 2
            scaler.n_features_in_ = len(scaler.mean_)
            model.in_scaler_ = scaler
            model.out_lo_ = info["out_lo"]
            model.out_hi_ = info["out_hi"]
            return model

        energy = restore("energy_wh", EnergySurrogate())
        series = {name: restore(name, SeriesSurrogate())
                  for name in manifest["responses"]}
        bundle = cls(energy, series)
        bundle.accuracies_ = manifest.get("accuracies", {})
        return bundle
