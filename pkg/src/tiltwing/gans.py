"""Adversarially trained curve generators and their feasibility metrics.

Two generative models produce takeoff control curves:

* ``TwinGAN`` learns the distribution of optimizer-produced control
  curves. Two generators share one 3-vector latent draw; one emits the
  power schedule and the other the wing schedule, so a single latent
  point always describes a coordinated pair.
* ``PhysicsGAN`` is conditioned on (efficiency, mass) and trained to
  stay inside the feasible region. Its generator drives the frozen twin
  generators and a frozen acceleration surrogate, and a penalty on the
  predicted acceleration peak is added to the adversarial loss, with
  gradients flowing through the frozen networks back to the generator.

``coverage`` (fraction of random designs that satisfy every constraint)
and ``fitting_accuracy`` (how closely the generator can reproduce a
given curve pair) are the two scalar metrics used to compare them.
"""

from __future__ import annotations

import copy
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.preprocessing import StandardScaler

from .nn import (Adam, accel_penalty, bce_with_logits, load_network, mlp,
                 save_network, sigmoid)
from .optimize import OptProblem, local_search_powell
from .simulator import (DEFAULT_REQUIREMENTS, ETA_RANGE, MASS_RANGE,
                        Requirements, margins_from_scalars)
from .splines import N_CONTROL, T_BOUNDS
from .surrogates import TrainingDiverged
from .validation import check_array

log = logging.getLogger(__name__)

#: Curve pair flattened for the discriminators: power points then wing
#: points, no scaling (both live in [0, 1] already).
CURVE_DIM = 2 * N_CONTROL


def _draw_conditions(rng, n):
    eta = rng.uniform(ETA_RANGE[0], ETA_RANGE[1], n)
    mass = rng.uniform(MASS_RANGE[0], MASS_RANGE[1], n)
    return eta, mass


class TwinGAN(BaseEstimator):
    """Paired curve generators with a shared latent and one discriminator.

    ``fit`` expects the control points of trajectories already shaped by
    an optimizer; the model's job is to interpolate that family, not to
    invent feasibility on its own.
    """

    latent_dim: int
    conditional = False

    def __init__(self, latent_dim=3, g_hidden=(125, 256, 512, 1024),
                 d_hidden=(1024, 512, 256), lr=2e-4, beta1=0.5,
                 epochs=400, batch_size=32, seed=0,
                 collapse_tol=0.01, collapse_patience=50):
        self.latent_dim = latent_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.lr = lr
        self.beta1 = beta1
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.collapse_tol = collapse_tol
        self.collapse_patience = collapse_patience

    def _build(self):
        rng = np.random.default_rng(self.seed)
        self.g_power_ = mlp([self.latent_dim, *self.g_hidden, N_CONTROL],
                            hidden_activation="leaky_relu",
                            out_activation="sigmoid", batch_norm=True,
                            rng=rng, name="g_power")
        self.g_wing_ = mlp([self.latent_dim, *self.g_hidden, N_CONTROL],
                           hidden_activation="leaky_relu",
                           out_activation="sigmoid", batch_norm=True,
                           rng=rng, name="g_wing")
        self.disc_ = mlp([CURVE_DIM, *self.d_hidden, 1],
                         hidden_activation="leaky_relu",
                         out_activation="linear", rng=rng, name="d_curves")

    def fit(self, power_cp, wing_cp):
        power_cp = check_array(power_cp, "power_cp", ndim=2,
                               shape=(None, N_CONTROL))
        wing_cp = check_array(wing_cp, "wing_cp", ndim=2,
                              shape=(None, N_CONTROL))
        if len(power_cp) != len(wing_cp):
            raise ValueError("power_cp and wing_cp row counts differ")
        real = np.hstack([power_cp, wing_cp])
        self._build()
        self.data_std_ = float(real.std(axis=0).mean())

        rng = np.random.default_rng(self.seed + 1)
        opt_g = Adam(self.g_power_.parameters() + self.g_wing_.parameters(),
                     lr=self.lr, beta1=self.beta1)
        opt_d = Adam(self.disc_.parameters(), lr=self.lr, beta1=self.beta1)

        n = len(real)
        batch = min(self.batch_size, n)
        self.d_accuracy_ = []
        self.g_loss_ = []
        self.d_loss_ = []
        self.collapsed_ = False
        flat_epochs = 0

        for epoch in range(self.epochs):
            perm = rng.permutation(n)
            correct = total = 0
            d_losses = []
            g_losses = []
            for start in range(0, n - batch + 1, batch):
                rows = perm[start:start + batch]
                real_b = real[rows]

                self.disc_.zero_grad()
                logit_r = self.disc_.forward(real_b, training=True)
                loss_r, dl = bce_with_logits(logit_r,
                                             np.ones_like(logit_r))
                self.disc_.backward(dl)
                fake_b = self._sample(rng, batch, training=True)
                logit_f = self.disc_.forward(fake_b, training=True)
                loss_f, dl = bce_with_logits(logit_f,
                                             np.zeros_like(logit_f))
                self.disc_.backward(dl)
                opt_d.step()
                d_losses.append(loss_r + loss_f)
                correct += int((logit_r > 0).sum() + (logit_f <= 0).sum())
                total += 2 * batch

                self.g_power_.zero_grad()
                self.g_wing_.zero_grad()
                z = rng.random((batch, self.latent_dim))
                fp = self.g_power_.forward(z, training=True)
                fw = self.g_wing_.forward(z, training=True)
                logit = self.disc_.forward(np.hstack([fp, fw]),
                                           training=False)
                loss_g, dl = bce_with_logits(logit, np.ones_like(logit))
                dfake = self.disc_.backward(dl)
                self.g_power_.backward(dfake[:, :N_CONTROL])
                self.g_wing_.backward(dfake[:, N_CONTROL:])
                opt_g.step()
                g_losses.append(loss_g)

            if not (np.isfinite(g_losses).all()
                    and np.isfinite(d_losses).all()):
                raise TrainingDiverged(epoch, float(np.sum(g_losses)))
            self.d_loss_.append(float(np.mean(d_losses)))
            self.g_loss_.append(float(np.mean(g_losses)))
            self.d_accuracy_.append(correct / total)

            probe = self._sample(rng, 256, training=False)
            gen_std = float(probe.std(axis=0).mean())
            if gen_std < self.collapse_tol * self.data_std_:
                flat_epochs += 1
            else:
                flat_epochs = 0
            if flat_epochs >= self.collapse_patience and not self.collapsed_:
                self.collapsed_ = True
                warnings.warn(
                    "generated curve spread stayed below "
                    f"{self.collapse_tol:.0%} of the data spread for "
                    f"{flat_epochs} epochs; the generator has likely "
                    "collapsed to a point")
        return self

    def _sample(self, rng, n, training):
        z = rng.random((n, self.latent_dim))
        fp = self.g_power_.forward(z, training=training, cache=False)
        fw = self.g_wing_.forward(z, training=training, cache=False)
        return np.hstack([fp, fw])

    def generate(self, z):
        """Curve pair for latent rows, each array (n, N_CONTROL)."""
        z = check_array(z, "z", ndim=2, shape=(None, self.latent_dim))
        power = self.g_power_.forward(z, training=False, cache=False)
        wing = self.g_wing_.forward(z, training=False, cache=False)
        return power, wing

    def discriminator_score(self, power_cp, wing_cp):
        """Probability the discriminator assigns to 'real'."""
        x = np.hstack([power_cp, wing_cp])
        return sigmoid(self.disc_.forward(x, training=False,
                                          cache=False))[:, 0]

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_network(self.g_power_, directory / "g_power.npz")
        save_network(self.g_wing_, directory / "g_wing.npz")
        save_network(self.disc_, directory / "d_curves.npz")
        meta = {"params": self.get_params(),
                "data_std": self.data_std_,
                "collapsed": self.collapsed_,
                "d_accuracy": self.d_accuracy_,
                "g_loss": self.g_loss_,
                "d_loss": self.d_loss_}
        (directory / "manifest.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "manifest.json").read_text())
        params = {k: tuple(v) if isinstance(v, list) else v
                  for k, v in meta["params"].items()}
        model = cls(**params)
        model.g_power_ = load_network(directory / "g_power.npz")
        model.g_wing_ = load_network(directory / "g_wing.npz")
        model.disc_ = load_network(directory / "d_curves.npz")
        model.data_std_ = meta["data_std"]
        model.collapsed_ = meta["collapsed"]
        model.d_accuracy_ = meta["d_accuracy"]
        model.g_loss_ = meta["g_loss"]
        model.d_loss_ = meta["d_loss"]
        return model


@dataclass
class FeasibleSet:
    """Rejection-sampled designs that the surrogates call feasible."""

    z: np.ndarray
    t: np.ndarray
    eta: np.ndarray
    mass: np.ndarray
    power_cp: np.ndarray
    wing_cp: np.ndarray
    acceptance_rate: float
    n_drawn: int
    seed: int

    def __len__(self):
        return len(self.t)

    def save(self, path):
        np.savez_compressed(path, z=self.z, t=self.t, eta=self.eta,
                            mass=self.mass, power_cp=self.power_cp,
                            wing_cp=self.wing_cp,
                            acceptance_rate=self.acceptance_rate,
                            n_drawn=self.n_drawn, seed=self.seed)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(z=data["z"], t=data["t"], eta=data["eta"],
                       mass=data["mass"], power_cp=data["power_cp"],
                       wing_cp=data["wing_cp"],
                       acceptance_rate=float(data["acceptance_rate"]),
                       n_drawn=int(data["n_drawn"]),
                       seed=int(data["seed"]))


def build_feasible_dataset(twin_gan, surrogates, n_target,
                           requirements: Requirements = DEFAULT_REQUIREMENTS,
                           *, seed=0, batch=4096, max_draws=1_000_000,
                           min_acceptance=1e-3):
    """Rejection-sample (z, t, eta, mass) until n_target feasible designs.

    Feasibility is judged entirely by the surrogate scalars, so this is
    cheap but only as trustworthy as the surrogates. Aborts when the
    acceptance rate after ``max_draws`` draws is below ``min_acceptance``
    (the downstream discriminator needs thousands of rows, and a
    percent-scale acceptance rate is what the unconditioned generator
    normally shows).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    kept = {k: [] for k in ("z", "t", "eta", "mass")}
    n_kept = 0
    n_drawn = 0
    while n_kept < n_target:
        z = rng.random((batch, twin_gan.latent_dim))
        t = rng.uniform(T_BOUNDS[0], T_BOUNDS[1], batch)
        eta, mass = _draw_conditions(rng, batch)
        pred = surrogates.predict_scalars(z, eta, mass, t)
        margins = margins_from_scalars(pred["x_f"], pred["y_f"],
                                       pred["vx_f"], pred["y_min"],
                                       pred["a_max"], requirements)
        ok = np.all(margins >= 0.0, axis=-1)
        kept["z"].append(z[ok])
        kept["t"].append(t[ok])
        kept["eta"].append(eta[ok])
        kept["mass"].append(mass[ok])
        n_kept += int(ok.sum())
        n_drawn += batch
        if n_drawn >= max_draws and n_kept < n_drawn * min_acceptance:
            raise RuntimeError(
                f"acceptance rate {n_kept / n_drawn:.2%} after {n_drawn} "
                "draws; the surrogate-feasible region is too small to "
                "sample by rejection")
        if n_drawn >= 20 * max_draws:
            raise RuntimeError(
                f"still only {n_kept}/{n_target} feasible designs after "
                f"{n_drawn} draws")

    z = np.concatenate(kept["z"])[:n_target]
    t = np.concatenate(kept["t"])[:n_target]
    eta = np.concatenate(kept["eta"])[:n_target]
    mass = np.concatenate(kept["mass"])[:n_target]
    power = np.empty((n_target, N_CONTROL))
    wing = np.empty((n_target, N_CONTROL))
    for start in range(0, n_target, batch):
        p, w = twin_gan.generate(z[start:start + batch])
        power[start:start + batch] = p
        wing[start:start + batch] = w
    rate = n_kept / n_drawn
    log.info("feasible dataset: %d kept of %d drawn (%.2f%%)", n_target,
             n_drawn, 100.0 * rate)
    return FeasibleSet(z=z, t=t, eta=eta, mass=mass, power_cp=power,
                       wing_cp=wing, acceptance_rate=rate,
                       n_drawn=n_drawn, seed=seed)


class PhysicsGAN(BaseEstimator):
    """Condition-aware generator trained against feasible designs only.

    The generator maps (latent, eta, mass) to a twin-generator latent
    and a flight time, so every sample decodes to a full design. Besides
    the adversarial loss it pays ``accel_weight`` times a quadratic
    penalty whenever the frozen acceleration surrogate predicts a peak
    above ``accel_limit_g``. The twin generators and the surrogate stay
    frozen the whole time; they shape gradients, never receive them.
    """

    latent_dim: int
    conditional = True

    def __init__(self, latent_dim=3, g_hidden=(125, 256, 512, 1024),
                 d_hidden=(1024, 512, 256), lr=2e-4, beta1=0.5,
                 epochs=60, batch_size=107, seed=0, accel_weight=10.0,
                 accel_limit_g=0.3, probe_draws=1500):
        self.latent_dim = latent_dim
        self.g_hidden = g_hidden
        self.d_hidden = d_hidden
        self.lr = lr
        self.beta1 = beta1
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.accel_weight = accel_weight
        self.accel_limit_g = accel_limit_g
        self.probe_draws = probe_draws

    # ---- conditioning helpers

    def _cond(self, eta, mass, n):
        cols = np.column_stack([np.broadcast_to(eta, n),
                                np.broadcast_to(mass, n)])
        return (cols - self.cond_mean_) / self.cond_scale_

    def _t_std(self, t):
        return (t - self.t_mean_) / self.t_scale_

    def _g_forward(self, z, cond, training, cache=True):
        out = self.g_con_.forward(np.hstack([z, cond]), training=training,
                                  cache=cache)
        z_t = out[:, :3]
        t = T_BOUNDS[0] + (T_BOUNDS[1] - T_BOUNDS[0]) * out[:, 3]
        return z_t, t

    def fit(self, feasible: FeasibleSet, twin_gan: TwinGAN, surrogates):
        scaler = StandardScaler().fit(
            np.column_stack([feasible.t, feasible.eta, feasible.mass]))
        self.t_mean_, self.cond_mean_ = scaler.mean_[0], scaler.mean_[1:]
        self.t_scale_, self.cond_scale_ = scaler.scale_[0], scaler.scale_[1:]

        # Frozen copies: training must leave the originals untouched and
        # the copies bit-identical, which the tests check.
        self.twin_power_ = copy.deepcopy(twin_gan.g_power_)
        self.twin_wing_ = copy.deepcopy(twin_gan.g_wing_)
        self.twin_power_.freeze()
        self.twin_wing_.freeze()
        accel_model = surrogates.series["accel_g"]
        self.accel_net_ = copy.deepcopy(accel_model.net_)
        self.accel_net_.freeze()
        self._accel_mean = accel_model.in_scaler_.mean_.copy()
        self._accel_scale = accel_model.in_scaler_.scale_.copy()
        self._accel_lo = accel_model.out_lo_
        self._accel_hi = accel_model.out_hi_
        self._accel_steps = len(accel_model.grid_indices())

        rng = np.random.default_rng(self.seed)
        self.g_con_ = mlp([self.latent_dim + 2, *self.g_hidden, 4],
                          hidden_activation="leaky_relu",
                          out_activation="sigmoid", batch_norm=True,
                          rng=rng, name="g_con")
        self.disc_ = mlp([CURVE_DIM + 3, *self.d_hidden, 1],
                         hidden_activation="leaky_relu",
                         out_activation="linear", rng=rng, name="d_designs")
        opt_g = Adam(self.g_con_.parameters(), lr=self.lr, beta1=self.beta1)
        opt_d = Adam(self.disc_.parameters(), lr=self.lr, beta1=self.beta1)

        real = np.hstack([feasible.power_cp, feasible.wing_cp,
                          self._t_std(feasible.t)[:, None],
                          self._cond(feasible.eta, feasible.mass,
                                     len(feasible))])
        n = len(real)
        batch = min(self.batch_size, n)
        span = T_BOUNDS[1] - T_BOUNDS[0]

        self.baseline_coverage_ = coverage(twin_gan, surrogates,
                                           n_draws=self.probe_draws,
                                           seed=self.seed + 7).pct
        self.coverage_history_ = []
        self.penalty_history_ = []
        self.d_accuracy_ = []
        best_state, best_cov, best_epoch = None, -1.0, -1

        for epoch in range(self.epochs):
            perm = rng.permutation(n)
            correct = total = 0
            penalties = []
            for start in range(0, n - batch + 1, batch):
                rows = perm[start:start + batch]
                real_b = real[rows]
                cond_b = real_b[:, CURVE_DIM + 1:]

                self.disc_.zero_grad()
                logit_r = self.disc_.forward(real_b, training=True)
                loss_r, dl = bce_with_logits(logit_r,
                                             np.ones_like(logit_r))
                self.disc_.backward(dl)
                z = rng.random((batch, self.latent_dim))
                z_t, t = self._g_forward(z, cond_b, training=True,
                                         cache=False)
                fp = self.twin_power_.forward(z_t, cache=False)
                fw = self.twin_wing_.forward(z_t, cache=False)
                fake_b = np.hstack([fp, fw, self._t_std(t)[:, None],
                                    cond_b])
                logit_f = self.disc_.forward(fake_b, training=True)
                loss_f, dl = bce_with_logits(logit_f,
                                             np.zeros_like(logit_f))
                self.disc_.backward(dl)
                opt_d.step()
                correct += int((logit_r > 0).sum() + (logit_f <= 0).sum())
                total += 2 * batch

                # Generator step. Two gradient paths meet at the output
                # of g_con: the discriminator through the frozen twins
                # and the t column, and the acceleration penalty through
                # the frozen surrogate.
                self.g_con_.zero_grad()
                z = rng.random((batch, self.latent_dim))
                z_t, t = self._g_forward(z, cond_b, training=True)
                fp = self.twin_power_.forward(z_t)
                fw = self.twin_wing_.forward(z_t)
                fake_b = np.hstack([fp, fw, self._t_std(t)[:, None],
                                    cond_b])
                logit = self.disc_.forward(fake_b, training=False)
                loss_g, dl = bce_with_logits(logit, np.ones_like(logit))
                dfake = self.disc_.backward(dl)
                d_zt = self.twin_power_.backward(dfake[:, :N_CONTROL])
                d_zt += self.twin_wing_.backward(
                    dfake[:, N_CONTROL:CURVE_DIM])
                d_t = dfake[:, CURVE_DIM] / self.t_scale_

                eta_b = cond_b[:, 0] * self.cond_scale_[0] \
                    + self.cond_mean_[0]
                mass_b = cond_b[:, 1] * self.cond_scale_[1] \
                    + self.cond_mean_[1]
                lam, d_zt_pen, d_t_pen = self._penalty_backward(
                    z_t, eta_b, mass_b, t)
                penalties.append(lam)

                d_out = np.empty((batch, 4))
                d_out[:, :3] = d_zt + self.accel_weight * d_zt_pen
                d_out[:, 3] = (d_t + self.accel_weight * d_t_pen) * span
                self.g_con_.backward(d_out)
                opt_g.step()

                if not np.isfinite(loss_g + loss_r + loss_f + lam):
                    raise TrainingDiverged(epoch, float(loss_g))

            self.penalty_history_.append(float(np.mean(penalties)))
            self.d_accuracy_.append(correct / total)
            cov = coverage(self, surrogates, n_draws=self.probe_draws,
                           seed=self.seed + 1000 + epoch).pct
            self.coverage_history_.append(cov)
            if cov > best_cov:
                best_cov = cov
                best_epoch = epoch
                best_state = {k: v.copy() for k, v in
                              self.g_con_.state_arrays().items()}
            log.info("epoch %d: coverage %.1f%%, penalty %.3g, "
                     "d-accuracy %.2f", epoch, cov,
                     self.penalty_history_[-1], self.d_accuracy_[-1])

        self.g_con_.load_state_arrays(best_state)
        self.best_epoch_ = best_epoch
        self.best_coverage_ = best_cov
        if best_cov <= self.baseline_coverage_:
            warnings.warn(
                f"conditioned generator coverage ({best_cov:.1f}%) never "
                "exceeded the unconditioned baseline "
                f"({self.baseline_coverage_:.1f}%)")
        return self

    def _penalty_backward(self, z_t, eta, mass, t):
        """Mean peak-acceleration penalty and its input gradients.

        Runs the frozen acceleration surrogate forward, applies the
        quadratic hinge to the per-sample series maximum, and routes the
        gradient back through the peak step, the recurrent stack, and
        the input standardization.
        """
        x = np.column_stack([z_t, eta, mass, t])
        xn = (x - self._accel_mean) / self._accel_scale
        seq = np.repeat(xn[:, None, :], self._accel_steps, axis=1)
        pred = self.accel_net_.forward(seq, cache=True)[:, :, 0]
        series = pred * (self._accel_hi - self._accel_lo) + self._accel_lo
        peak_idx = series.argmax(axis=1)
        a_max = series[np.arange(len(series)), peak_idx]
        lam, d_amax = accel_penalty(a_max, self.accel_limit_g)
        d_pred = np.zeros_like(pred)
        d_pred[np.arange(len(series)), peak_idx] = \
            d_amax * (self._accel_hi - self._accel_lo)
        d_seq = self.accel_net_.backward(d_pred[:, :, None])
        d_x = d_seq.sum(axis=1) / self._accel_scale
        return lam, d_x[:, :3], d_x[:, 5]

    def generate(self, z, eta, mass):
        """Twin latent and flight time for latent rows and conditions."""
        z = check_array(z, "z", ndim=2, shape=(None, self.latent_dim))
        cond = self._cond(eta, mass, len(z))
        return self._g_forward(z, cond, training=False, cache=False)

    def decode(self, z, eta, mass):
        """Full design (power_cp, wing_cp, t) for latent rows."""
        z_t, t = self.generate(z, eta, mass)
        power = self.twin_power_.forward(z_t, cache=False)
        wing = self.twin_wing_.forward(z_t, cache=False)
        return power, wing, t

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_network(self.g_con_, directory / "g_con.npz")
        save_network(self.disc_, directory / "d_designs.npz")
        save_network(self.twin_power_, directory / "twin_power.npz")
        save_network(self.twin_wing_, directory / "twin_wing.npz")
        save_network(self.accel_net_, directory / "accel_net.npz")
        meta = {"params": self.get_params(),
                "t_mean": self.t_mean_, "t_scale": self.t_scale_,
                "cond_mean": self.cond_mean_.tolist(),
                "cond_scale": self.cond_scale_.tolist(),
                "accel_mean": self._accel_mean.tolist(),
                "accel_scale": self._accel_scale.tolist(),
                "accel_lo": self._accel_lo, "accel_hi": self._accel_hi,
                "accel_steps": self._accel_steps,
                "best_epoch": self.best_epoch_,
                "best_coverage": self.best_coverage_,
                "baseline_coverage": self.baseline_coverage_,
                "coverage_history": self.coverage_history_,
                "penalty_history": self.penalty_history_,
                "d_accuracy": self.d_accuracy_}
        (directory / "manifest.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "manifest.json").read_text())
        params = {k: tuple(v) if isinstance(v, list) else v
                  for k, v in meta["params"].items()}
        model = cls(**params)
        model.g_con_ = load_network(directory / "g_con.npz")
        model.disc_ = load_network(directory / "d_designs.npz")
        model.twin_power_ = load_network(directory / "twin_power.npz")
        model.twin_wing_ = load_network(directory / "twin_wing.npz")
        model.accel_net_ = load_network(directory / "accel_net.npz")
        model.t_mean_ = meta["t_mean"]
        model.t_scale_ = meta["t_scale"]
        model.cond_mean_ = np.array(meta["cond_mean"])
        model.cond_scale_ = np.array(meta["cond_scale"])
        model._accel_mean = np.array(meta["accel_mean"])
        model._accel_scale = np.array(meta["accel_scale"])
        model._accel_lo = meta["accel_lo"]
        model._accel_hi = meta["accel_hi"]
        model._accel_steps = meta["accel_steps"]
        model.best_epoch_ = meta["best_epoch"]
        model.best_coverage_ = meta["best_coverage"]
        model.baseline_coverage_ = meta["baseline_coverage"]
        model.coverage_history_ = meta["coverage_history"]
        model.penalty_history_ = meta["penalty_history"]
        model.d_accuracy_ = meta["d_accuracy"]
        return model


@dataclass(frozen=True)
class CoverageReport:
    """Monte Carlo feasibility fraction with its sampling error."""

    pct: float
    accel_pct: float
    n_draws: int
    conditional: bool

    @property
    def se_pct(self):
        """One-sigma binomial standard error, in percentage points."""
        p = self.pct / 100.0
        return 100.0 * np.sqrt(p * (1.0 - p) / self.n_draws)


def coverage(model, surrogates, *, n_draws=None, seed=0,
             requirements: Requirements = DEFAULT_REQUIREMENTS):
    """Fraction of random designs that satisfy all five constraints.

    Latents are uniform; conditions (eta, mass) are uniform over the
    design box. The unconditioned model also draws its flight time
    uniformly because nothing in it chooses one. ``accel_pct`` counts
    designs meeting just the acceleration ceiling, which is the one
    constraint the conditioned generator is explicitly penalized on.
    """
    if n_draws is None:
        n_draws = 10_000 * model.latent_dim
    rng = np.random.default_rng(np.random.SeedSequence([seed, 29]))
    eta, mass = _draw_conditions(rng, n_draws)
    z = rng.random((n_draws, model.latent_dim))
    if getattr(model, "conditional", False):
        z_t, t = model.generate(z, eta, mass)
    else:
        z_t = z
        t = rng.uniform(T_BOUNDS[0], T_BOUNDS[1], n_draws)
    pred = surrogates.predict_scalars(z_t, eta, mass, t)
    margins = margins_from_scalars(pred["x_f"], pred["y_f"], pred["vx_f"],
                                   pred["y_min"], pred["a_max"],
                                   requirements)
    ok = np.all(margins >= 0.0, axis=-1)
    accel_ok = margins[:, 4] >= 0.0
    return CoverageReport(pct=100.0 * ok.mean(),
                          accel_pct=100.0 * accel_ok.mean(),
                          n_draws=n_draws,
                          conditional=bool(getattr(model, "conditional",
                                                   False)))


@dataclass
class FitReport:
    """How well a generator reproduces given curve pairs."""

    power_pct: float
    wing_pct: float
    n_records: int
    n_failed: int
    per_record: np.ndarray = field(repr=False)

    @property
    def mean_pct(self):
        return 0.5 * (self.power_pct + self.wing_pct)


def fitting_accuracy(model, power_cp, wing_cp, *, eta=None, mass=None,
                     budget=500, n_restarts=2, seed=0):
    """Best-latent reproduction accuracy, one local search per record.

    For each target pair the model's latent box is searched for the
    point whose generated curves are closest in total absolute
    difference. Accuracy per curve is 100 (1 - |error| / |target|),
    averaged over records. Records whose search returns non-finite
    curves are dropped and counted in ``n_failed``.
    """
    power_cp = check_array(power_cp, "power_cp", ndim=2,
                           shape=(None, N_CONTROL))
    wing_cp = check_array(wing_cp, "wing_cp", ndim=2,
                          shape=(None, N_CONTROL))
    conditional = getattr(model, "conditional", False)
    if conditional and (eta is None or mass is None):
        raise ValueError("a conditioned model needs eta and mass per record")
    n = len(power_cp)
    bounds = np.zeros((model.latent_dim, 2))
    bounds[:, 1] = 1.0

    scores = np.full((n, 2), np.nan)
    n_failed = 0
    for i in range(n):
        target = np.hstack([power_cp[i], wing_cp[i]])

        if conditional:
            def curves(z):
                p, w, _ = model.decode(z, eta[i], mass[i])
                return p, w
        else:
            def curves(z):
                return model.generate(z)

        def batch_objective(points):
            p, w = curves(points)
            return np.abs(np.hstack([p, w]) - target).sum(axis=1)

        problem = OptProblem(bounds=bounds, batch_objective=batch_objective,
                             budget=budget, seed=seed + i)
        res = local_search_powell(problem, n_restarts=n_restarts)
        p, w = curves(res.x[None, :])
        if not (np.isfinite(p).all() and np.isfinite(w).all()):
            n_failed += 1
            continue
        p_err = np.abs(p[0] - power_cp[i]).sum()
        w_err = np.abs(w[0] - wing_cp[i]).sum()
        scores[i, 0] = 100.0 * (1.0 - p_err / np.abs(power_cp[i]).sum())
        scores[i, 1] = 100.0 * (1.0 - w_err / np.abs(wing_cp[i]).sum())

    fitted = scores[np.isfinite(scores).all(axis=1)]
    if not len(fitted):
        raise RuntimeError("every fitting search failed")
    if n_failed:
        log.warning("fitting accuracy: %d of %d records failed", n_failed, n)
    return FitReport(power_pct=float(fitted[:, 0].mean()),
                     wing_pct=float(fitted[:, 1].mean()),
                     n_records=n, n_failed=n_failed, per_record=scores)
