"""Physics-informed and baseline T_mrt regressors.

The physics-informed model has two heads. The shortwave head sees image
features plus metadata, the longwave head sees metadata only; each emits six
raw values that a scaled softplus turns into non-negative fluxes. T_mrt is then
computed from the fluxes with the six-directional radiation balance, so it is
consistent with the emitted fluxes by construction.

The baseline model is a single fused MLP regressing standardised T_mrt.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .nn import MLP, MlpSpec, sigmoid, softplus
from .radiation import KELVIN, Q_FLOOR, BodyRadiationProfile, dtmrt_dq

CHECKPOINT_VERSION = 1
DEFAULT_FLUX_SCALE = 100.0  # W m-2 per softplus unit
DEFAULT_FLUX_UNIT = 100.0   # W m-2; flux errors are measured in this unit in the loss


class CheckpointError(ValueError):
    pass


@dataclass
class Batch:
    X: np.ndarray                   # normalised features (n, d)
    tmrt: np.ndarray                # labels, degC (n,)
    fluxes: np.ndarray | None = None  # (n, 12) W m-2, NaN rows = unlabelled
    night: np.ndarray | None = None   # (n,) bool, sun at or below horizon

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.tmrt = np.asarray(self.tmrt, dtype=np.float64)
        n = self.X.shape[0]
        if n == 0:
            raise ValueError("empty batch")
        if self.tmrt.shape != (n,):
            raise ValueError("tmrt labels must match the number of rows")
        if self.fluxes is not None:
            self.fluxes = np.asarray(self.fluxes, dtype=np.float64)
        if self.night is None:
            self.night = np.zeros(n, dtype=bool)
        self.night = np.asarray(self.night, dtype=bool)

    def __len__(self):
        return self.X.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(self.X[idx], self.tmrt[idx],
                     None if self.fluxes is None else self.fluxes[idx], self.night[idx])


@dataclass
class LossWeights:
    tmrt: float = 1.0
    flux: float = 0.1
    night: float = 0.1

    def __post_init__(self):
        if min(self.tmrt, self.flux, self.night) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def __call__(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


class PinnModel:
    kind = "pinn"

    def __init__(self, feature_names, sw_cols, lw_cols, hidden_dims=(128, 256, 128),
                 profile=BodyRadiationProfile(), flux_scale=DEFAULT_FLUX_SCALE,
                 seed=0, normalizer=None, flux_unit=DEFAULT_FLUX_UNIT):
        self.feature_names = list(feature_names)
        self.flux_unit = float(flux_unit)
        self.sw_cols = np.asarray(sw_cols, dtype=np.intp)
        self.lw_cols = np.asarray(lw_cols, dtype=np.intp)
        if len(self.lw_cols) == 0 or len(self.sw_cols) == 0:
            raise ValueError("both heads need at least one input feature")
        self.profile = profile
        self.flux_scale = float(flux_scale)
        self.seed = seed
        self.normalizer = normalizer
        rng = np.random.default_rng(seed)
        self.sw = MLP(MlpSpec(len(self.sw_cols), 6, list(hidden_dims)), rng)
        self.lw = MLP(MlpSpec(len(self.lw_cols), 6, list(hidden_dims)), rng)

    @property
    def input_dim(self):
        return len(self.feature_names)

    @property
    def params(self):
        return self.sw.params + self.lw.params

    def set_output_bias(self, shortwave, longwave):
        """Start the heads near given mean fluxes (W m-2)."""
        for head, f in ((self.sw, shortwave), (self.lw, longwave)):
            y = np.maximum(np.asarray(f, dtype=np.float64) / self.flux_scale, 1e-4)
            head.params[-1][:] = y + np.log(-np.expm1(-y))  # inverse softplus

    def _check(self, X):
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected features of shape (n, {self.input_dim}), got {X.shape}")

    def _forward(self, X):
        self._check(X)
        rs, cs = self.sw.forward(X[:, self.sw_cols])
        rl, cl = self.lw.forward(X[:, self.lw_cols])
        S = self.flux_scale * softplus(rs)
        L = self.flux_scale * softplus(rl)
        w = self.profile.weights
        Q = (self.profile.a_k * S + self.profile.a_l * L) @ w
        Qc = np.maximum(Q, Q_FLOOR)
        T = (Qc / (self.profile.a1 * self.profile.sigma)) ** 0.25 - KELVIN
        return {"S": S, "L": L, "Q": Q, "T": T, "rs": rs, "rl": rl, "cs": cs, "cl": cl}

    def predict(self, X):
        """Return dict with ``S`` (n, 6), ``L`` (n, 6) and ``tmrt`` (n,) for normalised X."""
        out = self._forward(np.asarray(X, dtype=np.float64))
        return {"S": out["S"], "L": out["L"], "tmrt": out["T"]}

    def loss(self, batch: Batch, weights: LossWeights = LossWeights(), grad=False):
        """Weighted T_mrt MSE + flux MSE + night shortwave penalty.

        Flux errors are measured in units of ``flux_unit``; the night term is
        the mean over night rows of the summed squared shortwave (W m-2)^2.
        Returns ``(total, components)`` or ``(total, components, grads)``.
        """
        out = self._forward(batch.X)
        n = len(batch)
        S, L, T = out["S"], out["L"], out["T"]
        err_t = T - batch.tmrt
        comp = {"tmrt": float(np.mean(err_t ** 2)), "flux": 0.0, "night": 0.0}
        dT = weights.tmrt * 2.0 * err_t / n
        dS = np.zeros_like(S)
        dL = np.zeros_like(L)

        if batch.fluxes is not None and weights.flux > 0:
            lab = ~np.isnan(batch.fluxes).any(axis=1)
            m = int(lab.sum())
            if m:
                pred = np.concatenate([S, L], axis=1)[lab]
                diff = (pred - batch.fluxes[lab]) / self.flux_unit
                comp["flux"] = float(np.mean(diff ** 2))
                g = weights.flux * 2.0 * diff / (m * 12 * self.flux_unit)
                dS[lab] += g[:, :6]
                dL[lab] += g[:, 6:]
        night = batch.night
        k = int(night.sum())
        if k and weights.night > 0:
            comp["night"] = float(np.sum(S[night] ** 2) / k)
            dS[night] += weights.night * 2.0 * S[night] / k

        total = (weights.tmrt * comp["tmrt"] + weights.flux * comp["flux"]
                 + weights.night * comp["night"])
        if not grad:
            return total, comp
        p = self.profile
        dQ = dT * dtmrt_dq(np.maximum(out["Q"], Q_FLOOR), p) * (out["Q"] >= Q_FLOOR)
        w = p.weights
        dS += dQ[:, None] * (p.a_k * w)
        dL += dQ[:, None] * (p.a_l * w)
        drs = dS * self.flux_scale * sigmoid(out["rs"])
        drl = dL * self.flux_scale * sigmoid(out["rl"])
        grads = self.sw.backward(out["cs"], drs) + self.lw.backward(out["cl"], drl)
        return total, comp, grads

    def to_dict(self):
        return {
            "kind": self.kind,
            "feature_names": self.feature_names,
            "sw_cols": self.sw_cols.tolist(),
            "lw_cols": self.lw_cols.tolist(),
            "sw_spec": self.sw.spec.to_dict(),
            "lw_spec": self.lw.spec.to_dict(),
            "flux_scale": self.flux_scale,
            "flux_unit": self.flux_unit,
            "profile": self.profile.to_dict(),
            "seed": self.seed,
            "params": {"sw": [p.tolist() for p in self.sw.params],
                       "lw": [p.tolist() for p in self.lw.params]},
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(d["feature_names"], d["sw_cols"], d["lw_cols"], d["sw_spec"]["hidden_dims"],
                BodyRadiationProfile(**d["profile"]), d["flux_scale"], d["seed"],
                flux_unit=d["flux_unit"])
        m.sw = MLP(MlpSpec(**d["sw_spec"]), params=d["params"]["sw"])
        m.lw = MLP(MlpSpec(**d["lw_spec"]), params=d["params"]["lw"])
        return m


class BaselineModel:
    kind = "baseline"

    def __init__(self, feature_names, hidden_dims=(128, 256, 128), seed=0,
                 target_mean=0.0, target_std=1.0, normalizer=None):
        self.feature_names = list(feature_names)
        self.seed = seed
        self.target_mean = float(target_mean)
        self.target_std = float(target_std)
        self.normalizer = normalizer
        self.net = MLP(MlpSpec(len(self.feature_names), 1, list(hidden_dims)),
                       np.random.default_rng(seed))

    @property
    def input_dim(self):
        return len(self.feature_names)

    @property
    def params(self):
        return self.net.params

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected features of shape (n, {self.input_dim}), got {X.shape}")
        y = self.net(X)[:, 0]
        return {"S": None, "L": None, "tmrt": self.target_mean + self.target_std * y}

    def loss(self, batch: Batch, weights: LossWeights = LossWeights(), grad=False):
        """Plain MSE on T_mrt (degC^2); gradients via the standardised output."""
        out, cache = self.net.forward(batch.X)
        T = self.target_mean + self.target_std * out[:, 0]
        err = T - batch.tmrt
        mse = float(np.mean(err ** 2))
        comp = {"tmrt": mse, "flux": 0.0, "night": 0.0}
        total = weights.tmrt * mse
        if not grad:
            return total, comp
        dout = (weights.tmrt * 2.0 * err / len(batch) * self.target_std)[:, None]
        return total, comp, self.net.backward(cache, dout)

    def to_dict(self):
        return {"kind": self.kind, "feature_names": self.feature_names,
                "spec": self.net.spec.to_dict(), "seed": self.seed,
                "target_mean": self.target_mean, "target_std": self.target_std,
                "params": [p.tolist() for p in self.net.params]}

    @classmethod
    def from_dict(cls, d):
        m = cls(d["feature_names"], d["spec"]["hidden_dims"], d["seed"],
                d["target_mean"], d["target_std"])
        m.net = MLP(MlpSpec(**d["spec"]), params=d["params"])
        return m


def save_checkpoint(path, model, feature_config: dict, extra: dict | None = None):
    """Write a JSON checkpoint; floats are serialised with full round-trip precision."""
    doc = {
        "format": "mrtforge-checkpoint",
        "version": CHECKPOINT_VERSION,
        "model": model.to_dict(),
        "normalizer": model.normalizer.to_dict() if model.normalizer is not None else None,
        "features": feature_config,
        "extra": extra or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Return (model, feature_config, extra); rejects unknown formats and versions."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != "mrtforge-checkpoint":
        raise CheckpointError("not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')} != {CHECKPOINT_VERSION}")
    md = doc["model"]
    cls = {"pinn": PinnModel, "baseline": BaselineModel}.get(md.get("kind"))
    if cls is None:
        raise CheckpointError(f"unknown model kind {md.get('kind')!r}")
    model = cls.from_dict(md)
    if doc.get("normalizer"):
        model.normalizer = Normalizer.from_dict(doc["normalizer"])
    return model, doc["features"], doc.get("extra", {})
