"""Training loop, data splits, k-fold cross-validation and random search.

All randomness flows from ``TrainConfig.seed`` through independent
``numpy.random.default_rng([seed, tag])`` streams, so runs are bit-reproducible
at a fixed BLAS thread count.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSet
from .metrics import MetricsReport, UndefinedMetric, compute_metrics
from .models import BaselineModel, Batch, LossWeights, Normalizer, PinnModel
from .radiation import BodyRadiationProfile

log = logging.getLogger(__name__)

MIN_TRAIN_ROWS = 50


class ConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, lr):
        self.epoch, self.lr = epoch, lr
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch} with lr={lr}")


@dataclass
class TrainConfig:
    model: str = "pinn"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    lambda_t: float = 1.0
    lambda_f: float = 0.1
    lambda_night: float = 0.1
    hidden_dims: tuple = (128, 256, 128)
    flux_scale: float = 100.0
    flux_unit: float = 100.0
    weight_decay: float = 0.3
    seed: int = 0
    k_folds: int = 3
    split: float = 0.8
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("pinn", "baseline"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if min(self.lambda_t, self.lambda_f, self.lambda_night) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be at least 2")
        if not 0 < self.split < 1:
            raise ConfigError("split must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, max_epochs and patience must be positive")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_t, self.lambda_f, self.lambda_night)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass
class TrainResult:
    model: object
    history: list
    train_idx: np.ndarray
    val_idx: np.ndarray
    val_metrics: MetricsReport | None = None
    best_epoch: int = 0


def split_indices(n, frac=0.8, seed=0):
    """Seeded train/validation split; returns sorted index arrays."""
    perm = np.random.default_rng([seed, 7]).permutation(n)
    n_train = int(round(frac * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def fold_indices(n, k, seed=0):
    """Seeded k-fold assignment; the first ``n % k`` folds get one extra row."""
    if k < 2:
        raise ConfigError("k must be at least 2")
    perm = np.random.default_rng([seed, 11]).permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    out, start = [], 0
    for s in sizes:
        out.append(np.sort(perm[start:start + s]))
        start += s
    return out


def _batch(fs: FeatureSet, norm: Normalizer) -> Batch:
    return Batch(norm(fs.X), fs.tmrt, fs.fluxes, fs.night)


def build_model(fs: FeatureSet, cfg: TrainConfig, norm: Normalizer, train_fs: FeatureSet,
                profile=BodyRadiationProfile()):
    if cfg.model == "baseline":
        return BaselineModel(fs.names, cfg.hidden_dims, cfg.seed, float(train_fs.tmrt.mean()),
                             float(train_fs.tmrt.std() or 1.0), norm)
    model = PinnModel(fs.names, fs.sw_cols, fs.lw_cols, cfg.hidden_dims, profile,
                      cfg.flux_scale, cfg.seed, norm, cfg.flux_unit)
    labelled = ~np.isnan(train_fs.fluxes).any(axis=1)
    if labelled.any():
        mean = train_fs.fluxes[labelled].mean(axis=0)
        model.set_output_bias(mean[:6], mean[6:])
    else:
        # uniform longwave field matching the mean label, no shortwave
        t = float(np.nanmean(train_fs.tmrt)) + 273.15
        l = profile.a1 * profile.sigma * t ** 4 / profile.a_l
        model.set_output_bias(np.full(6, 1e-2), np.full(6, l))
    return model


def fit(model, train: Batch, val: Batch | None, cfg: TrainConfig):
    """Mini-batch Adam with early stopping on validation RMSE.

    The best-scoring parameters are restored in place. Returns
    ``(history, best_epoch)``.
    """
    from .nn import Adam

    rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay,
               [p.ndim == 2 for p in model.params])
    weights = cfg.weights
    monitor = val if val is not None and len(val) else train
    best, best_epoch, wait = math.inf, 0, 0
    best_params = [p.copy() for p in model.params]
    history = []
    n = len(train)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.max_epochs + 1):
            perm = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                loss, _, grads = model.loss(train.take(idx), weights, grad=True)
                if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                    raise TrainingDiverged(epoch, cfg.lr)
                opt.step(grads)
                total += loss * len(idx)
            train_rmse = float(np.sqrt(np.mean((model.predict(train.X)["tmrt"] - train.tmrt) ** 2)))
            score = float(np.sqrt(np.mean((model.predict(monitor.X)["tmrt"] - monitor.tmrt) ** 2)))
            if not (np.isfinite(total) and np.isfinite(score)):
                raise TrainingDiverged(epoch, cfg.lr)
            history.append({"epoch": epoch, "train_loss": total / n, "train_rmse": train_rmse,
                            "val_rmse": score})
            if score < best:
                best, best_epoch, wait = score, epoch, 0
                best_params = [p.copy() for p in model.params]
            else:
                wait += 1
                if wait >= cfg.patience:
                    break
    for p, b in zip(model.params, best_params):
        p[...] = b
    return history, best_epoch


def _metrics(y, yhat):
    try:
        return compute_metrics(y, yhat)
    except UndefinedMetric as exc:
        return exc.report


def train(fs: FeatureSet, cfg: TrainConfig, train_idx=None, val_idx=None,
          profile=BodyRadiationProfile()) -> TrainResult:
    """Fit a model on ``train_idx`` rows, early-stopping on ``val_idx`` rows.

    Without indices, a seeded ``cfg.split`` train/validation split is used.
    Normalisation statistics come from the training rows only.
    """
    if train_idx is None:
        train_idx, val_idx = split_indices(len(fs), cfg.split, cfg.seed)
    train_idx = np.asarray(train_idx)
    val_idx = np.asarray(val_idx if val_idx is not None else [], dtype=np.intp)
    if len(train_idx) < MIN_TRAIN_ROWS:
        raise ConfigError(f"need at least {MIN_TRAIN_ROWS} training rows, got {len(train_idx)}")
    tr = fs.subset(train_idx)
    norm = Normalizer.fit(tr.X)
    model = build_model(fs, cfg, norm, tr, profile)
    val_batch = _batch(fs.subset(val_idx), norm) if len(val_idx) else None
    history, best_epoch = fit(model, _batch(tr, norm), val_batch, cfg)
    metrics = None
    if val_batch is not None:
        metrics = _metrics(val_batch.tmrt, model.predict(val_batch.X)["tmrt"])
    return TrainResult(model, history, train_idx, val_idx, metrics, best_epoch)


def train_baseline(fs: FeatureSet, cfg: TrainConfig, **kw) -> TrainResult:
    """Single fused MLP regressing T_mrt with plain MSE."""
    return train(fs, dataclasses.replace(cfg, model="baseline"), **kw)


def predict_features(model, fs: FeatureSet) -> dict:
    return model.predict(model.normalizer(fs.X))


def _run_fold(args):
    fs, cfg, tr, va = args
    res = train(fs, cfg, tr, va)
    return res.val_metrics.to_dict(), res.best_epoch


def cross_validate(fs: FeatureSet, cfg: TrainConfig) -> dict:
    """k-fold CV; each fold normalises with its own training rows.

    Returns ``{"folds": [...], "mean": {...}, "std": {...}}`` over rmse, r2,
    mape and mbe.
    """
    k = cfg.k_folds
    if len(fs) < 10 * k:
        raise ConfigError(f"cross-validation needs at least {10 * k} rows, got {len(fs)}")
    folds = fold_indices(len(fs), k, cfg.seed)
    if min(len(f) for f in folds) < cfg.batch_size:
        raise ConfigError(f"fold of {min(len(f) for f in folds)} rows is smaller than one batch "
                          f"({cfg.batch_size})")
    jobs = []
    for i in range(k):
        tr = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        jobs.append((fs, cfg, tr, folds[i]))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    per_fold = []
    for i, (m, best_epoch) in enumerate(results):
        m["fold"] = i
        m["best_epoch"] = best_epoch
        per_fold.append(m)
    keys = ("rmse", "r2", "mape", "mbe")
    mean = {key: float(np.mean([f[key] for f in per_fold])) for key in keys
            if all(f[key] is not None for f in per_fold)}
    std = {key: float(np.std([f[key] for f in per_fold])) for key in keys
           if all(f[key] is not None for f in per_fold)}
    return {"folds": per_fold, "mean": mean, "std": std, "fold_sizes": [len(f) for f in folds]}


@dataclass
class SearchSpace:
    lr: tuple = (1e-4, 1e-2)          # log-uniform
    widths: tuple = (64, 128, 256)
    depths: tuple = (2, 3, 4)
    batch_sizes: tuple = (16, 32, 64)
    lambda_f: tuple = (0.0, 1.0)      # uniform
    trials: int = 20

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not (self.widths and self.depths and self.batch_sizes):
            raise ConfigError("search space choices must be non-empty")
        if not (0 < self.lr[0] <= self.lr[1]) or self.lambda_f[0] > self.lambda_f[1]:
            raise ConfigError("invalid search ranges")

    def sample(self, rng, base: TrainConfig) -> TrainConfig:
        lo, hi = np.log(self.lr[0]), np.log(self.lr[1])
        lr = float(np.exp(rng.uniform(lo, hi)))
        depth = int(rng.choice(self.depths))
        hidden = tuple(int(rng.choice(self.widths)) for _ in range(depth))
        bs = int(rng.choice(self.batch_sizes))
        lf = float(rng.uniform(*self.lambda_f))
        return dataclasses.replace(base, lr=lr, hidden_dims=hidden, batch_size=bs, lambda_f=lf)


def random_search(fs: FeatureSet, space: SearchSpace, cfg: TrainConfig,
                  include_incumbent: bool = False) -> list:
    """Evaluate i.i.d. sampled configurations by k-fold mean RMSE, best first.

    With ``include_incumbent`` the unmodified ``cfg`` is scored on the same
    folds and listed as ``"incumbent"``.
    """
    rng = np.random.default_rng([cfg.seed, 99])
    candidates = [(f"trial{i:03d}", space.sample(rng, cfg)) for i in range(space.trials)]
    if include_incumbent:
        candidates.insert(0, ("incumbent", cfg))
    report = []
    for name, c in candidates:
        cv = cross_validate(fs, c)
        report.append({"name": name, "score": cv["mean"]["rmse"], "config": c.to_dict(),
                       "cv": cv})
        log.info("%s rmse=%.4f", name, cv["mean"]["rmse"])
    report.sort(key=lambda r: r["score"])
    return report


def grad_check(model, batch: Batch, weights: LossWeights = LossWeights(), h=1e-5,
               n_params=200, seed=0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples ``n_params`` parameter entries (all of them if fewer exist); the
    denominator is ``max(|analytic|, 1e-8)``.
    """
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-6, 1e-2]")
    _, _, grads = model.loss(batch, weights, grad=True)
    sizes = [p.size for p in model.params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in picks:
        a = int(np.searchsorted(offsets, flat, side="right") - 1)
        j = int(flat - offsets[a])
        p = model.params[a].reshape(-1)
        orig = p[j]
        p[j] = orig + h
        lp = model.loss(batch, weights)[0]
        p[j] = orig - h
        lm = model.loss(batch, weights)[0]
        p[j] = orig
        fd = (lp - lm) / (2 * h)
        g = grads[a].reshape(-1)[j]
        worst = max(worst, abs(g - fd) / max(abs(g), 1e-8))
    return worst
