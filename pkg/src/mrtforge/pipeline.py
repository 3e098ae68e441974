"""End-to-end workflow: ingest, clean, featurise, train, evaluate, predict.

The CLI is a thin layer over these functions; tests call them directly.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import FLUX_COLS, Dataset, impute_missing, ingest_csv, remove_outliers, write_csv
from .features import (FeatureError, FeatureSet, FeatureToggles, assemble, extract_image_features,
                       read_embeddings, read_image_features, write_image_features)
from .metrics import MetricsReport, UndefinedMetric, compute_metrics, shade_accuracy
from .models import load_checkpoint, save_checkpoint
from .radiation import BodyRadiationProfile
from .training import (SearchSpace, TrainConfig, cross_validate, predict_features,
                       random_search, train)

log = logging.getLogger(__name__)

PRED_COLUMNS = ("image_id", "date", "time", *(f"{c}_pred" for c in FLUX_COLS),
                "tmrt_pred", "tmrt_C")


@dataclass
class ImageSource:
    """Where image features come from; recorded in checkpoints for later scoring."""
    image_dir: str | None = None
    mask_dir: str | None = None
    embeddings: str | None = None
    features: str | None = None
    fisheye_size: int = 512

    def to_dict(self):
        return dict(self.__dict__)


def needs_images(toggles: FeatureToggles) -> bool:
    return toggles.use_images or toggles.use_predicted_shade


def load_image_features(ds: Dataset, toggles: FeatureToggles, src: ImageSource,
                        cubes=None) -> dict:
    """Image features per image_id, or {} when the toggles need none."""
    if not needs_images(toggles):
        return {}
    if src.embeddings and toggles.use_images:
        if toggles.use_predicted_shade:
            raise FeatureError("predicted shade needs sky features, not external embeddings")
        return read_embeddings(src.embeddings)
    feats = {}
    if src.features and Path(src.features).is_file():
        feats = read_image_features(src.features)
    todo = Dataset([r for r in ds.records if r.image_id not in feats])
    if len(todo):
        if src.image_dir is None and src.mask_dir is None and cubes is None:
            missing = sorted({r.image_id for r in todo.records})[:5]
            raise FeatureError(f"no image source for image ids such as {missing}")
        feats.update(extract_image_features(todo, src.image_dir, src.mask_dir,
                                            src.fisheye_size, cubes))
    return feats


def prepare(cfg: RunConfig) -> tuple:
    """Ingest the configured CSV, impute and drop outliers; returns (Dataset, report)."""
    ds = ingest_csv(cfg.data, cfg.image_dir)
    report = {"ingested": len(ds), "rejected": [(e.row, e.rule) for e in ds.rejected]}
    if cfg.impute:
        ds = impute_missing(ds)
        report["imputation"] = ds.notes["imputation"]
    if cfg.remove_outliers and len(ds) >= 10:
        ds = remove_outliers(ds)
        report["outliers"] = ds.notes["outliers"]
    report["kept"] = len(ds)
    return ds, report


def image_source(cfg: RunConfig) -> ImageSource:
    s = lambda p: None if p is None else str(p)  # noqa: E731
    return ImageSource(s(cfg.image_dir), s(cfg.mask_dir), s(cfg.embeddings), s(cfg.features),
                       cfg.fisheye_size)


def _write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "train_rmse", "val_rmse"],
                           lineterminator="\n")
        w.writeheader()
        for h in history:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in h.items()})


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


@dataclass
class RunOutputs:
    metrics: dict
    checkpoint: Path | None = None
    extra: dict = field(default_factory=dict)


def run_training(cfg: RunConfig, cubes=None) -> RunOutputs:
    """Full ``train`` command: writes checkpoint, history and metrics into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds, prep = prepare(cfg)
    src = image_source(cfg)
    feats = load_image_features(ds, cfg.toggles, src, cubes)
    if feats and not cfg.embeddings:
        write_image_features(out / "image_features.csv", feats)
        src.features = str(out / "image_features.csv")
    fs = assemble(ds, cfg.toggles, feats)
    _dump(out / "preprocess.json", prep)
    tc = cfg.train
    if cfg.mode == "cv":
        cv = cross_validate(fs, tc)
        _dump(out / "cv.json", cv)
        return RunOutputs(cv, extra={"cv": cv})
    if cfg.mode == "search":
        space = SearchSpace(trials=cfg.search_trials)
        report = random_search(fs, space, tc, include_incumbent=True)
        _dump(out / "search.json", [{k: r[k] for k in ("name", "score", "config")} for r in report])
        return RunOutputs({"best": report[0]["name"], "score": report[0]["score"]},
                          extra={"search": report})
    res = train(fs, tc, profile=cfg.profile)
    _write_history(out / "history.csv", res.history)
    metrics = res.val_metrics.to_dict()
    if cfg.toggles.use_images or cfg.toggles.use_predicted_shade:
        metrics["shade_accuracy"] = _shade_acc(fs.subset(res.val_idx), ds.subset(res.val_idx), feats)
    _dump(out / "metrics.json", metrics)
    val = ds.subset(res.val_idx)
    write_csv(out / "validation.csv", val.records)
    ck = out / "checkpoint.json"
    save_checkpoint(ck, res.model, {"toggles": cfg.toggles.to_dict(), "names": fs.names,
                                    "images": src.to_dict()},
                    {"train_config": tc.to_dict(), "best_epoch": res.best_epoch,
                     "val_idx": res.val_idx.tolist()})
    return RunOutputs(metrics, ck, {"result": res, "features": fs})


def _shade_acc(fs: FeatureSet, ds: Dataset, feats: dict):
    pairs = [(feats[r.image_id].predicted_shade, r.shade) for r in ds.records
             if r.shade is not None and r.image_id in feats
             and hasattr(feats[r.image_id], "predicted_shade") and r.solar.altitude_deg > 0]
    if not pairs:
        return None
    p, t = zip(*pairs)
    return shade_accuracy(p, t)


def _load_for_scoring(checkpoint, data, overrides: ImageSource | None = None,
                      require_labels=True):
    model, fcfg, _ = load_checkpoint(checkpoint)
    toggles = FeatureToggles(**fcfg["toggles"])
    src = ImageSource(**fcfg["images"])
    if overrides is not None:
        for k, v in overrides.to_dict().items():
            if v is not None and k != "fisheye_size":
                setattr(src, k, v)
    ds = ingest_csv(data)
    if ds.rejected:
        e = ds.rejected[0]
        raise FeatureError(f"{len(ds.rejected)} row(s) rejected; first: row {e.row}: {e.rule}")
    if not len(ds):
        raise FeatureError("no rows to score")
    feats = load_image_features(ds, toggles, src)
    fs = assemble(ds, toggles, feats, require_labels=require_labels)
    if fs.names != list(fcfg["names"]):
        raise FeatureError("feature layout of the data does not match the checkpoint")
    return model, ds, fs, feats


def evaluate(checkpoint, data, overrides=None) -> dict:
    model, ds, fs, feats = _load_for_scoring(checkpoint, data, overrides)
    pred = predict_features(model, fs)["tmrt"]
    try:
        report = compute_metrics(fs.tmrt, pred)
    except UndefinedMetric as exc:
        report = exc.report
    out = report.to_dict()
    if feats:
        out["shade_accuracy"] = _shade_acc(fs, ds, feats)
    return out


def predict_rows(checkpoint, data, overrides=None) -> list:
    model, ds, fs, _ = _load_for_scoring(checkpoint, data, overrides, require_labels=False)
    p = predict_features(model, fs)
    rows = []
    for i, rec in enumerate(ds.records):
        row = {"image_id": rec.image_id or "", "date": rec.date, "time": rec.time}
        for j, c in enumerate(FLUX_COLS):
            if p["S"] is None:
                row[f"{c}_pred"] = ""
            else:
                v = p["S"][i, j] if j < 6 else p["L"][i, j - 6]
                row[f"{c}_pred"] = repr(float(v))
        row["tmrt_pred"] = repr(float(p["tmrt"][i]))
        row["tmrt_C"] = "" if rec.tmrt_C is None else repr(rec.tmrt_C)
        rows.append(row)
    return rows


def write_predictions(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PRED_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_predictions(path):
    """(observed, predicted) arrays from a predictions CSV; rows without observations skipped."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "tmrt_pred" not in reader.fieldnames:
            raise ValueError("predictions file needs a tmrt_pred column")
        obs, pred = [], []
        for row in reader:
            if row.get("tmrt_C"):
                obs.append(float(row["tmrt_C"]))
                pred.append(float(row["tmrt_pred"]))
    return np.array(obs), np.array(pred)


def shade_benchmark(n_scenes=200, seed=2024, face_size=128, fisheye_size=512) -> dict:
    """Shade accuracy of the sky-mask sun test on ``n_scenes`` daytime synthetic scenes.

    Truth is the analytic beam occlusion of each scene (see :func:`synth.shade_scene`).
    """
    from .fisheye import cube_to_fisheye
    from .sky import predict_shade, segment_sky
    from .synth import shade_scene

    pred, truth = [], []
    for i in range(n_scenes):
        sp, shaded, cube = shade_scene(seed, i, face_size)
        pred.append(predict_shade(segment_sky(cube_to_fisheye(cube, fisheye_size)), sp).predicted_shade)
        truth.append(shaded)
    return {"n": n_scenes, "accuracy": shade_accuracy(pred, truth), "shaded": int(sum(truth))}
