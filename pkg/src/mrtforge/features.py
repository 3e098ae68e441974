"""Feature assembly for the regressors.

Metadata columns are weather, site altitude and solar geometry, optionally
followed by built-environment descriptors and a shade flag. Image columns are
the 34 handcrafted sky features (svf, predicted shade, 32 directional
fractions) or externally supplied embeddings. Ablations drop column groups.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import BUILT_COLS, FLUX_COLS, Dataset
from .fisheye import cube_to_fisheye, load_cube, read_png, FisheyeImage
from .sky import SkyFeatures, read_mask_png, segment_sky, sky_features

BASE_META = ("air_temp_C", "rh_pct", "wind_ms", "alt_m",
             "sun_altitude", "sun_azimuth_sin", "sun_azimuth_cos", "minutes_from_sunrise")
IMAGE_NAMES = ("img_svf", "img_shade") + tuple(f"img_sky_{o}_{b}" for o in range(8) for b in range(4))


class FeatureError(ValueError):
    pass


@dataclass
class FeatureToggles:
    use_images: bool = True
    use_measured_shade: bool = True
    use_predicted_shade: bool = False
    use_built_env: bool = True

    def __post_init__(self):
        if self.use_measured_shade and self.use_predicted_shade:
            raise FeatureError("measured and predicted shade are mutually exclusive")

    def to_dict(self):
        return asdict(self)


@dataclass
class FeatureSet:
    X: np.ndarray            # raw (unnormalised) features
    names: list
    sw_cols: list            # shortwave head inputs: image + metadata
    lw_cols: list            # longwave head inputs: metadata only
    tmrt: np.ndarray
    fluxes: np.ndarray       # (n, 12), NaN where unlabelled
    night: np.ndarray
    ids: list = field(default_factory=list)

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "FeatureSet":
        idx = np.asarray(idx)
        return FeatureSet(self.X[idx], self.names, self.sw_cols, self.lw_cols, self.tmrt[idx],
                          self.fluxes[idx], self.night[idx], [self.ids[i] for i in idx])


def meta_names(toggles: FeatureToggles) -> list:
    names = list(BASE_META)
    if toggles.use_built_env:
        names += list(BUILT_COLS)
    if toggles.use_measured_shade:
        names.append("shade_measured")
    if toggles.use_predicted_shade:
        names.append("shade_predicted")
    return names


def _value(rec, name, img: SkyFeatures | None):
    sp = rec.solar
    if name == "sun_altitude":
        return sp.altitude_deg
    if name == "sun_azimuth_sin":
        return math.sin(math.radians(sp.azimuth_deg))
    if name == "sun_azimuth_cos":
        return math.cos(math.radians(sp.azimuth_deg))
    if name == "minutes_from_sunrise":
        if sp.minutes_from_sunrise is None:
            raise FeatureError("minutes from sunrise undefined at polar latitudes")
        return sp.minutes_from_sunrise
    if name == "shade_measured":
        return None if rec.shade is None else float(rec.shade)
    if name == "shade_predicted":
        if img is None:
            raise FeatureError(f"record {rec.image_id!r}: predicted shade needs image features")
        return float(img.predicted_shade)
    return getattr(rec, name)


def assemble(ds: Dataset, toggles: FeatureToggles, image_features: dict | None = None,
             require_labels: bool = True) -> FeatureSet:
    """Build the raw feature matrix.

    ``image_features`` maps image_id to a :class:`SkyFeatures` or to a plain
    embedding vector; it is required when images or predicted shade are used.
    """
    image_features = image_features or {}
    meta = meta_names(toggles)
    rows, tmrt, fluxes, night, ids = [], [], [], [], []
    img_dim = None
    for rec in ds.records:
        img = image_features.get(rec.image_id)
        sky = img if isinstance(img, SkyFeatures) else None
        vals = []
        for name in meta:
            v = _value(rec, name, sky)
            if v is None:
                raise FeatureError(f"record {rec.image_id or rec.date + ' ' + rec.time}: missing {name}")
            vals.append(float(v))
        if toggles.use_images:
            if img is None:
                raise FeatureError(f"no image features for image_id {rec.image_id!r}")
            vec = img.vector() if sky is not None else np.asarray(img, dtype=np.float64)
            if img_dim is None:
                img_dim = len(vec)
            elif len(vec) != img_dim:
                raise FeatureError("image feature vectors differ in length")
            vals.extend(vec)
        if require_labels and rec.tmrt_C is None:
            raise FeatureError(f"record {rec.image_id!r} has no T_mrt label")
        rows.append(vals)
        tmrt.append(np.nan if rec.tmrt_C is None else rec.tmrt_C)
        fluxes.append([np.nan if getattr(rec, c) is None else getattr(rec, c) for c in FLUX_COLS])
        night.append(rec.solar.altitude_deg <= 0)
        ids.append(rec.image_id)
    names = list(meta)
    if toggles.use_images:
        if img_dim == len(IMAGE_NAMES):
            names += list(IMAGE_NAMES)
        else:
            names += [f"img_emb_{i}" for i in range(img_dim or 0)]
    n_meta = len(meta)
    lw_cols = list(range(n_meta))
    sw_cols = list(range(len(names)))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return FeatureSet(X, names, sw_cols, lw_cols, np.array(tmrt, dtype=np.float64),
                      np.array(fluxes, dtype=np.float64).reshape(len(rows), 12),
                      np.array(night, dtype=bool), ids)


def fisheye_for(image_dir, image_id, size=512) -> FisheyeImage:
    """Load ``<id>.png`` as a ready fisheye, else project ``<id>_{N..D}.png`` cube faces."""
    image_dir = Path(image_dir)
    direct = image_dir / f"{image_id}.png"
    if direct.exists():
        return FisheyeImage(read_png(direct))
    return cube_to_fisheye(load_cube(image_dir, image_id), size)


def extract_image_features(ds: Dataset, image_dir=None, mask_dir=None, size=512,
                           cubes: dict | None = None) -> dict:
    """Sky features per image_id, from in-memory cubes or files on disk.

    An external mask ``<mask_dir>/<id>_mask.png`` replaces segmentation.
    """
    out = {}
    for rec in ds.records:
        iid = rec.image_id
        if iid is None or iid in out:
            continue
        mask = None
        if mask_dir is not None and (Path(mask_dir) / f"{iid}_mask.png").exists():
            mask = read_mask_png(Path(mask_dir) / f"{iid}_mask.png")
        if mask is None:
            if cubes is not None and iid in cubes:
                fe = cube_to_fisheye(cubes[iid], size)
            elif image_dir is not None:
                fe = fisheye_for(image_dir, iid, size)
            else:
                raise FeatureError(f"no image source for {iid!r}")
            mask = segment_sky(fe)
        out[iid] = sky_features(mask, rec.solar)
    return out


def read_embeddings(path) -> dict:
    """External per-image embeddings: CSV with ``image_id`` then numeric columns."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "image_id":
            raise FeatureError("embedding file must start with an image_id column")
        for row in reader:
            out[row[0]] = np.array([float(v) for v in row[1:]], dtype=np.float64)
    return out


def write_image_features(path, feats: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", *IMAGE_NAMES, "sun_disk_sky_fraction", "night"])
        for iid in sorted(feats):
            f = feats[iid]
            w.writerow([iid, *(repr(float(v)) for v in f.vector()),
                        repr(f.sun_disk_sky_fraction), int(f.night)])


def read_image_features(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            vec = np.array([float(row[n]) for n in IMAGE_NAMES])
            out[row["image_id"]] = SkyFeatures(vec[0], vec[2:], float(row["sun_disk_sky_fraction"]),
                                               bool(vec[1]), bool(int(row["night"])))
    return out
