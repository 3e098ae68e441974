"""Cube-map to equiangular hemispherical fisheye projection.

World frame: x = east, y = north, z = up. Fisheye images look upward with
north at the top and east on the left; pixel radius is proportional to the
zenith angle and the horizon sits on the rim of the inscribed disk.

Cube faces are 90 deg perspective views. A lateral face looking along
``forward`` has world-up as image-up and its image-right pointing clockwise
(seen from above): north face right = east, east face right = south, and so
on. The up face has image-right = east and image-up = south, i.e. its bottom
edge touches the top edge of the north face (the usual skybox cross). The down
face is loaded but never sampled.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

FACES = ("N", "E", "S", "W", "U", "D")
UPPER_FACES = ("N", "E", "S", "W", "U")

# forward, image-right, image-up
FACE_BASIS = {
    "N": ((0, 1, 0), (1, 0, 0), (0, 0, 1)),
    "E": ((1, 0, 0), (0, -1, 0), (0, 0, 1)),
    "S": ((0, -1, 0), (-1, 0, 0), (0, 0, 1)),
    "W": ((-1, 0, 0), (0, 1, 0), (0, 0, 1)),
    "U": ((0, 0, 1), (1, 0, 0), (0, -1, 0)),
    "D": ((0, 0, -1), (1, 0, 0), (0, 1, 0)),
}

# Edge of the up face that borders each lateral face's top edge.
_UP_EDGE = {"N": "bottom", "E": "right", "S": "top", "W": "left"}


class BelowHorizon(ValueError):
    pass


class IncompleteCube(ValueError):
    def __init__(self, missing, detail=""):
        self.missing = list(missing)
        msg = "missing or unreadable cube face(s): " + ", ".join(self.missing)
        super().__init__(msg + (f" ({detail})" if detail else ""))


@dataclass
class CubeMap:
    faces: dict

    def __post_init__(self):
        missing = [f for f in FACES if f not in self.faces]
        if missing:
            raise IncompleteCube(missing)
        sizes = set()
        for name in FACES:
            arr = np.asarray(self.faces[name])
            if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"face {name} must be a square RGB raster, got {arr.shape}")
            sizes.add(arr.shape[0])
            self.faces[name] = arr.astype(np.uint8, copy=False)
        if len(sizes) != 1:
            raise ValueError(f"cube faces differ in size: {sorted(sizes)}")
        if sizes.pop() < 64:
            raise ValueError("cube faces must be at least 64 px wide")

    @property
    def width(self) -> int:
        return self.faces["N"].shape[0]


@dataclass
class FisheyeImage:
    rgb: np.ndarray
    valid: np.ndarray = field(default=None)
    projection: str = "equiangular"
    orientation: str = "north-up/east-left"

    def __post_init__(self):
        d = self.rgb.shape[0]
        if self.rgb.shape[:2] != (d, d) or d % 2:
            raise ValueError(f"fisheye raster must be square with even size, got {self.rgb.shape[:2]}")
        if self.valid is None:
            self.valid = disk_mask(d)

    @property
    def size(self) -> int:
        return self.rgb.shape[0]


def direction_to_pixel(azimuth_deg, altitude_deg, D=1000):
    """Continuous pixel coordinates (x, y) of a sky direction."""
    alt = np.asarray(altitude_deg, dtype=np.float64)
    if np.any(alt < 0):
        raise BelowHorizon("direction below the horizon has no fisheye pixel")
    c = D / 2.0
    r = c * (90.0 - alt) / 90.0
    az = np.radians(azimuth_deg)
    x = c - r * np.sin(az)
    y = c - r * np.cos(az)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def pixel_to_direction(x, y, D=1000):
    """Inverse of :func:`direction_to_pixel`; returns (azimuth, altitude) in degrees."""
    c = D / 2.0
    dx = c - np.asarray(x, dtype=np.float64)
    dy = c - np.asarray(y, dtype=np.float64)
    r = np.hypot(dx, dy)
    alt = 90.0 - 90.0 * r / c
    az = np.mod(np.degrees(np.arctan2(dx, dy)), 360.0)
    return az, alt


@functools.lru_cache(maxsize=8)
def _grid(D):
    idx = np.arange(D) + 0.5
    x, y = np.meshgrid(idx, idx)
    c = D / 2.0
    r = np.hypot(x - c, y - c)
    valid = r <= c
    zen = np.minimum(r / c, 1.0) * 90.0
    az, _ = pixel_to_direction(x, y, D)
    for a in (valid, zen, az):
        a.setflags(write=False)
    return valid, zen, az


def disk_mask(D) -> np.ndarray:
    return _grid(D)[0]


def pixel_angles(D):
    """(valid, zenith_deg, azimuth_deg) rasters for pixel centres."""
    return _grid(D)


@functools.lru_cache(maxsize=8)
def _solid_angle_weights(D):
    valid, zen, _ = _grid(D)
    th = np.radians(zen)
    w = np.where(th > 0, np.sin(th) / np.where(th > 0, th, 1.0), 1.0)
    w = np.where(valid, w, 0.0)
    w.setflags(write=False)
    return w


def solid_angle_weights(D) -> np.ndarray:
    """Relative solid angle of each pixel (sin(theta)/theta), zero outside the disk."""
    return _solid_angle_weights(int(D))


def direction_vectors(azimuth_deg, altitude_deg) -> np.ndarray:
    az = np.radians(azimuth_deg)
    alt = np.radians(altitude_deg)
    ca = np.cos(alt)
    return np.stack([ca * np.sin(az), ca * np.cos(az), np.sin(alt)], axis=-1)


def vectors_to_angles(v):
    v = np.asarray(v, dtype=np.float64)
    alt = np.degrees(np.arcsin(np.clip(v[..., 2] / np.linalg.norm(v, axis=-1), -1, 1)))
    az = np.mod(np.degrees(np.arctan2(v[..., 0], v[..., 1])), 360.0)
    return az, alt


def face_pixel_directions(face: str, W: int) -> np.ndarray:
    """Unit world directions (W, W, 3) through the pixel centres of a cube face."""
    f, r, u = (np.array(b, dtype=np.float64) for b in FACE_BASIS[face])
    c = (np.arange(W) + 0.5) / W * 2.0 - 1.0
    uu, vv = np.meshgrid(c, -c)
    d = f + uu[..., None] * r + vv[..., None] * u
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _luminance(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def exposure_gains(cube: CubeMap, strip_frac=0.02, limits=(0.8, 1.25)) -> dict:
    """Per-lateral-face gain matching its top strip to the adjoining up-face strip."""
    W = cube.width
    k = max(1, int(round(W * strip_frac)))
    up = _luminance(cube.faces["U"])
    strips = {"bottom": up[-k:, :], "top": up[:k, :], "left": up[:, :k], "right": up[:, -k:]}
    gains = {}
    for face in ("N", "E", "S", "W"):
        lat = _luminance(cube.faces[face])[:k, :].mean()
        ref = strips[_UP_EDGE[face]].mean()
        g = ref / lat if lat >= 1.0 else 1.0
        gains[face] = float(np.clip(g, *limits))
    gains["U"] = 1.0
    return gains


def _bilinear(img, px, py):
    """Sample ``img`` (H, W, C) at continuous pixel coordinates with edge clamping."""
    H, W = img.shape[:2]
    x = np.clip(px - 0.5, 0.0, W - 1.0)
    y = np.clip(py - 0.5, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), W - 2)
    y0 = np.minimum(np.floor(y).astype(np.intp), H - 2)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    a = img[y0, x0]
    b = img[y0, x0 + 1]
    c = img[y0 + 1, x0]
    d = img[y0 + 1, x0 + 1]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


@functools.lru_cache(maxsize=8)
def _sampling_plan(D, feather_deg):
    """Per-face (selected disk pixels, blend weights, face coordinates in [-1, 1])."""
    valid, zen, az = _grid(D)
    iy, ix = np.nonzero(valid)
    d = direction_vectors(az[iy, ix], 90.0 - zen[iy, ix])
    feather = np.radians(feather_deg)
    plan = []
    for name in UPPER_FACES:
        f, r, u = (np.array(b, dtype=np.float64) for b in FACE_BASIS[name])
        fd = d @ f
        margin = np.full(d.shape[0], np.inf)
        for s in (r, -r, u, -u):
            margin = np.minimum(margin, np.arcsin(np.clip(d @ (f - s) / np.sqrt(2.0), -1, 1)))
        if feather > 0:
            w = np.clip(0.5 + margin / feather, 0.0, 1.0)
        else:
            w = (margin >= 0).astype(np.float64)
        sel = np.nonzero((w > 0) & (fd > 1e-6))[0]
        if sel.size:
            ds = d[sel]
            plan.append((name, sel, w[sel], (ds @ r) / fd[sel], (ds @ u) / fd[sel]))
    return iy, ix, plan


def cube_to_fisheye(cube: CubeMap, D: int = 1000, normalize: bool = True,
                    feather_deg: float = 2.0) -> FisheyeImage:
    """Resample the five upper cube faces onto an equiangular fisheye disk.

    Lateral faces are gain-normalised to the up face, each disk pixel is
    sampled bilinearly from the face(s) containing its direction, and seams
    are blended over a ``feather_deg`` band.
    """
    if D % 2:
        raise ValueError("fisheye size must be even")
    W = cube.width
    iy, ix, plan = _sampling_plan(D, float(feather_deg))
    gains = exposure_gains(cube) if normalize else {f: 1.0 for f in UPPER_FACES}
    acc = np.zeros((iy.size, 3))
    wsum = np.zeros(iy.size)
    for name, sel, w, uc, vc in plan:
        px = (uc + 1.0) / 2.0 * W
        py = (1.0 - vc) / 2.0 * W
        img = cube.faces[name].astype(np.float64) * gains[name]
        acc[sel] += w[:, None] * _bilinear(img, px, py)
        wsum[sel] += w
    out = np.zeros((D, D, 3), dtype=np.uint8)
    out[iy, ix] = np.clip(np.rint(acc / wsum[:, None]), 0, 255).astype(np.uint8)
    return FisheyeImage(out, _grid(D)[0].copy())


@dataclass
class ProjectionReport:
    fisheye_fraction: float
    cube_fraction: float
    tolerance: float = 0.02

    @property
    def difference(self) -> float:
        return abs(self.fisheye_fraction - self.cube_fraction)

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance

    def to_dict(self) -> dict:
        return {"fisheye_fraction": self.fisheye_fraction, "cube_fraction": self.cube_fraction,
                "difference": self.difference, "passed": self.passed}


def validate_projection(cube: CubeMap, fe: FisheyeImage, mask_fn, tolerance=0.02) -> ProjectionReport:
    """Compare solid-angle-weighted sky fractions of the fisheye and the cube.

    ``mask_fn(rgb, valid) -> bool raster`` classifies sky pixels.
    """
    w = solid_angle_weights(fe.size)
    sky = mask_fn(fe.rgb, fe.valid)
    fe_frac = float((w * sky).sum() / w.sum())

    W = cube.width
    c = (np.arange(W) + 0.5) / W * 2.0 - 1.0
    uu, vv = np.meshgrid(c, -c)
    dA = 1.0 / (1.0 + uu ** 2 + vv ** 2) ** 1.5
    num = den = 0.0
    for name in UPPER_FACES:
        dirs = face_pixel_directions(name, W)
        keep = dirs[..., 2] >= 0.0
        sky_f = mask_fn(cube.faces[name], np.ones((W, W), dtype=bool))
        num += float((dA * sky_f * keep).sum())
        den += float((dA * keep).sum())
    return ProjectionReport(fe_frac, num / den, tolerance)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_png(path, rgb) -> None:
    # fixed encoder settings keep the output byte-stable
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path, format="PNG", optimize=False, compress_level=6)


def load_cube(directory, image_id) -> CubeMap:
    """Load ``<image_id>_{N,E,S,W,U,D}.png`` from ``directory``."""
    directory = Path(directory)
    faces, bad = {}, []
    detail = ""
    for name in FACES:
        p = directory / f"{image_id}_{name}.png"
        try:
            faces[name] = read_png(p)
        except FileNotFoundError:
            bad.append(name)
        except Exception as exc:  # PIL raises a variety of decode errors
            bad.append(name)
            detail = f"{p.name}: {exc}"
    if bad:
        raise IncompleteCube(bad, detail)
    return CubeMap(faces)


def save_cube(directory, image_id, cube: CubeMap) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in FACES:
        write_png(directory / f"{image_id}_{name}.png", cube.faces[name])


def list_cube_ids(directory) -> list:
    """Image ids having at least one face file in ``directory``."""
    ids = set()
    for p in Path(directory).glob("*_[NESWUD].png"):
        ids.add(p.stem[:-2])
    return sorted(ids)
