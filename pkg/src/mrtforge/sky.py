"""Sky segmentation, sky view factor, directional sky fractions and sun/shade.

Segmentation is classical: a pixel is sky when its blue ratio b/(r+g+b) is
above a histogram-valley threshold or it is near-saturated white. An external
mask (single-channel PNG, 255 = sky) can be used instead.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .fisheye import (FisheyeImage, direction_to_pixel, direction_vectors, disk_mask,
                      pixel_angles, solid_angle_weights)
from .solar import SolarPosition

DEFAULT_BLUE_THRESHOLD = 0.40
BRIGHT_FRACTION = 0.92
CLOSING_RADIUS = 3
SVF_RINGS = 36
N_OCTANTS = 8
BAND_EDGES = (0.0, 22.5, 45.0, 67.5, 90.0)  # elevation, degrees
SUN_RADIUS_DEG = 5.0
SHADE_THRESHOLD = 0.5


@dataclass
class SkyMask:
    mask: np.ndarray  # True = sky

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        D = m.shape[0]
        if m.shape != (D, D) or D % 2:
            raise ValueError(f"sky mask must be square with even size, got {m.shape}")
        self.mask = m & disk_mask(D)

    @property
    def size(self) -> int:
        return self.mask.shape[0]


@dataclass
class ShadeResult:
    predicted_shade: bool
    sun_disk_sky_fraction: float
    night: bool = False


@dataclass
class SkyFeatures:
    svf: float
    directional_sky: np.ndarray  # (32,) octant-major from the sun azimuth, bands low -> high
    sun_disk_sky_fraction: float
    predicted_shade: bool
    night: bool = False

    def vector(self) -> np.ndarray:
        """34 handcrafted image features: svf, shade flag, 32 directional fractions."""
        return np.concatenate([[self.svf, float(self.predicted_shade)], self.directional_sky])


def _disk(radius):
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius ** 2


def valley_threshold(values, bins=100, min_separation=0.08, min_mass=0.005):
    """Threshold at the histogram valley between the two dominant modes.

    Returns None when the histogram has fewer than two well-separated modes.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        return None
    hist, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    smooth = np.convolve(hist, np.ones(5) / 5.0, mode="same")
    centers = (edges[:-1] + edges[1:]) / 2
    padded = np.concatenate([[-1.0], smooth, [-1.0]])
    peaks = [i for i in range(bins)
             if padded[i + 1] > padded[i] and padded[i + 1] >= padded[i + 2]
             and smooth[i] >= min_mass * values.size]
    if len(peaks) < 2:
        return None
    peaks.sort(key=lambda i: smooth[i], reverse=True)
    first = peaks[0]
    second = next((p for p in peaks[1:] if abs(centers[p] - centers[first]) >= min_separation), None)
    if second is None:
        return None
    lo, hi = sorted((first, second))
    valley = lo + int(np.argmin(smooth[lo:hi + 1]))
    return float(centers[valley])


def classify_sky(rgb, valid=None, threshold=None) -> np.ndarray:
    """Boolean sky classification of an RGB raster (no disk handling)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if valid is None:
        valid = np.ones(rgb.shape[:2], dtype=bool)
    total = rgb.sum(axis=-1)
    ratio = np.where(total > 0, rgb[..., 2] / np.maximum(total, 1e-9), 0.0)
    lum = rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    if threshold is None:
        threshold = valley_threshold(ratio[valid])
        if threshold is None:
            threshold = DEFAULT_BLUE_THRESHOLD
    sky = (ratio > threshold) | (lum > BRIGHT_FRACTION * 255.0)
    # edge padding keeps the closing from inventing sky along the raster border
    k = CLOSING_RADIUS
    sky = ndimage.binary_closing(np.pad(sky, k, mode="edge"), structure=_disk(k))[k:-k, k:-k]
    return sky & valid


def segment_sky(fe: FisheyeImage, threshold=None) -> SkyMask:
    return SkyMask(classify_sky(fe.rgb, fe.valid, threshold))


def read_mask_png(path) -> SkyMask:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return SkyMask(arr >= 128)


def write_mask_png(path, mask: SkyMask) -> None:
    Image.fromarray(np.where(mask.mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def compute_svf(mask: SkyMask, n_rings: int = SVF_RINGS) -> float:
    """Annulus-method sky view factor with sin(2 theta) ring weights."""
    valid, zen, _ = pixel_angles(mask.size)
    step = 90.0 / n_rings
    ring = np.minimum((zen[valid] / step).astype(np.intp), n_rings - 1)
    counts = np.bincount(ring, minlength=n_rings)
    sky = np.bincount(ring, weights=mask.mask[valid].astype(np.float64), minlength=n_rings)
    centers = np.radians((np.arange(n_rings) + 0.5) * step)
    w = np.sin(2 * centers) * (counts > 0)
    frac = np.divide(sky, counts, out=np.zeros(n_rings), where=counts > 0)
    # dividing at the end makes an all-sky mask come out as exactly 1
    return float(np.clip((w * frac).sum() / w.sum(), 0.0, 1.0))


@functools.lru_cache(maxsize=8)
def _bands(D):
    valid, zen, az = pixel_angles(D)
    band = np.clip(np.searchsorted(BAND_EDGES, 90.0 - zen, side="right") - 1, 0,
                   len(BAND_EDGES) - 2)
    band.setflags(write=False)
    return valid, band, az


def _cells(D, azimuth_offset=0.0):
    valid, band, az = _bands(D)
    width = 360.0 / N_OCTANTS
    octant = (np.mod(az - azimuth_offset + width / 2, 360.0) // width).astype(np.intp)
    octant = np.minimum(octant, N_OCTANTS - 1)
    return valid, octant * (len(BAND_EDGES) - 1) + band


def cell_weights() -> np.ndarray:
    """View-factor share of each of the 32 cells (sums to 1)."""
    zen_hi = np.radians(90.0 - np.asarray(BAND_EDGES[:-1]))
    zen_lo = np.radians(90.0 - np.asarray(BAND_EDGES[1:]))
    band_w = np.sin(zen_hi) ** 2 - np.sin(zen_lo) ** 2
    return np.tile(band_w, N_OCTANTS) / N_OCTANTS


def directional_sky_fractions(mask: SkyMask, azimuth_offset: float = 0.0) -> np.ndarray:
    """Solid-angle-weighted sky fraction per (azimuth octant, elevation band).

    Octants are centred on N, NE, E, ... (rotated clockwise by
    ``azimuth_offset`` degrees); bands are 0-22.5, 22.5-45, 45-67.5 and
    67.5-90 deg elevation. Result is flat, octant-major, length 32.
    """
    valid, cell = _cells(mask.size, azimuth_offset)
    w = solid_angle_weights(mask.size)[valid]
    n = N_OCTANTS * (len(BAND_EDGES) - 1)
    tot = np.bincount(cell[valid], weights=w, minlength=n)
    sky = np.bincount(cell[valid], weights=w * mask.mask[valid], minlength=n)
    return np.divide(sky, tot, out=np.zeros(n), where=tot > 0)


def predict_shade(mask: SkyMask, sun: SolarPosition, radius_deg: float = SUN_RADIUS_DEG,
                  threshold: float = SHADE_THRESHOLD) -> ShadeResult:
    """Shade test: share of sky pixels within ``radius_deg`` of the sun direction."""
    if sun.altitude_deg <= 0:
        return ShadeResult(True, 0.0, night=True)
    D = mask.size
    R = D / 2.0
    x0, y0 = direction_to_pixel(sun.azimuth_deg, sun.altitude_deg, D)
    th = math.radians(min(sun.zenith_deg + radius_deg, 90.0))
    stretch = max(1.0, th / math.sin(th)) if th > 0 else 1.0
    half = int(math.ceil(R * radius_deg / 90.0 * stretch)) + 2
    xs = slice(max(0, int(x0) - half), min(D, int(x0) + half + 1))
    ys = slice(max(0, int(y0) - half), min(D, int(y0) + half + 1))
    valid, zen, az = pixel_angles(D)
    v = valid[ys, xs]
    dirs = direction_vectors(az[ys, xs], 90.0 - zen[ys, xs])
    s = direction_vectors(sun.azimuth_deg, sun.altitude_deg)
    near = v & (dirs @ s >= math.cos(math.radians(radius_deg)))
    if not near.any():
        ix = min(max(int(x0), 0), D - 1)
        iy = min(max(int(y0), 0), D - 1)
        frac = float(mask.mask[iy, ix])
    else:
        w = solid_angle_weights(D)[ys, xs][near]
        frac = float((w * mask.mask[ys, xs][near]).sum() / w.sum())
    return ShadeResult(frac < threshold, frac)


def sky_features(mask: SkyMask, sun: SolarPosition) -> SkyFeatures:
    shade = predict_shade(mask, sun)
    # octants turn with the sun so facade geometry is expressed relative to the beam
    return SkyFeatures(compute_svf(mask), directional_sky_fractions(mask, sun.azimuth_deg),
                       shade.sun_disk_sky_fraction, shade.predicted_shade, shade.night)
