"""Synthetic urban-canyon scenes with closed-form radiation labels.

A scene is an open sky plus up to three wall occluders, each covering an
azimuth interval up to a fixed elevation. Cube maps are rendered
analytically, and six-directional fluxes follow from the sun vector,
cosine-weighted sky / wall / ground view shares and the beam reflected off
sunlit facades. Ground-truth T_mrt comes from
:mod:`mrtforge.radiation`, so every label is self-consistent.

The irradiance and surface-temperature draws are coupled to the observable
weather (humid air -> weaker beam, stronger diffuse and a warmer sky; wind
cools the walls) so a model that sees the weather can explain them.

The built-environment columns written to the CSV are perturbed versions of
the scene's exact values, standing in for coarse GIS layers; the truth
sidecar keeps the exact SVF.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FLUX_COLS, ObservationRecord
from .fisheye import FACES, CubeMap, face_pixel_directions, vectors_to_angles
from .radiation import SIGMA, BodyRadiationProfile, DirectionalFluxes, tmrt_from_fluxes
from .solar import GeoTime, solar_position

TEMPE = (33.4255, -111.9400, -420)  # lat, lon, UTC offset (MST)
SEASON = (dt.date(2018, 6, 1), dt.date(2018, 8, 31))
WINDOW = (7 * 60 + 30, 20 * 60 + 30)  # local minutes, 07:30-20:30

SKY_ZENITH = np.array([50.0, 110.0, 215.0])
SKY_HORIZON = np.array([95.0, 150.0, 235.0])
WALL_RGB = np.array([92.0, 90.0, 88.0])
GROUND_RGB = np.array([110.0, 100.0, 88.0])

WALL_ALBEDO = 0.3

# the CSV carries neighbourhood-scale GIS descriptors, not the point values seen
# by the camera; these spreads set how far the two disagree
META_SVF_SD = 0.075
META_BUILT_SD = 15.0

NORMALS = np.array([
    [0, 0, 1], [0, 0, -1], [0, 1, 0], [1, 0, 0], [0, -1, 0], [-1, 0, 0],
], dtype=np.float64)  # up, down, north, east, south, west


@dataclass
class Scene:
    walls: list = field(default_factory=list)  # (azimuth centre, half width, top elevation), deg

    def occluded(self, azimuth, altitude) -> np.ndarray:
        az = np.asarray(azimuth, dtype=np.float64)
        alt = np.asarray(altitude, dtype=np.float64)
        hit = np.zeros(np.broadcast(az, alt).shape, dtype=bool)
        for c, hw, top in self.walls:
            diff = np.abs((az - c + 180.0) % 360.0 - 180.0)
            hit |= (diff <= hw) & (alt < top)
        return hit

    def horizon(self, azimuth) -> np.ndarray:
        az = np.asarray(azimuth, dtype=np.float64)
        h = np.zeros(az.shape)
        for c, hw, top in self.walls:
            diff = np.abs((az - c + 180.0) % 360.0 - 180.0)
            h = np.where(diff <= hw, np.maximum(h, top), h)
        return h


def render_direction_rgb(scene: Scene, azimuth, altitude) -> np.ndarray:
    """Colour seen along each direction (float RGB)."""
    alt = np.asarray(altitude, dtype=np.float64)
    t = np.clip(alt / 90.0, 0.0, 1.0)[..., None]
    rgb = SKY_HORIZON * (1 - t) + SKY_ZENITH * t
    rgb = np.where(scene.occluded(azimuth, alt)[..., None], WALL_RGB, rgb)
    return np.where((alt < 0)[..., None], GROUND_RGB, rgb)


def render_cube(scene: Scene, width: int = 128) -> CubeMap:
    faces = {}
    for name in FACES:
        az, alt = vectors_to_angles(face_pixel_directions(name, width))
        faces[name] = np.clip(np.rint(render_direction_rgb(scene, az, alt)), 0, 255).astype(np.uint8)
    return CubeMap(faces)


# quadrature over the full sphere for view shares
_Q_AZ = (np.arange(720) + 0.5) * 0.5
_Q_ALT = (np.arange(360) + 0.5) * 0.5 - 90.0


def _quadrature():
    az, alt = np.meshgrid(_Q_AZ, _Q_ALT)
    a, e = np.radians(az), np.radians(alt)
    d = np.stack([np.cos(e) * np.sin(a), np.cos(e) * np.cos(a), np.sin(e)], axis=-1)
    cosw = np.clip(d @ NORMALS.T, 0.0, None) * np.cos(e)[..., None]  # (alt, az, 6)
    total = cosw.sum(axis=(0, 1))
    upper = cosw[_Q_ALT > 0]
    # cum[k, j] = weight of the lowest k upper-hemisphere cells in azimuth column j
    cum = np.concatenate([np.zeros((1,) + upper.shape[1:]), np.cumsum(upper, axis=0)])
    return total, upper.sum(axis=(0, 1)), cum


_QUAD = _quadrature()


def _wall_columns(scene: Scene) -> np.ndarray:
    """Cosine-weighted wall share of each 0.5 degree azimuth column, (720, 6)."""
    total, _, cum = _QUAD
    k = np.searchsorted(_Q_ALT[_Q_ALT > 0], scene.horizon(_Q_AZ), side="left")
    return cum[k, np.arange(_Q_AZ.size)] / total


def view_shares(scene: Scene) -> dict:
    """Cosine-weighted sky / wall / ground view shares for the six body directions.

    Each entry is a length-6 array in up, down, N, E, S, W order; shares of a
    direction sum to 1. Walls block every cell below the horizon elevation of
    its azimuth column on a 0.5 degree grid.
    """
    total, upper, _ = _QUAD
    wall = _wall_columns(scene).sum(axis=0)
    return {"sky": upper / total - wall, "wall": wall, "ground": (total - upper) / total}


def sky_view_factor(scene: Scene) -> float:
    """Analytic isotropic SVF of a horizontal surface for the scene."""
    return float(view_shares(scene)["sky"][0])


@dataclass
class Weather:
    air_temp_C: float
    rh_pct: float
    wind_ms: float

    @property
    def _humid(self):
        return (self.rh_pct - 10.0) / 50.0

    @property
    def dni(self):
        return 1000.0 - 400.0 * self._humid

    @property
    def dhi(self):
        return 50.0 + 100.0 * self._humid

    @property
    def sky_temp_C(self):
        return self.air_temp_C - (25.0 - 10.0 * self._humid)

    @property
    def wall_temp_C(self):
        return self.air_temp_C + 20.0 - 15.0 * (self.wind_ms - 0.5) / 4.5


def scene_fluxes(scene: Scene, sun_az, sun_alt, weather: Weather):
    """Closed-form six-directional fluxes and the direct-beam shade flag."""
    shares = view_shares(scene)
    night = sun_alt <= 0
    shaded = bool(night or scene.occluded(sun_az, sun_alt))
    s = np.zeros(6)
    if not night:
        e, a = np.radians(sun_alt), np.radians(sun_az)
        sun = np.array([np.cos(e) * np.sin(a), np.cos(e) * np.cos(a), np.sin(e)])
        if not shaded:
            s += weather.dni * np.clip(NORMALS @ sun, 0.0, None)
        s += weather.dhi * shares["sky"]
        # facades facing the sun reflect the beam diffusely
        lit = weather.dni * np.cos(e) * np.clip(-np.cos(a - np.radians(_Q_AZ)), 0.0, None)
        s += WALL_ALBEDO * (lit @ _wall_columns(scene))
    t_sky = weather.sky_temp_C + 273.15
    t_wall = weather.wall_temp_C + 273.15
    l = SIGMA * (shares["sky"] * t_sky ** 4 + (shares["wall"] + shares["ground"]) * t_wall ** 4)
    return DirectionalFluxes(s, l), shaded


def random_scene(rng) -> Scene:
    walls = []
    for _ in range(int(rng.integers(0, 4))):
        walls.append((float(rng.uniform(0, 360)), float(rng.uniform(10, 70)), float(rng.uniform(10, 70))))
    return Scene(walls)


@dataclass
class SceneTruth:
    image_id: str
    scene: Scene
    sun_azimuth: float
    sun_altitude: float
    shade: bool
    svf: float
    fluxes: DirectionalFluxes
    tmrt_C: float
    night: bool


def _scene_rng(seed, index):
    return np.random.default_rng([seed, index])


def generate_scene(seed: int, index: int, profile=BodyRadiationProfile(), face_size=None):
    """One synthetic observation: (record, truth, cube or None)."""
    rng = _scene_rng(seed, index)
    scene = random_scene(rng)
    ndays = (SEASON[1] - SEASON[0]).days + 1
    date = SEASON[0] + dt.timedelta(days=int(rng.integers(0, ndays)))
    minute = int(rng.integers(WINDOW[0], WINDOW[1] + 1))
    lat = TEMPE[0] + float(rng.uniform(-0.02, 0.02))
    lon = TEMPE[1] + float(rng.uniform(-0.02, 0.02))
    alt_m = float(rng.uniform(350.0, 370.0))
    weather = Weather(float(rng.uniform(26.0, 44.0)), float(rng.uniform(10.0, 60.0)),
                      float(rng.uniform(0.5, 5.0)))
    time = f"{minute // 60:02d}:{minute % 60:02d}"
    gt = GeoTime.parse(date.isoformat(), time, TEMPE[2], lat, lon, alt_m)
    sp = solar_position(gt)
    fluxes, shaded = scene_fluxes(scene, sp.azimuth_deg, sp.altitude_deg, weather)
    tmrt = tmrt_from_fluxes(fluxes, profile)
    svf = sky_view_factor(scene)
    az = np.arange(0.5, 360.0, 1.0)
    built = 100.0 * float((scene.horizon(az) > 0).mean())
    svf_meta = float(np.clip(svf + rng.normal(0.0, META_SVF_SD), 0.0, 1.0))
    built = float(np.clip(built + rng.normal(0.0, META_BUILT_SD), 0.0, 100.0))
    image_id = f"scene{index:05d}"
    rec = ObservationRecord(
        date=date.isoformat(), time=time, utc_offset_min=TEMPE[2], lat=lat, lon=lon, alt_m=alt_m,
        air_temp_C=weather.air_temp_C, rh_pct=weather.rh_pct, wind_ms=weather.wind_ms,
        svf=svf_meta, pct_trees=0.0, pct_buildings=built, pct_impervious=60.0 + 0.4 * built,
        shade=shaded, tmrt_C=float(tmrt), image_id=image_id,
        **dict(zip(FLUX_COLS, map(float, fluxes.as_vector()))),
    )
    truth = SceneTruth(image_id, scene, sp.azimuth_deg, sp.altitude_deg, shaded, svf, fluxes,
                       float(tmrt), sp.altitude_deg <= 0)
    cube = render_cube(scene, face_size) if face_size else None
    return rec, truth, cube


def shade_scene(seed: int, index: int, face_size=128):
    """Shade-benchmark scene: (solar position, beam occluded?, cube) for a daytime instant.

    Every other scene adds a wall facing the sun whose top lies within 15 deg
    of the sun altitude, so roughly half the cases sit near the shadow edge.
    """
    rng = np.random.default_rng([seed, index, 1])
    ndays = (SEASON[1] - SEASON[0]).days + 1
    while True:
        date = SEASON[0] + dt.timedelta(days=int(rng.integers(0, ndays)))
        minute = int(rng.integers(WINDOW[0], WINDOW[1] + 1))
        gt = GeoTime.parse(date.isoformat(), f"{minute // 60:02d}:{minute % 60:02d}", TEMPE[2],
                           TEMPE[0], TEMPE[1])
        sp = solar_position(gt)
        if sp.altitude_deg > 2.0:
            break
    scene = random_scene(rng)
    if index % 2 == 0:
        top = float(np.clip(sp.altitude_deg + rng.uniform(-15.0, 15.0), 5.0, 85.0))
        scene.walls.append((float(sp.azimuth_deg + rng.uniform(-30.0, 30.0)),
                            float(rng.uniform(10.0, 60.0)), top))
    shaded = bool(scene.occluded(sp.azimuth_deg, sp.altitude_deg))
    return sp, shaded, render_cube(scene, face_size)


def synth_generate(n_scenes: int, seed: int, face_size=128, profile=BodyRadiationProfile()):
    """Generate ``n_scenes`` scenes; returns (Dataset, cubes by image id, truths).

    Pass ``face_size=None`` to skip cube rendering. Each scene draws from its
    own RNG stream seeded with ``(seed, index)``.
    """
    if n_scenes < 1:
        raise ValueError("n_scenes must be at least 1")
    records, cubes, truths = [], {}, []
    for i in range(n_scenes):
        rec, truth, cube = generate_scene(seed, i, profile, face_size)
        records.append(rec)
        truths.append(truth)
        if cube is not None:
            cubes[rec.image_id] = cube
    return Dataset(records, notes={"synthetic_seed": seed}), cubes, truths


TRUTH_COLUMNS = ("image_id", "sun_azimuth", "sun_altitude", "night", "shade", "svf",
                 *FLUX_COLS, "tmrt_C", "walls")


def truth_row(t: SceneTruth) -> dict:
    row = {"image_id": t.image_id, "sun_azimuth": repr(t.sun_azimuth),
           "sun_altitude": repr(t.sun_altitude), "night": int(t.night), "shade": int(t.shade),
           "svf": repr(t.svf), "tmrt_C": repr(t.tmrt_C),
           "walls": ";".join(f"{c!r}/{hw!r}/{top!r}" for c, hw, top in t.scene.walls)}
    row.update({c: repr(float(v)) for c, v in zip(FLUX_COLS, t.fluxes.as_vector())})
    return row

