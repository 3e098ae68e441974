"""Solar altitude, azimuth and minutes-from-sunrise.

Uses the NOAA solar calculator formulation (Meeus series in Julian
centuries). Altitude is geometric (no refraction); sunrise uses the standard
zenith of 90.833 deg. The caller supplies the UTC offset, so no timezone
database is needed.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

SUNRISE_ZENITH = 90.833
POLAR_LIMIT = 66.5


class InvalidInput(ValueError):
    pass


class UnsupportedRegion(ValueError):
    pass


@dataclass(frozen=True)
class GeoTime:
    """A location plus a local civil timestamp with an explicit UTC offset."""

    latitude: float
    longitude: float
    date: dt.date
    time: dt.time
    utc_offset_min: int = 0
    altitude_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidInput(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidInput(f"longitude out of range: {self.longitude}")
        if self.altitude_m < -500.0:
            raise InvalidInput(f"altitude below -500 m: {self.altitude_m}")
        if abs(self.utc_offset_min) > 18 * 60:
            raise InvalidInput(f"UTC offset out of range: {self.utc_offset_min}")

    @classmethod
    def parse(cls, date: str, time: str, utc_offset_min: int, latitude: float,
              longitude: float, altitude_m: float = 0.0) -> "GeoTime":
        """Build from ``YYYY-MM-DD`` and ``HH:MM[:SS]`` strings."""
        try:
            d = dt.date.fromisoformat(date.strip())
        except ValueError as exc:
            raise InvalidInput(f"invalid date {date!r}: {exc}") from None
        try:
            t = dt.time.fromisoformat(time.strip())
        except ValueError as exc:
            raise InvalidInput(f"invalid time {time!r}: {exc}") from None
        return cls(latitude, longitude, d, t, int(utc_offset_min), altitude_m)

    def utc(self) -> dt.datetime:
        local = dt.datetime.combine(self.date, self.time)
        return (local - dt.timedelta(minutes=self.utc_offset_min)).replace(tzinfo=dt.timezone.utc)

    def shifted(self, minutes: float) -> "GeoTime":
        """Same place, clock moved by ``minutes`` (may change the date)."""
        local = dt.datetime.combine(self.date, self.time) + dt.timedelta(minutes=minutes)
        return GeoTime(self.latitude, self.longitude, local.date(), local.time(),
                       self.utc_offset_min, self.altitude_m)


@dataclass(frozen=True)
class SolarPosition:
    altitude_deg: float
    azimuth_deg: float  # 0 = north, clockwise
    minutes_from_sunrise: float | None = None

    @property
    def zenith_deg(self) -> float:
        return 90.0 - self.altitude_deg

    @property
    def is_night(self) -> bool:
        return self.altitude_deg <= 0.0


_J2000 = 2451545.0
_UNIX_EPOCH_JD = 2440587.5


def julian_day(t: dt.datetime) -> float:
    """Julian day of an aware datetime."""
    return _UNIX_EPOCH_JD + t.timestamp() / 86400.0


def _sun_series(jd):
    """Declination (deg) and equation of time (min) for Julian day(s) ``jd``."""
    T = (np.asarray(jd, dtype=np.float64) - _J2000) / 36525.0
    L0 = np.mod(280.46646 + T * (36000.76983 + T * 0.0003032), 360.0)
    M = 357.52911 + T * (35999.05029 - 0.0001537 * T)
    e = 0.016708634 - T * (0.000042037 + 0.0000001267 * T)
    Mr = np.radians(M)
    C = (np.sin(Mr) * (1.914602 - T * (0.004817 + 0.000014 * T))
         + np.sin(2 * Mr) * (0.019993 - 0.000101 * T)
         + np.sin(3 * Mr) * 0.000289)
    omega = np.radians(125.04 - 1934.136 * T)
    app_long = np.radians(L0 + C - 0.00569 - 0.00478 * np.sin(omega))
    mean_obliq = 23.0 + (26.0 + (21.448 - T * (46.815 + T * (0.00059 - T * 0.001813))) / 60.0) / 60.0
    obliq = np.radians(mean_obliq + 0.00256 * np.cos(omega))
    decl = np.degrees(np.arcsin(np.sin(obliq) * np.sin(app_long)))
    y = np.tan(obliq / 2) ** 2
    L0r = np.radians(L0)
    eot = 4.0 * np.degrees(
        y * np.sin(2 * L0r)
        - 2 * e * np.sin(Mr)
        + 4 * e * y * np.sin(Mr) * np.cos(2 * L0r)
        - 0.5 * y * y * np.sin(4 * L0r)
        - 1.25 * e * e * np.sin(2 * Mr)
    )
    return decl, eot


def sun_angles(jd, latitude, longitude):
    """Vectorised (altitude, azimuth) in degrees for Julian day(s) and site(s)."""
    jd = np.asarray(jd, dtype=np.float64)
    decl, eot = _sun_series(jd)
    utc_min = np.mod(jd + 0.5, 1.0) * 1440.0
    tst = np.mod(utc_min + eot + 4.0 * np.asarray(longitude), 1440.0)
    ha = np.radians(tst / 4.0 - 180.0)
    lat = np.radians(latitude)
    d = np.radians(decl)
    cos_z = np.clip(np.sin(lat) * np.sin(d) + np.cos(lat) * np.cos(d) * np.cos(ha), -1.0, 1.0)
    altitude = 90.0 - np.degrees(np.arccos(cos_z))
    az = np.degrees(np.arctan2(np.sin(ha), np.cos(ha) * np.sin(lat) - np.tan(d) * np.cos(lat)))
    azimuth = np.mod(az + 180.0, 360.0)
    return altitude, azimuth


def _sunrise_jd(gt: GeoTime) -> float:
    if abs(gt.latitude) >= POLAR_LIMIT:
        raise UnsupportedRegion(f"sunrise undefined for |latitude| >= {POLAR_LIMIT}: {gt.latitude}")
    jd0 = _local_midnight_jd(gt)
    lat = math.radians(gt.latitude)
    jd = jd0 + 0.25  # first guess: 06:00 local
    for _ in range(5):
        decl, eot = _sun_series(jd)
        d = math.radians(float(decl))
        cos_ha = (math.cos(math.radians(SUNRISE_ZENITH)) / (math.cos(lat) * math.cos(d))
                  - math.tan(lat) * math.tan(d))
        if not -1.0 <= cos_ha <= 1.0:
            raise UnsupportedRegion("no sunrise on this date at this latitude")
        ha = math.degrees(math.acos(cos_ha))
        # sunrise in UTC minutes relative to the UTC day containing the guess
        day_start = math.floor(jd + 0.5) - 0.5
        utc_min = 720.0 - 4.0 * (gt.longitude + ha) - float(eot)
        new = day_start + utc_min / 1440.0
        # keep the sunrise on the requested local calendar day
        while new < jd0:
            new += 1.0
        while new >= jd0 + 1.0:
            new -= 1.0
        if abs(new - jd) < 1e-9:
            jd = new
            break
        jd = new
    return jd


def sunrise_utc(gt: GeoTime) -> dt.datetime:
    """UTC instant of sunrise on the local calendar day of ``gt``."""
    jd = _sunrise_jd(gt)
    return dt.datetime.fromtimestamp((jd - _UNIX_EPOCH_JD) * 86400.0, tz=dt.timezone.utc)


def _local_midnight_jd(gt: GeoTime) -> float:
    midnight = dt.datetime.combine(gt.date, dt.time(0)).replace(tzinfo=dt.timezone.utc)
    return julian_day(midnight) - gt.utc_offset_min / 1440.0


def sunrise_minutes(gt: GeoTime) -> float:
    """Signed minutes elapsed since that day's sunrise (negative before it).

    Clock time is measured exactly from local midnight so that same-day
    differences are exact; only the sunrise instant carries rounding.
    """
    rise = (_sunrise_jd(gt) - _local_midnight_jd(gt)) * 1440.0
    since_midnight = (dt.datetime.combine(gt.date, gt.time)
                      - dt.datetime.combine(gt.date, dt.time(0))) / dt.timedelta(minutes=1)
    return since_midnight - rise


def solar_position(gt: GeoTime) -> SolarPosition:
    """Sun altitude/azimuth for ``gt``; minutes_from_sunrise is None at polar latitudes."""
    alt, az = sun_angles(julian_day(gt.utc()), gt.latitude, gt.longitude)
    try:
        msr = sunrise_minutes(gt)
    except UnsupportedRegion:
        msr = None
    return SolarPosition(float(alt), float(az), msr)
