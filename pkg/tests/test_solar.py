import csv
import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrtforge.solar import (GeoTime, InvalidInput, UnsupportedRegion, solar_position,
                            sunrise_minutes, sunrise_utc)

TEMPE = dict(utc_offset_min=-420, latitude=33.4255, longitude=-111.94)


def tempe(date, time):
    return GeoTime.parse(date, time, **TEMPE)


def test_equator_equinox_noon_is_near_zenith():
    # solar noon at lon 0 on 2018-03-20 is about 12:07 UTC
    sp = solar_position(GeoTime.parse("2018-03-20", "12:07", 0, 0.0, 0.0))
    assert sp.altitude_deg > 89.5


def test_tempe_solstice_noon(tempe_reference):
    ref = tempe_reference
    sp = solar_position(tempe("2018-06-21", ref["solar_noon_local"]))
    assert sp.altitude_deg == pytest.approx(ref["noon_altitude_deg"], abs=0.3)
    assert sp.altitude_deg == pytest.approx(80.0, abs=0.3)
    assert sp.azimuth_deg == pytest.approx(180.0, abs=1.0)


def test_tempe_night():
    assert solar_position(tempe("2018-06-21", "23:00")).altitude_deg < 0
    assert solar_position(tempe("2018-06-21", "23:00")).is_night


def test_tempe_minutes_from_sunrise():
    m = sunrise_minutes(tempe("2018-06-21", "07:30"))
    assert m == pytest.approx(132, abs=2)
    m2 = sunrise_minutes(tempe("2018-06-21", "08:30"))
    assert m2 - m == pytest.approx(60.0, abs=1e-9)


def test_zero_at_sunrise():
    gt = tempe("2018-06-21", "12:00")
    rise = sunrise_utc(gt) + dt.timedelta(minutes=TEMPE["utc_offset_min"])
    at = GeoTime.parse("2018-06-21", rise.strftime("%H:%M:%S.%f"), **TEMPE)
    assert sunrise_minutes(at) == pytest.approx(0.0, abs=1e-3)


def test_negative_before_sunrise():
    assert sunrise_minutes(tempe("2018-06-21", "04:30")) < 0


def test_invalid_date_rejected():
    with pytest.raises(InvalidInput):
        tempe("2018-02-30", "12:00")


@pytest.mark.parametrize("lat", [66.5, 70.0, -80.0])
def test_polar_latitudes_unsupported(lat):
    with pytest.raises(UnsupportedRegion):
        sunrise_minutes(GeoTime.parse("2018-06-21", "12:00", 0, lat, 0.0))


@pytest.mark.parametrize("lat,lon", [(91, 0), (0, 181), (-91, 0)])
def test_out_of_range_coordinates(lat, lon):
    with pytest.raises(InvalidInput):
        GeoTime.parse("2018-06-21", "12:00", 0, lat, lon)


def test_azimuth_monotone_through_noon():
    az = [solar_position(tempe("2018-06-21", f"{h:02d}:{m:02d}")).azimuth_deg
          for h in range(6, 18) for m in range(60)]
    assert np.all(np.diff(az) > 0)
    assert all(0 <= a < 360 for a in az)


def test_altitude_symmetric_about_noon(tempe_reference):
    noon = dt.datetime.strptime("2018-06-21 " + tempe_reference["solar_noon_local"],
                                "%Y-%m-%d %H:%M:%S.%f")
    for k in (15, 60, 180, 300):
        a = solar_position(tempe("2018-06-21", (noon - dt.timedelta(minutes=k)).strftime("%H:%M:%S.%f")))
        b = solar_position(tempe("2018-06-21", (noon + dt.timedelta(minutes=k)).strftime("%H:%M:%S.%f")))
        assert abs(a.altitude_deg - b.altitude_deg) < 0.5


@settings(max_examples=60, deadline=None)
@given(start=st.integers(5 * 60 + 30, 12 * 60), delta=st.integers(0, 10 * 60))
def test_minutes_from_sunrise_linear_in_clock_time(start, delta):
    t1 = f"{start // 60:02d}:{start % 60:02d}"
    end = start + delta
    if end >= 24 * 60:
        return
    t2 = f"{end // 60:02d}:{end % 60:02d}"
    d = sunrise_minutes(tempe("2018-07-04", t2)) - sunrise_minutes(tempe("2018-07-04", t1))
    assert d == pytest.approx(delta, abs=1e-6)


def test_oracle_table_agreement(fixtures_dir):
    alt_err = az_err = rise_err = 0.0
    with open(fixtures_dir / "solar_oracle.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    for r in rows:
        gt = GeoTime.parse(r["date"], r["time"], int(r["utc_offset_min"]), float(r["lat"]),
                           float(r["lon"]))
        sp = solar_position(gt)
        alt_err = max(alt_err, abs(sp.altitude_deg - float(r["altitude_deg"])))
        d = abs(sp.azimuth_deg - float(r["azimuth_deg"])) % 360
        az_err = max(az_err, min(d, 360 - d))
        rise = sunrise_utc(gt) + dt.timedelta(minutes=int(r["utc_offset_min"]))
        rise_min = rise.hour * 60 + rise.minute + rise.second / 60 + rise.microsecond / 6e7
        rise_err = max(rise_err, abs(rise_min - float(r["sunrise_local_min"])))
    assert alt_err < 0.3
    assert az_err < 0.5
    assert rise_err < 2.0
