import numpy as np
import pytest

from mrtforge.radiation import BodyRadiationProfile, tmrt_from_fluxes
from mrtforge.synth import Scene, Weather, generate_scene, scene_fluxes, sky_view_factor, synth_generate, view_shares

WX = Weather(35.0, 30.0, 2.0)


def test_open_scene_exposed_full_sky():
    f, shaded = scene_fluxes(Scene(), 180.0, 60.0, WX)
    assert not shaded
    assert sky_view_factor(Scene()) == pytest.approx(1.0, abs=1e-12)
    assert f.shortwave[0] > WX.dni * np.sin(np.radians(60.0))


def test_view_shares_partition():
    sh = view_shares(Scene([(30.0, 40.0, 50.0), (200.0, 20.0, 25.0)]))
    assert np.allclose(sh["sky"] + sh["wall"] + sh["ground"], 1.0)
    assert sh["ground"][0] == pytest.approx(0.0, abs=1e-12)
    assert sh["sky"][1] == pytest.approx(0.0, abs=1e-12)


def test_uniform_horizon_svf_analytic():
    assert sky_view_factor(Scene([(0.0, 180.0, 30.0)])) == pytest.approx(0.75, abs=5e-3)


def test_enclosed_scene_no_direct_beam():
    closed = Scene([(0.0, 180.0, 89.9)])
    f, shaded = scene_fluxes(closed, 135.0, 70.0, WX)
    assert shaded
    # what remains is beam reflected off the sunlit facades, a few percent of the beam
    direct = WX.dni * np.sin(np.radians(70.0))
    assert np.all(f.shortwave < 0.05 * direct)
    assert f.shortwave[1] == 0.0


def test_night_has_no_shortwave():
    f, shaded = scene_fluxes(Scene([(90.0, 30.0, 40.0)]), 300.0, -10.0, WX)
    assert shaded and np.all(f.shortwave == 0.0)
    assert np.all(f.longwave > 0)


def test_truth_self_consistent():
    ds, _, truths = synth_generate(40, 11, face_size=None)
    prof = BodyRadiationProfile()
    for rec, t in zip(ds.records, truths):
        assert abs(tmrt_from_fluxes(t.fluxes, prof) - t.tmrt_C) < 1e-9
        assert rec.tmrt_C == t.tmrt_C and rec.shade == t.shade
        assert np.all(t.fluxes.shortwave >= 0)
        if t.night:
            assert np.all(t.fluxes.shortwave == 0)


def test_generation_deterministic():
    a = synth_generate(5, 3, face_size=64)
    b = synth_generate(5, 3, face_size=64)
    assert a[0].records == b[0].records
    for iid in a[1]:
        for f in a[1][iid].faces:
            assert np.array_equal(a[1][iid].faces[f], b[1][iid].faces[f])


def test_scene_streams_independent():
    # scene i does not depend on how many scenes precede or follow it
    rec, _, _ = generate_scene(9, 4)
    ds, _, _ = synth_generate(6, 9, face_size=None)
    assert ds.records[4] == rec


def test_zero_scenes_rejected():
    with pytest.raises(ValueError):
        synth_generate(0, 1)
