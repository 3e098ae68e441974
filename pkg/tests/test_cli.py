import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mrtforge.cli import main
from mrtforge.config import format_config
from mrtforge.data import FLUX_COLS
from mrtforge.radiation import BodyRadiationProfile, DirectionalFluxes, tmrt_from_fluxes
from mrtforge.metrics import compute_metrics
from mrtforge.svgplot import annotation

TRAIN = {"data": "synth/data.csv", "image_dir": "synth/images", "fisheye_size": "128",
         "hidden_dims": "16", "max_epochs": "5", "batch_size": "16", "seed": "1"}


def run(*argv):
    return main(["--threads", "1", *map(str, argv)])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--n", 80, "--seed", 7, "--out", d / "synth", "--face-size", 64) == 0
    (d / "run.cfg").write_text(format_config(TRAIN))
    assert run("train", "--config", d / "run.cfg", "--out-dir", d / "run") == 0
    return d


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_outputs(work):
    rows = _read(work / "synth" / "data.csv")
    assert len(rows) == 80
    assert len(list((work / "synth" / "images").glob("*.png"))) == 80 * 6
    truth = _read(work / "synth" / "truth.csv")
    prof = BodyRadiationProfile()
    for t in truth:
        v = [float(t[c]) for c in FLUX_COLS]
        f = DirectionalFluxes(v[:6], v[6:])
        assert abs(tmrt_from_fluxes(f, prof) - float(t["tmrt_C"])) < 1e-9


def test_synth_bit_identical(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--n", 10, "--seed", 3, "--out", tmp_path / name, "--face-size", 64) == 0
    for f in sorted((tmp_path / "a").rglob("*.*")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_synth_zero_is_usage_error(tmp_path, capsys):
    assert run("synth", "--n", 0, "--out", tmp_path) == 2
    assert "--n" in capsys.readouterr().err


def test_train_outputs(work):
    out = work / "run"
    for name in ("checkpoint.json", "history.csv", "metrics.json", "validation.csv"):
        assert (out / name).is_file()
    m = json.loads((out / "metrics.json").read_text())
    assert m["n"] == len(_read(out / "validation.csv"))


def test_train_missing_csv(tmp_path, capsys):
    (tmp_path / "run.cfg").write_text(format_config({"data": "nope.csv"}))
    assert run("train", "--config", tmp_path / "run.cfg") == 2
    assert "nope.csv" in capsys.readouterr().err


def test_evaluate_reproduces_training_metrics(work, tmp_path):
    assert run("evaluate", "--checkpoint", work / "run" / "checkpoint.json",
               "--data", work / "run" / "validation.csv", "--out", tmp_path / "m.json") == 0
    ev = json.loads((tmp_path / "m.json").read_text())
    tr = json.loads((work / "run" / "metrics.json").read_text())
    for k in ("rmse", "r2", "mbe", "mape"):
        assert abs(ev[k] - tr[k]) < 1e-9, k


def test_evaluate_bit_reproducible(work, tmp_path):
    for name in ("a.json", "b.json"):
        assert run("evaluate", "--checkpoint", work / "run" / "checkpoint.json",
                   "--data", work / "synth" / "data.csv", "--out", tmp_path / name) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_evaluate_bad_checkpoint(work, tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"format": "something else"}')
    assert run("evaluate", "--checkpoint", tmp_path / "c.json", "--data", work / "synth" / "data.csv") == 2
    rows = _read(work / "synth" / "data.csv")
    with open(tmp_path / "d.csv", "w", newline="") as fh:
        cols = [c for c in rows[0] if c != "svf"]
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    assert run("evaluate", "--checkpoint", work / "run" / "checkpoint.json", "--data", tmp_path / "d.csv") == 2
    assert "svf" in capsys.readouterr().err


def test_predict_physics_consistency(work, tmp_path):
    assert run("predict", "--checkpoint", work / "run" / "checkpoint.json",
               "--data", work / "synth" / "data.csv", "--out", tmp_path / "p.csv") == 0
    rows = _read(tmp_path / "p.csv")
    assert len(rows) == 80
    prof = BodyRadiationProfile()
    for r in rows:
        v = [float(r[f"{c}_pred"]) for c in FLUX_COLS]
        assert min(v) >= 0
        assert abs(tmrt_from_fluxes(DirectionalFluxes(v[:6], v[6:]), prof) - float(r["tmrt_pred"])) < 1e-6


def test_plot(work, tmp_path):
    assert run("predict", "--checkpoint", work / "run" / "checkpoint.json",
               "--data", work / "synth" / "data.csv", "--out", tmp_path / "p.csv") == 0
    assert run("plot", "--pred", tmp_path / "p.csv", "--out", tmp_path / "p.svg") == 0
    root = ET.parse(tmp_path / "p.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f".//{ns}circle")) == 80
    rows = _read(tmp_path / "p.csv")
    rep = compute_metrics([float(r["tmrt_C"]) for r in rows], [float(r["tmrt_pred"]) for r in rows])
    text = [t.text for t in root.iter(f"{ns}text") if t.get("class") == "metrics"]
    assert text == [annotation(rep)]
    assert f"RMSE = {rep.rmse:.2f}" in text[0] and f"R² = {rep.r2:.2f}" in text[0]


def test_plot_empty(tmp_path):
    (tmp_path / "p.csv").write_text("image_id,tmrt_pred,tmrt_C\n")
    assert run("plot", "--pred", tmp_path / "p.csv", "--out", tmp_path / "p.svg") == 2
    assert not (tmp_path / "p.svg").exists()


def test_shade_command(tmp_path, capsys):
    from mrtforge.fisheye import cube_to_fisheye, write_png
    from mrtforge.synth import Scene, render_cube
    write_png(tmp_path / "open.png", cube_to_fisheye(render_cube(Scene(), 64), 256).rgb)
    base = ["shade", "--fisheye", tmp_path / "open.png", "--lat", 33.4255, "--lon", -111.94,
            "--date", "2018-06-21", "--utc-offset", -420]
    assert run(*base, "--time", "12:00") == 0
    day = json.loads(capsys.readouterr().out)
    assert day["predicted_shade"] is False and day["sun_altitude"] > 70
    assert run(*base, "--time", "23:00") == 0
    night = json.loads(capsys.readouterr().out)
    assert night["night"] is True and night["predicted_shade"] is True


def test_fisheye_command(tmp_path):
    from mrtforge.fisheye import FACES, CubeMap, save_cube
    save_cube(tmp_path / "cubes", "sky", CubeMap({f: np.full((64, 64, 3), (60, 120, 220), np.uint8)
                                                 for f in FACES}))
    assert run("fisheye", "--cube-dir", tmp_path / "cubes", "--out-dir", tmp_path / "fe", "--size", 128) == 0
    rep = json.loads((tmp_path / "fe" / "validation.json").read_text())
    assert rep["sky"]["fisheye_fraction"] == pytest.approx(1.0) and rep["sky"]["passed"]
    (tmp_path / "cubes" / "sky_E.png").write_bytes(b"broken")
    assert run("fisheye", "--cube-dir", tmp_path / "cubes", "--out-dir", tmp_path / "fe2") == 2


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["train"]) == 2
    assert main(["--threads", "0", "synth", "--n", "1", "--out", "x"]) == 2
