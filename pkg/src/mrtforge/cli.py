"""Command-line interface: ``mrtforge <command> ...``.

Exit status is 0 on success, 2 for usage or input errors and 3 for runtime
failures. Diagnostics go to stderr; machine-readable output goes to files or
stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import ConfigFileError, load_config
from .data import SchemaError, UnimputableField, write_csv
from .features import FeatureError
from .fisheye import (FisheyeImage, IncompleteCube, cube_to_fisheye, list_cube_ids, load_cube,
                      read_png, save_cube, validate_projection, write_png)
from .models import CheckpointError
from .pipeline import (ImageSource, evaluate, predict_rows, read_predictions, run_training,
                       write_predictions)
from .sky import classify_sky, predict_shade, read_mask_png, segment_sky
from .solar import GeoTime, InvalidInput, UnsupportedRegion, solar_position
from .svgplot import scatter_svg
from .synth import TRUTH_COLUMNS, synth_generate, truth_row
from .training import ConfigError, TrainingDiverged

log = logging.getLogger("mrtforge")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class RunFailure(Exception):
    pass


INPUT_ERRORS = (UsageError, ConfigFileError, SchemaError, UnimputableField, FeatureError,
                CheckpointError, IncompleteCube, InvalidInput, UnsupportedRegion, ConfigError,
                FileNotFoundError, IsADirectoryError)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_fisheye(args):
    cube_dir = Path(args.cube_dir)
    if not cube_dir.is_dir():
        raise UsageError(f"cube directory not found: {cube_dir}")
    ids = list_cube_ids(cube_dir)
    if not ids:
        raise UsageError(f"no cube faces named <id>_<face>.png in {cube_dir}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, failed = {}, []
    for iid in ids:
        try:
            cube = load_cube(cube_dir, iid)
        except IncompleteCube as exc:
            raise IncompleteCube(exc.missing, f"image {iid}: {exc}") from None
        fe = cube_to_fisheye(cube, args.size)
        write_png(out / f"{iid}.png", fe.rgb)
        rep = validate_projection(cube, fe, lambda rgb, valid: classify_sky(rgb, valid))
        reports[iid] = rep.to_dict()
        if not rep.passed:
            failed.append(iid)
    _emit(reports, out / "validation.json")
    if failed:
        raise RunFailure(f"projection validation failed for: {', '.join(failed)}")


def cmd_shade(args):
    gt = GeoTime.parse(args.date, args.time, args.utc_offset, args.lat, args.lon, args.alt)
    sp = solar_position(gt)
    if args.mask:
        mask = read_mask_png(args.mask)
    else:
        mask = segment_sky(FisheyeImage(read_png(args.fisheye)))
    res = predict_shade(mask, sp)
    _emit({"predicted_shade": res.predicted_shade,
           "sun_disk_sky_fraction": res.sun_disk_sky_fraction,
           "sun_altitude": sp.altitude_deg, "sun_azimuth": sp.azimuth_deg,
           "night": res.night})


def cmd_synth(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    out = Path(args.out)
    ds, cubes, truths = synth_generate(args.n, args.seed, face_size=args.face_size)
    img = out / "images"
    img.mkdir(parents=True, exist_ok=True)
    write_csv(out / "data.csv", ds.records)
    for iid, cube in cubes.items():
        save_cube(img, iid, cube)
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRUTH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for t in truths:
            w.writerow(truth_row(t))
    log.info("wrote %d scenes to %s", args.n, out)


def cmd_train(args):
    cfg = load_config(args.config)
    if args.out_dir:
        cfg.out_dir = Path(args.out_dir)
    cfg.check()
    res = run_training(cfg)
    _emit(res.metrics)


def _overrides(args):
    return ImageSource(args.image_dir, args.mask_dir, None, args.features)


def cmd_evaluate(args):
    report = evaluate(args.checkpoint, args.data, _overrides(args))
    _emit(report, args.out)


def cmd_predict(args):
    rows = predict_rows(args.checkpoint, args.data, _overrides(args))
    write_predictions(args.out, rows)


def cmd_plot(args):
    try:
        obs, pred = read_predictions(args.pred)
    except ValueError as exc:
        raise UsageError(f"{args.pred}: {exc}") from None
    if obs.size == 0:
        raise UsageError(f"{args.pred}: no rows with observed and predicted T_mrt")
    Path(args.out).write_text(scatter_svg(obs, pred))


def build_parser():
    p = argparse.ArgumentParser(prog="mrtforge", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS thread count; 1 makes runs bit-reproducible")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fisheye", help="project cube maps to fisheye PNGs and validate")
    s.add_argument("--cube-dir", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--size", type=int, default=1000)
    s.set_defaults(func=cmd_fisheye)

    s = sub.add_parser("shade", help="sun/shade test for one fisheye image")
    s.add_argument("--fisheye", required=True)
    s.add_argument("--lat", type=float, required=True)
    s.add_argument("--lon", type=float, required=True)
    s.add_argument("--date", required=True)
    s.add_argument("--time", required=True)
    s.add_argument("--utc-offset", type=int, required=True, help="minutes east of UTC")
    s.add_argument("--alt", type=float, default=0.0)
    s.add_argument("--mask", help="external sky mask PNG (255 = sky)")
    s.set_defaults(func=cmd_shade)

    s = sub.add_parser("synth", help="generate a synthetic canyon dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--face-size", type=int, default=128)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train per a key = value config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "metrics report on labelled data"),
                                 ("predict", cmd_predict, "per-row fluxes and T_mrt")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--data", required=True)
        s.add_argument("--image-dir")
        s.add_argument("--mask-dir")
        s.add_argument("--features", help="cached image features CSV")
        s.add_argument("--out", required=(name == "predict"))
        s.set_defaults(func=func)

    s = sub.add_parser("plot", help="SVG scatter of predicted vs observed T_mrt")
    s.add_argument("--pred", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be at least 1")
            with threadpool_limits(args.threads):
                args.func(args)
        else:
            args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunFailure, TrainingDiverged) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # any other failure is a runtime error, not a crash trace
        log.debug("unhandled", exc_info=True)
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
