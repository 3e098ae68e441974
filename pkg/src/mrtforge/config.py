"""Flat ``key = value`` run configuration.

Grammar, one entry per line::

    line    := blank | comment | entry
    comment := optional whitespace, '#', anything
    entry   := key, optional whitespace, '=', optional whitespace, value
    key     := [a-z_][a-z0-9_]*

Values are taken verbatim after trimming surrounding whitespace; there is no
quoting and no inline comments. Booleans are ``true``/``false``/``1``/``0``,
lists are comma separated. Unknown or repeated keys are errors. Relative
paths resolve against the directory holding the config file. The
``MRTFORGE_SEED`` environment variable overrides ``seed``.
"""
from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .features import FeatureToggles
from .radiation import BodyRadiationProfile
from .training import TrainConfig

_KEY = re.compile(r"^[a-z_][a-z0-9_]*$")
_PATHS = ("data", "image_dir", "mask_dir", "embeddings", "out_dir", "checkpoint", "features")
_PROFILE = tuple(f.name for f in dataclasses.fields(BodyRadiationProfile))
_TOGGLES = tuple(f.name for f in dataclasses.fields(FeatureToggles))
_TRAIN = tuple(f.name for f in dataclasses.fields(TrainConfig))


class ConfigFileError(ValueError):
    pass


@dataclass
class RunConfig:
    data: Path | None = None
    image_dir: Path | None = None
    mask_dir: Path | None = None
    embeddings: Path | None = None
    features: Path | None = None       # cached image features CSV
    out_dir: Path = Path("run")
    checkpoint: Path | None = None
    mode: str = "split"                # split | cv | search
    fisheye_size: int = 512
    search_trials: int = 20
    impute: bool = True
    remove_outliers: bool = True
    toggles: FeatureToggles = field(default_factory=FeatureToggles)
    train: TrainConfig = field(default_factory=TrainConfig)
    profile: BodyRadiationProfile = field(default_factory=BodyRadiationProfile)

    @property
    def seed(self):
        return self.train.seed

    def check(self):
        if self.mode not in ("split", "cv", "search"):
            raise ConfigFileError(f"mode must be split, cv or search, got {self.mode!r}")
        if self.data is None:
            raise ConfigFileError("data is required")
        for name in ("data", "embeddings", "features"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigFileError(f"{name}: file not found: {p}")
        for name in ("image_dir", "mask_dir"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_dir():
                raise ConfigFileError(f"{name}: directory not found: {p}")
        return self

    def to_dict(self):
        out = {name: (None if getattr(self, name) is None else str(getattr(self, name)))
               for name in _PATHS}
        out.update(mode=self.mode, fisheye_size=self.fisheye_size,
                   search_trials=self.search_trials, impute=self.impute,
                   remove_outliers=self.remove_outliers, toggles=self.toggles.to_dict(),
                   train=self.train.to_dict(), profile=self.profile.to_dict())
        return out


def _bool(text):
    t = text.lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(kind, text):
    if kind is bool:
        return _bool(text)
    if kind is tuple:
        return tuple(int(v) for v in text.split(",") if v.strip())
    return kind(text)


def parse_entries(text: str) -> dict:
    """Parse config text into an ordered ``{key: raw value}`` mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigFileError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigFileError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def build_config(entries: dict, base_dir=Path("."), env=None) -> RunConfig:
    env = os.environ if env is None else env
    base_dir = Path(base_dir)
    run, toggles, train, profile = {}, {}, {}, {}
    train_types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    for key, value in entries.items():
        try:
            if key in _PATHS:
                p = Path(value)
                run[key] = p if p.is_absolute() else base_dir / p
            elif key in ("mode",):
                run[key] = value
            elif key in ("fisheye_size", "search_trials"):
                run[key] = int(value)
            elif key in ("impute", "remove_outliers"):
                run[key] = _bool(value)
            elif key in _TOGGLES:
                toggles[key] = _bool(value)
            elif key in _PROFILE:
                profile[key] = float(value)
            elif key in _TRAIN:
                kind = {"str": str, "int": int, "float": float, "tuple": tuple}[train_types[key]]
                train[key] = _convert(kind, value)
            else:
                raise ConfigFileError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigFileError):
                raise
            raise ConfigFileError(f"{key}: {exc}") from None
    if env.get("MRTFORGE_SEED"):
        try:
            train["seed"] = int(env["MRTFORGE_SEED"])
        except ValueError:
            raise ConfigFileError("MRTFORGE_SEED must be an integer") from None
    try:
        return RunConfig(**run, toggles=FeatureToggles(**toggles), train=TrainConfig(**train),
                         profile=BodyRadiationProfile(**profile))
    except ValueError as exc:
        raise ConfigFileError(str(exc)) from None


def load_config(path, env=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc.strerror}") from None
    return build_config(parse_entries(text), path.parent, env)


def format_config(entries: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in entries.items())
