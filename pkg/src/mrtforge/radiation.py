"""Six-directional radiation balance and mean radiant temperature.

The body absorbs shortwave (``S``) and longwave (``L``) flux from six
directions. Up/down fluxes share one projection weight and the four lateral
directions share another; the absorbed flux is converted to a temperature with
the Stefan-Boltzmann law.

All arithmetic is float64. Array inputs broadcast over leading axes, with the
six directions on the last axis in :data:`DIRECTIONS` order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

SIGMA = 5.670374419e-8  # W m-2 K-4
KELVIN = 273.15

DIRECTIONS = ("up", "down", "north", "east", "south", "west")
Q_FLOOR = 1e-3  # W m-2, lower clamp used when differentiating through the balance


class DomainError(ValueError):
    """Input outside the physical domain of the radiation balance."""


@dataclass(frozen=True)
class BodyRadiationProfile:
    """Absorption coefficients and directional weights of a standing person."""

    a_k: float = 0.70
    a_l: float = 0.97
    a1: float = 0.97
    w_updown: float = 0.06
    w_others: float = 0.22
    sigma: float = SIGMA

    def __post_init__(self):
        for name in ("a_k", "a_l", "a1"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {v}")
        if self.w_updown <= 0 or self.w_others <= 0:
            raise DomainError("directional weights must be positive")
        total = 2 * self.w_updown + 4 * self.w_others
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"2*w_updown + 4*w_others must equal 1, got {total!r}")
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")

    @property
    def weights(self) -> np.ndarray:
        """Per-direction weights in DIRECTIONS order."""
        w = self.w_updown
        o = self.w_others
        return np.array([w, w, o, o, o, o])

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class DirectionalFluxes:
    """Shortwave and longwave flux densities (W m-2) for the six directions."""

    shortwave: np.ndarray = field(default_factory=lambda: np.zeros(6))
    longwave: np.ndarray = field(default_factory=lambda: np.zeros(6))
    measured: bool = False

    def __post_init__(self):
        self.shortwave = np.asarray(self.shortwave, dtype=np.float64)
        self.longwave = np.asarray(self.longwave, dtype=np.float64)
        if self.shortwave.shape[-1:] != (6,) or self.longwave.shape[-1:] != (6,):
            raise ValueError("fluxes need six directions on the last axis")
        _check_fluxes(self.shortwave, self.longwave)
        if self.measured and np.any((self.longwave < 50) | (self.longwave > 1200)):
            raise DomainError("measured longwave outside plausibility band [50, 1200] W m-2")

    @classmethod
    def from_mapping(cls, values: dict, measured: bool = False) -> "DirectionalFluxes":
        """Build from keys like ``S_up`` / ``L_north``."""
        s = [values[f"S_{d}"] for d in DIRECTIONS]
        l = [values[f"L_{d}"] for d in DIRECTIONS]
        return cls(s, l, measured)

    def as_vector(self) -> np.ndarray:
        """Concatenate to (..., 12): six shortwave then six longwave."""
        return np.concatenate([self.shortwave, self.longwave], axis=-1)


def _check_fluxes(s, l):
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(l))):
        raise DomainError("fluxes must be finite")
    if np.any(s < 0) or np.any(l < 0):
        raise DomainError("flux densities must be non-negative")


def _split(f):
    if isinstance(f, DirectionalFluxes):
        return f.shortwave, f.longwave
    s, l = f
    return np.asarray(s, dtype=np.float64), np.asarray(l, dtype=np.float64)


def total_flux(f, p: BodyRadiationProfile = BodyRadiationProfile(), check: bool = True):
    """Absorbed radiative flux Q_total (W m-2).

    ``f`` is a :class:`DirectionalFluxes` or an ``(S, L)`` pair of arrays with
    six directions on the last axis.
    """
    s, l = _split(f)
    if check:
        _check_fluxes(s, l)
    absorbed = p.a_k * s + p.a_l * l
    return absorbed @ p.weights


def tmrt_from_flux(q, p: BodyRadiationProfile = BodyRadiationProfile()):
    """Mean radiant temperature (degC) from absorbed flux Q_total."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0):
        raise DomainError("Q_total must be non-negative")
    t = (q / (p.a1 * p.sigma)) ** 0.25 - KELVIN
    return float(t) if t.ndim == 0 else t


def tmrt_from_fluxes(f, p: BodyRadiationProfile = BodyRadiationProfile()):
    """Mean radiant temperature (degC) from six-directional fluxes."""
    return tmrt_from_flux(total_flux(f, p), p)


def dtmrt_dq(q, p: BodyRadiationProfile = BodyRadiationProfile()):
    """Derivative of T_mrt with respect to Q_total."""
    q = np.asarray(q, dtype=np.float64)
    c = p.a1 * p.sigma
    return 0.25 / c * (q / c) ** -0.75


def tmrt_gradient(f, p: BodyRadiationProfile = BodyRadiationProfile()) -> np.ndarray:
    """Partial derivatives of T_mrt with respect to the 12 fluxes.

    Returns an array shaped ``(..., 12)``: six shortwave partials followed by
    six longwave partials, directions in DIRECTIONS order.
    """
    q = total_flux(f, p)
    if np.any(q <= 0):
        raise DomainError("gradient is singular at Q_total = 0")
    g = dtmrt_dq(q, p)[..., None]
    w = p.weights
    return np.concatenate([g * (p.a_k * w), g * (p.a_l * w)], axis=-1)
