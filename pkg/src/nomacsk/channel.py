"""Line-of-sight Lambertian channel gains and random user channel pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

H_MIN = 2.84e-5
H_MAX = 5.98e-4


@dataclass(frozen=True)
class GeometryConfig:
    pd_area_m2: float = 1e-4
    half_angle_deg: float = 60.0
    filter_gain: float = 1.0
    lens_gain: float = 1.0
    refractive_index: float = 1.5
    fov_deg: float = 90.0
    tx_position: tuple[float, float, float] = (2.5, 2.5, 3.0)
    rx_position: tuple[float, float, float] = (2.5, 2.5, 2.0)

    def __post_init__(self):
        if self.pd_area_m2 <= 0:
            raise DomainError("photodiode area must be positive")
        if not 0.0 < self.half_angle_deg < 90.0:
            raise DomainError("LED half angle must lie in (0, 90) degrees")


@dataclass(frozen=True)
class ChannelPair:
    """Gains of the stronger (``h1``) and weaker (``h2``) user."""

    h1: float
    h2: float

    def __post_init__(self):
        if not 0.0 < self.h2 <= self.h1:
            raise DomainError(f"need 0 < h2 <= h1, got h1={self.h1}, h2={self.h2}")

    @property
    def ratio(self) -> float:
        return self.h2 / self.h1

    @classmethod
    def from_ratio(cls, h1: float, r: float) -> "ChannelPair":
        return cls(h1, h1 * r)


def lambert_order(half_angle_deg: float) -> float:
    if not 0.0 < half_angle_deg < 90.0:
        raise DomainError("half angle must lie in (0, 90) degrees")
    m = -math.log(2.0) / math.log(math.cos(math.radians(half_angle_deg)))
    # cos(60 deg) is not exactly 0.5 in binary; snap roundoff so integer orders come out exact
    nearest = round(m)
    return float(nearest) if abs(m - nearest) <= 8 * math.ulp(max(m, 1.0)) else m


def los_gain(geom: GeometryConfig, irradiance_deg: float | None = None,
             incidence_deg: float | None = None) -> float:
    """DC gain of the direct path from the LED to the photodiode.

    Both devices face each other vertically unless the angles are given
    explicitly, in which case they override the ones implied by the positions.
    The gain is zero outside the receiver field of view.
    """
    tx = np.asarray(geom.tx_position, dtype=float)
    rx = np.asarray(geom.rx_position, dtype=float)
    d = float(np.linalg.norm(tx - rx))
    if d == 0.0:
        raise DomainError("transmitter and receiver coincide")
    cos_vertical = abs(tx[2] - rx[2]) / d
    phi = math.radians(irradiance_deg) if irradiance_deg is not None else math.acos(cos_vertical)
    psi = math.radians(incidence_deg) if incidence_deg is not None else math.acos(cos_vertical)
    if psi > math.radians(geom.fov_deg) or phi >= math.pi / 2:
        return 0.0
    k = lambert_order(geom.half_angle_deg)
    radiant_intensity = (k + 1.0) / (2.0 * math.pi) * math.cos(phi) ** k
    h = geom.pd_area_m2 * radiant_intensity / d**2 * geom.filter_gain * geom.lens_gain * math.cos(psi)
    return max(h, 0.0)


def extended_bounds(scale: float = 1.0) -> tuple[float, float]:
    """Channel bounds widened by ``scale`` on both sides (lower / scale, upper * scale)."""
    if scale < 1.0:
        raise DomainError("bounds scale must be >= 1")
    return H_MIN / scale, H_MAX * scale


def sample_channel_pair(r: float, rng: np.random.Generator,
                        bounds: tuple[float, float] = (H_MIN, H_MAX)) -> ChannelPair:
    """Draw ``h1`` uniformly from ``[lower, upper / r]`` and set ``h2 = r * h1``."""
    if not 0.0 < r <= 1.0:
        raise DomainError(f"channel ratio {r} outside (0, 1]")
    lower, upper = bounds
    h1 = rng.uniform(lower, upper / r)
    return ChannelPair(h1, h1 * r)


def room_gain_survey(geom: GeometryConfig = GeometryConfig(), step: float = 0.25) -> np.ndarray:
    """LoS gains from a ceiling-centre LED to receivers on a grid inside a 5 x 5 x 3 m room."""
    xs = np.arange(0.5, 4.5 + 1e-9, step)
    zs = np.arange(0.5, 2.5 + 1e-9, step)
    gains = []
    for x in xs:
        for y in xs:
            for z in zs:
                g = GeometryConfig(**{**geom.__dict__, "rx_position": (x, y, z)})
                gains.append(los_gain(g))
    return np.array(gains)
