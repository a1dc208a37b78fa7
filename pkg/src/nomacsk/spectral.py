"""RGB LED spectra (H-model), ideal colour filters and received power matrices.

Spectra are sampled on a uniform wavelength grid covering 380-780 nm.  The
illumination code works on the 1 nm grid of the CIE tables; the link model
integrates on a finer grid (``LINK_GRID_STEP``) so that the small
cross-colour entries of the power matrix are resolved to better than 0.1%.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

LAMBDA_MIN = 380.0
LAMBDA_MAX = 780.0
DEFAULT_GRID_STEP = 1.0
LINK_GRID_STEP = 0.1

COLORS = ("red", "green", "blue")


@dataclass(frozen=True)
class LedColorParams:
    """H-model shape parameters for one LED colour."""

    peak_nm: float
    left_width_nm: float
    right_width_nm: float
    k1: float
    k2: float

    def __post_init__(self):
        if not LAMBDA_MIN <= self.peak_nm <= LAMBDA_MAX:
            raise DomainError(f"peak wavelength {self.peak_nm} nm outside [380, 780]")
        if self.left_width_nm <= 0 or self.right_width_nm <= 0:
            raise DomainError("half widths must be positive")
        if self.k1 <= 0 or self.k2 < 1:
            raise DomainError("shape parameters require k1 > 0 and k2 >= 1")


# OSRAM LZ4-00MA00 (red, green, blue)
RED = LedColorParams(632.5, 23.84, 14.74, 2.0, 6.0)
GREEN = LedColorParams(517.7, 29.38, 45.21, 2.0, 3.0)
BLUE = LedColorParams(453.0, 18.99, 25.5, 2.0, 5.0)
DEFAULT_LEDS = (RED, GREEN, BLUE)


@dataclass(frozen=True)
class FilterBank:
    """Ideal rectangular receiver filters, one band per colour (R, G, B)."""

    lower_nm: tuple[float, float, float] = (590.0, 485.0, 380.0)
    upper_nm: tuple[float, float, float] = (700.0, 590.0, 485.0)
    gain: float = 1.0

    def __post_init__(self):
        for lo, hi in zip(self.lower_nm, self.upper_nm):
            if not LAMBDA_MIN <= lo < hi <= LAMBDA_MAX:
                raise DomainError(f"filter band [{lo}, {hi}] is not inside [380, 780]")
        if self.gain < 0:
            raise DomainError("filter gain must be nonnegative")

    @property
    def bands(self):
        return list(zip(self.lower_nm, self.upper_nm))


DEFAULT_FILTERS = FilterBank()


@dataclass(frozen=True, eq=False)
class SpectralCurve:
    """Nonnegative spectral density sampled on a uniform grid over [380, 780] nm."""

    start_nm: float
    step_nm: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        n_steps = (LAMBDA_MAX - LAMBDA_MIN) / self.step_nm
        if self.step_nm <= 0 or abs(n_steps - round(n_steps)) > 1e-9:
            raise DomainError(f"step {self.step_nm} nm does not divide [380, 780] evenly")
        if self.start_nm != LAMBDA_MIN or samples.shape != (int(round(n_steps)) + 1,):
            raise DomainError("curve must cover exactly [380, 780] nm")
        if np.any(samples < 0) or not np.all(np.isfinite(samples)):
            raise DomainError("spectral samples must be finite and nonnegative")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def wavelengths(self) -> np.ndarray:
        return wavelength_grid(self.step_nm)

    def integral(self) -> float:
        return float(np.trapezoid(self.samples, dx=self.step_nm))

    def scaled(self, factor: float) -> "SpectralCurve":
        return SpectralCurve(self.start_nm, self.step_nm, self.samples * factor)

    def __add__(self, other: "SpectralCurve") -> "SpectralCurve":
        if other.step_nm != self.step_nm:
            raise DomainError("curves live on different grids")
        return SpectralCurve(self.start_nm, self.step_nm, self.samples + other.samples)

    @classmethod
    def zeros(cls, step_nm: float = DEFAULT_GRID_STEP) -> "SpectralCurve":
        return cls(LAMBDA_MIN, step_nm, np.zeros_like(wavelength_grid(step_nm)))


def wavelength_grid(step_nm: float = DEFAULT_GRID_STEP) -> np.ndarray:
    n = int(round((LAMBDA_MAX - LAMBDA_MIN) / step_nm))
    return np.linspace(LAMBDA_MIN, LAMBDA_MAX, n + 1)


def led_psd_value(params: LedColorParams, wavelength_nm):
    """Peak-normalised H-model density at ``wavelength_nm`` (scalar or array).

    ``(g + k1 * g**k2) / (1 + k1)`` with ``g`` an asymmetric Gaussian whose
    width switches from the left to the right half width at the peak.
    """
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam < LAMBDA_MIN) or np.any(lam > LAMBDA_MAX):
        raise DomainError("wavelength outside [380, 780] nm")
    width = np.where(lam < params.peak_nm, params.left_width_nm, params.right_width_nm)
    g = np.exp(-((lam - params.peak_nm) ** 2) / width**2)
    value = (g + params.k1 * g**params.k2) / (1.0 + params.k1)
    return float(value) if value.ndim == 0 else value


def normalized_psd(params: LedColorParams, step_nm: float = DEFAULT_GRID_STEP) -> SpectralCurve:
    """H-model spectrum scaled so its trapezoidal integral is exactly one."""
    values = led_psd_value(params, wavelength_grid(step_nm))
    values = values / np.trapezoid(values, dx=step_nm)
    return SpectralCurve(LAMBDA_MIN, step_nm, values)


def default_psds(step_nm: float = DEFAULT_GRID_STEP, leds=DEFAULT_LEDS) -> tuple[SpectralCurve, ...]:
    return tuple(normalized_psd(p, step_nm) for p in leds)


def band_integral(curve: SpectralCurve, lower_nm: float, upper_nm: float) -> float:
    """Trapezoidal integral of ``curve`` over [lower_nm, upper_nm].

    Band edges that fall between grid points are handled by linear
    interpolation, so the result is exact for piecewise-linear curves.
    """
    lam = curve.wavelengths
    inside = (lam > lower_nm) & (lam < upper_nm)
    x = np.concatenate(([lower_nm], lam[inside], [upper_nm]))
    y = np.interp(x, lam, curve.samples)
    return float(np.trapezoid(y, x))


def band_matrix(psds, filters: FilterBank = DEFAULT_FILTERS) -> np.ndarray:
    """``B[i, j]`` = filter-weighted integral of LED ``i`` over receiver band ``j``."""
    out = np.empty((3, 3))
    for i, curve in enumerate(psds):
        for j, (lo, hi) in enumerate(filters.bands):
            out[i, j] = filters.gain * band_integral(curve, lo, hi)
    return out


@lru_cache(maxsize=32)
def _cached_band_matrix(leds, filters, step_nm):
    m = band_matrix(default_psds(step_nm, leds), filters)
    m.setflags(write=False)
    return m


def link_band_matrix(leds=DEFAULT_LEDS, filters: FilterBank = DEFAULT_FILTERS,
                     step_nm: float = LINK_GRID_STEP) -> np.ndarray:
    """Cached band matrix on the link-model grid."""
    return _cached_band_matrix(tuple(leds), filters, step_nm)


def _check_symbol(symbol) -> np.ndarray:
    s = np.asarray(symbol, dtype=float)
    if s.shape != (3,):
        raise DomainError("symbol must be an intensity triple")
    if np.any(s < 0):
        raise DomainError("symbol components must be nonnegative")
    return s


def received_power_matrix(psds, filters: FilterBank, symbol, h: float,
                          p_led: float = 1.0) -> np.ndarray:
    """Received optical powers ``p[i, j]`` (W) for LED colour ``i`` seen through filter ``j``.

    Each colour carries a third of ``p_led``; ``psds`` must be unit-normalised.
    """
    s = _check_symbol(symbol)
    if h <= 0:
        raise DomainError("channel gain must be positive")
    return (p_led / 3.0) * h * s[:, None] * band_matrix(psds, filters)


def power_matrix_from_bands(bands: np.ndarray, symbol, h: float, p_led: float = 1.0) -> np.ndarray:
    """Same as :func:`received_power_matrix` for a precomputed band matrix."""
    s = _check_symbol(symbol)
    return (p_led / 3.0) * h * s[:, None] * bands


def composite_power_components(s1, s2, rho: float, h: float, bands: np.ndarray | None = None,
                               p_led: float = 1.0):
    """Split the received power of a superposed NOMA symbol into its two sources.

    Source 1 is ``s1`` scaled by ``rho`` and source 2 is ``s2`` scaled by
    ``1 - rho``; the two matrices sum to the power matrix of the composite
    symbol.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"allocation {rho} outside [0, 1]")
    if bands is None:
        bands = link_band_matrix()
    s1 = _check_symbol(s1)
    s2 = _check_symbol(s2)
    return (power_matrix_from_bands(bands, rho * s1, h, p_led),
            power_matrix_from_bands(bands, (1.0 - rho) * s2, h, p_led))
