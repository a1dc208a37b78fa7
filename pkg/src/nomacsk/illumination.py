"""Photometry and colorimetry of the LED light while it carries data.

Communication changes the average emitted spectrum: each colour is scaled by
the expected squared amplitude of the transmitted symbols (the transmitted
symbol power, TSP).  This module computes that altered spectrum and its
luminous flux, correlated colour temperature (CCT) and general colour
rendering index (CRI Ra, CIE 13.3).

All colorimetry runs on the 1 nm grid of the bundled CIE tables.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DomainError, FormatError
from .link import CskConstellation, default_constellation
from .spectral import DEFAULT_LEDS, LAMBDA_MIN, SpectralCurve, default_psds, wavelength_grid

LUMINOUS_EFFICACY = 683.0
PLANCK_C1 = 3.741771852e-16  # W m^2
PLANCK_C2 = 1.4388e-2  # m K, CIE value
CCT_RANGE = (1000, 25000)
DUV_LIMIT = 0.05
DATA_HEADER = "# nomacsk-cie-data v1"


@dataclass(frozen=True, eq=False)
class CieDataset:
    wavelengths: np.ndarray
    cmf: np.ndarray  # rows xbar, ybar, zbar
    tcs: np.ndarray  # rows TCS01..TCS08
    daylight: np.ndarray  # rows S0, S1, S2

    @property
    def v_lambda(self) -> np.ndarray:
        return self.cmf[1]


def _read_table(name: str, n_cols: int) -> tuple[np.ndarray, np.ndarray]:
    text = resources.files("nomacsk").joinpath("data", name).read_text(encoding="utf-8")
    if not text.startswith(DATA_HEADER):
        raise FormatError(f"{name}: missing data header")
    table = np.loadtxt(text.splitlines(), comments="#")
    if table.ndim != 2 or table.shape[1] != n_cols + 1:
        raise FormatError(f"{name}: expected {n_cols + 1} columns")
    if not np.allclose(table[:, 0], wavelength_grid(1.0)):
        raise FormatError(f"{name}: wavelengths must be 380..780 nm at 1 nm")
    return table[:, 0], table[:, 1:].T.copy()


@lru_cache(maxsize=1)
def cie_data() -> CieDataset:
    lam, cmf = _read_table("cie1931_2deg_cmf.txt", 3)
    _, tcs = _read_table("cie_tcs_1_8.txt", 8)
    _, daylight = _read_table("cie_daylight_basis.txt", 3)
    for arr in (cmf, tcs, daylight[:1]):
        arr.setflags(write=False)
    return CieDataset(lam, cmf, tcs, daylight)


def _on_cie_grid(curve: SpectralCurve) -> np.ndarray:
    if curve.step_nm == 1.0:
        return np.asarray(curve.samples)
    return np.interp(wavelength_grid(1.0), curve.wavelengths, curve.samples)


# --- communication-altered spectrum -------------------------------------------------

def transmitted_symbol_power(rho: float, constellation: CskConstellation | None = None,
                             communicating: bool = True) -> np.ndarray:
    """Per-colour mean of ``(rho * S1 + (1 - rho) * S2)**2`` over all symbol pairs.

    Every pair of equiprobable symbols is enumerated, so the result is exact.
    Without communication the LEDs emit constantly and the result is ones.
    """
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"allocation {rho} outside [0, 1]")
    if not communicating:
        return np.ones(3)
    sym = (constellation or default_constellation()).array
    total = np.zeros(3)
    for s1, s2 in itertools.product(sym, repeat=2):
        total += (rho * s1 + (1.0 - rho) * s2) ** 2
    return total / len(sym) ** 2


def altered_psd(psds, tsp, p_led: float = 1.0) -> SpectralCurve:
    """Average emitted spectrum (W/nm): colour ``i`` carries ``p_led / 3`` scaled by ``tsp[i]``."""
    tsp = np.asarray(tsp, dtype=float)
    if tsp.shape != (3,) or np.any(tsp < 0):
        raise DomainError("tsp must be three nonnegative weights")
    out = SpectralCurve.zeros(psds[0].step_nm)
    for curve, w in zip(psds, tsp):
        out = out + curve.scaled(w * p_led / 3.0)
    return out


def luminous_flux(curve: SpectralCurve, data: CieDataset | None = None) -> float:
    data = data or cie_data()
    return float(LUMINOUS_EFFICACY * np.trapezoid(data.v_lambda * _on_cie_grid(curve), dx=1.0))


# --- chromaticity and CCT ------------------------------------------------------------

def tristimulus(spd: np.ndarray, data: CieDataset | None = None) -> np.ndarray:
    data = data or cie_data()
    return data.cmf @ spd


def xyz_to_uv(xyz) -> tuple[float, float]:
    """CIE 1960 UCS chromaticity."""
    x, y, z = xyz
    den = x + 15.0 * y + 3.0 * z
    if den <= 0:
        raise DomainError("spectrum has no visible energy")
    return 4.0 * x / den, 6.0 * y / den


def planck(wavelength_nm, temperature_k):
    """Spectral radiant exitance of a black body (arbitrary consistent units)."""
    lam = np.asarray(wavelength_nm, dtype=float) * 1e-9
    return PLANCK_C1 * lam**-5 / np.expm1(PLANCK_C2 / (lam * temperature_k))


def _planck_uv(temps, data: CieDataset) -> np.ndarray:
    spd = planck(data.wavelengths[None, :], np.asarray(temps, dtype=float)[:, None])
    xyz = spd @ data.cmf.T
    den = xyz[:, 0] + 15.0 * xyz[:, 1] + 3.0 * xyz[:, 2]
    return np.column_stack([4.0 * xyz[:, 0] / den, 6.0 * xyz[:, 1] / den])


@lru_cache(maxsize=1)
def _locus_table():
    temps = np.arange(CCT_RANGE[0], CCT_RANGE[1] + 1, dtype=float)
    return temps, _planck_uv(temps, cie_data())


@dataclass(frozen=True)
class CctResult:
    kelvin: float
    duv: float
    out_of_gamut: bool

    def __float__(self) -> float:
        return self.kelvin


def cct_from_uv(u: float, v: float) -> CctResult:
    """Nearest Planckian temperature to (u, v), searched at 1 K then refined."""
    data = cie_data()
    temps, uv = _locus_table()
    k = int(np.argmin((uv[:, 0] - u) ** 2 + (uv[:, 1] - v) ** 2))
    k = min(max(k, 1), len(temps) - 2)
    # vertex of the parabola through the squared distances at k-1, k, k+1
    d = ((uv[k - 1 : k + 2] - (u, v)) ** 2).sum(axis=1)
    curv = d[0] - 2.0 * d[1] + d[2]
    offset = 0.5 * (d[0] - d[2]) / curv if curv > 0 else 0.0
    t = float(temps[k] + np.clip(offset, -1.0, 1.0))
    pu, pv = _planck_uv([t], data)[0]
    duv = math.copysign(math.hypot(u - pu, v - pv), v - pv)
    out = abs(duv) > DUV_LIMIT
    if out:
        warnings.warn(f"chromaticity is {abs(duv):.3f} from the Planckian locus; CCT is not meaningful",
                      RuntimeWarning, stacklevel=2)
    return CctResult(t, duv, out)


def cct(curve: SpectralCurve) -> CctResult:
    return cct_from_uv(*xyz_to_uv(tristimulus(_on_cie_grid(curve))))


# --- colour rendering ----------------------------------------------------------------

def daylight_spd(temperature_k: float, data: CieDataset | None = None) -> np.ndarray:
    """CIE daylight illuminant at the given CCT (valid 4000-25000 K)."""
    data = data or cie_data()
    t = temperature_k
    if not 4000.0 <= t <= 25000.0:
        raise DomainError("daylight series is defined for 4000-25000 K")
    if t <= 7000.0:
        xd = -4.6070e9 / t**3 + 2.9678e6 / t**2 + 0.09911e3 / t + 0.244063
    else:
        xd = -2.0064e9 / t**3 + 1.9018e6 / t**2 + 0.24748e3 / t + 0.237040
    yd = -3.0 * xd**2 + 2.870 * xd - 0.275
    m = 0.0241 + 0.2562 * xd - 0.7341 * yd
    m1 = round((-1.3515 - 1.7703 * xd + 5.9114 * yd) / m, 3)
    m2 = round((0.0300 - 31.4424 * xd + 30.0717 * yd) / m, 3)
    s0, s1, s2 = data.daylight
    return s0 + m1 * s1 + m2 * s2


def reference_illuminant(temperature_k: float, data: CieDataset | None = None) -> np.ndarray:
    """Planckian radiator below 5000 K, CIE daylight from 5000 K up."""
    data = data or cie_data()
    if temperature_k < 5000.0:
        return planck(data.wavelengths, temperature_k)
    return daylight_spd(temperature_k, data)


def _cd(u, v):
    return (4.0 - u - 10.0 * v) / v, (1.708 * v + 0.404 - 1.481 * u) / v


def _samples_uvY(spd: np.ndarray, data: CieDataset):
    """(u, v, Y) of the source and of the eight samples, source Y scaled to 100."""
    k = 100.0 / float(data.cmf[1] @ spd)
    white = k * (data.cmf @ spd)
    samples = k * (data.tcs * spd) @ data.cmf.T  # (8, 3)
    den = samples[:, 0] + 15.0 * samples[:, 1] + 3.0 * samples[:, 2]
    return (xyz_to_uv(white), 4.0 * samples[:, 0] / den, 6.0 * samples[:, 1] / den, samples[:, 1])


def special_indices(curve: SpectralCurve) -> np.ndarray:
    """Special colour rendering indices R1-R8."""
    data = cie_data()
    spd = _on_cie_grid(curve)
    t = cct(curve).kelvin
    ref = reference_illuminant(t, data)
    (uk, vk), uki, vki, yki = _samples_uvY(spd, data)
    (ur, vr), uri, vri, yri = _samples_uvY(ref, data)

    ck, dk = _cd(uk, vk)
    cr, dr = _cd(ur, vr)
    cki, dki = _cd(uki, vki)
    # von Kries adaptation of the test samples to the reference white
    den = 16.518 + 1.481 * (cr / ck) * cki - (dr / dk) * dki
    uki_a = (10.872 + 0.404 * (cr / ck) * cki - 4.0 * (dr / dk) * dki) / den
    vki_a = 5.520 / den

    def uvw(u, v, y):
        w = 25.0 * np.cbrt(y) - 17.0
        return np.stack([13.0 * w * (u - ur), 13.0 * w * (v - vr), w])

    delta = uvw(uri, vri, yri) - uvw(uki_a, vki_a, yki)
    return 100.0 - 4.6 * np.sqrt((delta**2).sum(axis=0))


def cri(curve: SpectralCurve) -> float:
    """General colour rendering index Ra, mean of R1-R8."""
    return float(np.mean(special_indices(curve)))


# --- comparison rows -----------------------------------------------------------------

@dataclass(frozen=True)
class IlluminationReport:
    label: str
    cri_ra: float
    cct: float
    luminous_flux: float


def illumination_report(label: str, curve: SpectralCurve) -> IlluminationReport:
    return IlluminationReport(label, cri(curve), cct(curve).kelvin, luminous_flux(curve))


def illumination_compare(rho: float = 1.0 / 30.0, p_led: float = 1.0, leds=DEFAULT_LEDS,
                         constellation: CskConstellation | None = None):
    """Rows for steady light, single-user CSK and two-user NOMA-CSK at ``rho``."""
    psds = default_psds(1.0, leds)
    cases = [
        ("no_comm", transmitted_symbol_power(1.0, constellation, communicating=False)),
        ("csk_only", transmitted_symbol_power(1.0, constellation)),
        ("noma_csk", transmitted_symbol_power(rho, constellation)),
    ]
    return tuple(illumination_report(label, altered_psd(psds, tsp, p_led)) for label, tsp in cases)


__all__ = [
    "CieDataset", "CctResult", "IlluminationReport", "LAMBDA_MIN", "altered_psd", "cct",
    "cct_from_uv", "cie_data", "cri", "daylight_spd", "illumination_compare", "luminous_flux",
    "planck", "reference_illuminant", "special_indices", "transmitted_symbol_power",
]
