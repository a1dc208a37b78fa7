"""NOMA-CSK link: constellation, superposition, SINR, Monte Carlo BER and metrics.

Signal quantities are carried in the electrical domain after photodetection.
A received optical power ``P`` becomes a photocurrent ``R * P`` and an
electrical power ``(R * P)**2``; separate interference sources add in power.
Noise is referenced to each user's own desired electrical power, so the SNR
of a user is independent of its channel gain and of the allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelPair
from .errors import DomainError, PreconditionError
from .spectral import DEFAULT_FILTERS, DEFAULT_LEDS, LINK_GRID_STEP, FilterBank, link_band_matrix

NOISE_REFERENCES = ("own_signal", "full_power")
SIC_DETECTORS = ("sequential", "joint")


@dataclass(frozen=True)
class CskConstellation:
    symbols: tuple[tuple[float, float, float], ...]
    bits: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise DomainError("symbols must be RGB intensity triples")
        if np.any(s < 0) or not np.allclose(s.sum(axis=1), 1.0):
            raise DomainError("CSK symbols need nonnegative components summing to one")
        if len(self.bits) != len(self.symbols) or len({len(b) for b in self.bits}) != 1:
            raise DomainError("every symbol needs a bit pattern of the same length")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def bits_per_symbol(self) -> int:
        return len(self.bits[0])

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=float)

    @property
    def bit_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int8)

    @property
    def mean_symbol(self) -> np.ndarray:
        return self.array.mean(axis=0)


def default_constellation() -> CskConstellation:
    """4-CSK on the three colour vertices plus the centroid."""
    third = 1.0 / 3.0
    return CskConstellation(
        symbols=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (third, third, third)),
        bits=((0, 0), (0, 1), (1, 0), (1, 1)),
    )


@dataclass(frozen=True)
class LinkConfig:
    bandwidth_hz: float = 3.0e7
    snr_db: float = 10.0
    mc_symbols: int = 100_000
    mc_symbols_train: int = 20_000
    p_led: float = 1.0
    responsivity: float = 0.54
    noise_reference: str = "own_signal"
    # fraction of the weak user's signal left at user 1 after SIC
    sic_residual: float = 0.0
    sic_detector: str = "sequential"
    leds: tuple = DEFAULT_LEDS
    filters: FilterBank = DEFAULT_FILTERS
    grid_step_nm: float = LINK_GRID_STEP
    constellation: CskConstellation = field(default_factory=default_constellation)

    def __post_init__(self):
        if self.noise_reference not in NOISE_REFERENCES:
            raise DomainError(f"noise_reference must be one of {NOISE_REFERENCES}")
        if self.sic_detector not in SIC_DETECTORS:
            raise DomainError(f"sic_detector must be one of {SIC_DETECTORS}")
        if not 0.0 <= self.sic_residual <= 1.0:
            raise DomainError("sic_residual must lie in [0, 1]")
        if self.bandwidth_hz <= 0:
            raise DomainError("bandwidth must be positive")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def bands(self) -> np.ndarray:
        return link_band_matrix(self.leds, self.filters, self.grid_step_nm)


@dataclass(frozen=True)
class NoiseModel:
    snr_db: float
    n0: tuple[float, float]


@dataclass(frozen=True)
class PowerTerms:
    """Optical power terms (W) seen by one user, symbols at their constellation mean."""

    signal: float
    cross_color: float
    inter_user: float


@dataclass(frozen=True)
class LinkReport:
    rho: float
    sinr: tuple[float, float]
    capacity: tuple[float, float]
    ber: tuple[float, float]
    throughput: tuple[float, float]
    jain: float
    sum_rate: float


def superpose(s1, s2, rho: float) -> np.ndarray:
    if not 0.0 <= rho <= 0.5:
        raise DomainError(f"allocation {rho} outside [0, 0.5]")
    return rho * np.asarray(s1, dtype=float) + (1.0 - rho) * np.asarray(s2, dtype=float)


def _check_rho(rho: float):
    if not 0.0 <= rho <= 0.5:
        raise DomainError(f"allocation {rho} outside [0, 0.5]")


def user_power_terms(pair: ChannelPair, rho: float, cfg: LinkConfig) -> tuple[PowerTerms, PowerTerms]:
    """Desired, cross-colour and inter-user optical powers for both users."""
    _check_rho(rho)
    bands = cfg.bands()
    mean = cfg.constellation.mean_symbol
    terms = []
    for k, h in enumerate((pair.h1, pair.h2)):
        base = (cfg.p_led / 3.0) * h * mean[:, None] * bands
        own = (rho if k == 0 else 1.0 - rho) * base
        other = (1.0 - rho if k == 0 else rho) * base
        diag = float(np.trace(own))
        inter = float(other.sum())
        if k == 0:
            inter *= cfg.sic_residual
        terms.append(PowerTerms(diag, float(own.sum()) - diag, inter))
    return terms[0], terms[1]


def noise_model(pair: ChannelPair, rho: float, cfg: LinkConfig) -> NoiseModel:
    """Per-user noise power (A^2) for the configured SNR reference."""
    snr = cfg.snr_linear
    if cfg.noise_reference == "own_signal":
        t1, t2 = user_power_terms(pair, rho, cfg)
        refs = (t1.signal, t2.signal)
    else:
        bands = cfg.bands()
        refs = tuple((cfg.p_led / 3.0) * h * float(bands.sum()) for h in (pair.h1, pair.h2))
    n0 = tuple(0.0 if math.isinf(snr) else (cfg.responsivity * p) ** 2 / snr for p in refs)
    return NoiseModel(cfg.snr_db, n0)


def sinr_from_terms(terms: PowerTerms, n0: float, responsivity: float = 1.0) -> float:
    """Electrical SINR of one user; zero when the user has no desired power."""
    if terms.signal <= 0.0:
        return 0.0
    sig = (responsivity * terms.signal) ** 2
    interference = (responsivity * terms.cross_color) ** 2 + (responsivity * terms.inter_user) ** 2
    den = interference + n0
    if den == 0.0:
        # squared powers can underflow for vanishing allocations
        return 0.0 if sig == 0.0 else math.inf
    return sig / den


def sinr_users(pair: ChannelPair, rho: float, noise: NoiseModel, cfg: LinkConfig) -> tuple[float, float]:
    t1, t2 = user_power_terms(pair, rho, cfg)
    return (sinr_from_terms(t1, noise.n0[0], cfg.responsivity),
            sinr_from_terms(t2, noise.n0[1], cfg.responsivity))


def capacity(sinr: float, bandwidth_hz: float) -> float:
    if sinr < 0:
        raise DomainError("SINR must be nonnegative")
    return bandwidth_hz * math.log2(1.0 + sinr)


def throughput(capacity_bps: float, ber: float) -> float:
    if not 0.0 <= ber <= 1.0:
        raise DomainError("BER must lie in [0, 1]")
    return capacity_bps * (1.0 - ber)


def jain_index(throughputs) -> float:
    t = np.asarray(throughputs, dtype=float)
    if np.any(t < 0) or not np.any(t > 0):
        raise DomainError("Jain's index needs nonnegative throughputs, not all zero")
    return float(t.sum() ** 2 / (t.size * np.sum(t**2)))


def _nearest(y: np.ndarray, hyps: np.ndarray) -> np.ndarray:
    # argmin keeps the lowest hypothesis index on ties
    d = ((y[:, None, :] - hyps[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d, axis=1)


def simulate_ber(pair: ChannelPair, rho: float, noise: NoiseModel, n_symbols: int,
                 rng: np.random.Generator, cfg: LinkConfig = LinkConfig(),
                 symbol_pairs: np.ndarray | None = None,
                 chunk: int = 16_384) -> tuple[float, float]:
    """Monte Carlo bit error rates of both users.

    Both receivers see the column sums of the composite power matrix (one
    photocurrent per colour filter) plus white Gaussian noise split evenly
    over the three branches.  User 2 detects its own symbol by minimum
    distance, treating user 1 as its mean contribution.  User 1 performs SIC:
    with the ``sequential`` detector it first detects user 2's symbol the same
    way, subtracts it and then detects its own; ``joint`` searches all symbol
    pairs at once.  ``symbol_pairs`` replaces the random draw with explicit
    ``(user 1, user 2)`` index pairs.
    """
    _check_rho(rho)
    const = cfg.constellation
    m = const.size
    if symbol_pairs is None:
        if n_symbols < 1000:
            raise PreconditionError("simulate_ber needs at least 1000 symbols")
        symbol_pairs = rng.integers(0, m, size=(n_symbols, 2))
    else:
        symbol_pairs = np.asarray(symbol_pairs, dtype=np.int64).reshape(-1, 2)
        n_symbols = len(symbol_pairs)
    sigma = [math.sqrt(n / 3.0) for n in noise.n0]
    noise_draws = [rng.standard_normal((n_symbols, 3)) * s for s in sigma]

    sym = const.array
    bits = const.bit_array
    bands = cfg.bands()
    resp = [(cfg.p_led / 3.0) * h * cfg.responsivity * bands for h in (pair.h1, pair.h2)]
    composite = (rho * sym[:, None, :] + (1.0 - rho) * sym[None, :, :]).reshape(m * m, 3)
    rx1 = composite @ resp[0]
    rx2 = composite @ resp[1]
    weak_hyps = (1.0 - rho) * sym + rho * const.mean_symbol
    hyp2 = weak_hyps @ resp[1]
    weak_at_1 = weak_hyps @ resp[0]
    weak_only_1 = ((1.0 - rho) * sym) @ resp[0]
    strong_at_1 = (rho * sym) @ resp[0]
    sequential = cfg.sic_detector == "sequential"

    errors = np.zeros(2, dtype=np.int64)
    for start in range(0, n_symbols, chunk):
        idx = symbol_pairs[start:start + chunk]
        flat = idx[:, 0] * m + idx[:, 1]
        y1 = rx1[flat] + noise_draws[0][start:start + chunk]
        y2 = rx2[flat] + noise_draws[1][start:start + chunk]
        if sequential:
            weak = _nearest(y1, weak_at_1)
            own1 = _nearest(y1 - weak_only_1[weak], strong_at_1)
        else:
            own1 = _nearest(y1, rx1) // m
        own2 = _nearest(y2, hyp2)
        errors[0] += np.count_nonzero(bits[own1] != bits[idx[:, 0]])
        errors[1] += np.count_nonzero(bits[own2] != bits[idx[:, 1]])
    n_bits = n_symbols * const.bits_per_symbol
    return float(errors[0] / n_bits), float(errors[1] / n_bits)


def ber_standard_error(ber: float, n_symbols: int, bits_per_symbol: int = 2) -> float:
    n = n_symbols * bits_per_symbol
    return math.sqrt(max(ber * (1.0 - ber), 0.0) / n)


def evaluate_link(pair: ChannelPair, rho: float, cfg: LinkConfig, rng: np.random.Generator,
                  n_symbols: int | None = None) -> LinkReport:
    noise = noise_model(pair, rho, cfg)
    sinr = sinr_users(pair, rho, noise, cfg)
    ber = simulate_ber(pair, rho, noise, n_symbols or cfg.mc_symbols, rng, cfg)
    cap = tuple(capacity(s, cfg.bandwidth_hz) for s in sinr)
    tput = tuple(throughput(c, b) for c, b in zip(cap, ber))
    jain = jain_index(tput) if any(t > 0 for t in tput) else 0.0
    return LinkReport(rho, sinr, cap, ber, tput, jain, float(sum(tput)))


def single_user_link(h: float, cfg: LinkConfig, rng: np.random.Generator,
                     n_symbols: int | None = None) -> tuple[float, float]:
    """SINR and Monte Carlo BER of plain CSK with one user at full power."""
    n_symbols = n_symbols or cfg.mc_symbols
    const = cfg.constellation
    bands = cfg.bands()
    base = (cfg.p_led / 3.0) * h * bands
    own = const.mean_symbol[:, None] * base
    diag = float(np.trace(own))
    terms = PowerTerms(diag, float(own.sum()) - diag, 0.0)
    ref = diag if cfg.noise_reference == "own_signal" else float(base.sum())
    snr = cfg.snr_linear
    n0 = 0.0 if math.isinf(snr) else (cfg.responsivity * ref) ** 2 / snr
    sinr = sinr_from_terms(terms, n0, cfg.responsivity)

    if n_symbols < 1000:
        raise PreconditionError("simulate_ber needs at least 1000 symbols")
    sent = rng.integers(0, const.size, size=n_symbols)
    hyps = const.array @ (cfg.responsivity * base)
    y = hyps[sent] + rng.standard_normal((n_symbols, 3)) * math.sqrt(n0 / 3.0)
    errors = 0
    bits = const.bit_array
    for start in range(0, n_symbols, 16_384):
        sl = slice(start, start + 16_384)
        errors += np.count_nonzero(bits[_nearest(y[sl], hyps)] != bits[sent[sl]])
    return sinr, errors / (n_symbols * const.bits_per_symbol)
