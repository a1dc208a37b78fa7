"""Baseline power allocation rules and a common dispatch for all policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelPair
from .errors import ConfigurationError, DomainError
from .link import LinkConfig, LinkReport, capacity, jain_index, single_user_link, throughput

POLICIES = ("sac", "grpa", "ngdpa", "tdma")


@dataclass(frozen=True)
class AllocationDecision:
    """Power fraction of the stronger user, or an orthogonal time split."""

    rho1: float | None
    time_split: bool = False

    def __post_init__(self):
        if self.time_split:
            if self.rho1 is not None:
                raise DomainError("a time split carries no power fraction")
        elif self.rho1 is None or not 0.0 <= self.rho1 <= 0.5:
            raise DomainError(f"NOMA allocation {self.rho1} outside [0, 0.5]")

    @property
    def rho2(self) -> float | None:
        return None if self.rho1 is None else 1.0 - self.rho1

    @classmethod
    def tdma(cls) -> "AllocationDecision":
        return cls(None, time_split=True)


def _check_pair(pair: ChannelPair):
    if pair.h1 <= 0 or pair.h2 <= 0:
        raise DomainError("channel gains must be positive")


def grpa(pair: ChannelPair) -> AllocationDecision:
    """Gain ratio allocation: ``rho1 = 1 / (1 + (h1 / h2)**2)``."""
    _check_pair(pair)
    return AllocationDecision(1.0 / (1.0 + (pair.h1 / pair.h2) ** 2))


def ngdpa(pair: ChannelPair) -> AllocationDecision:
    """Normalised gain difference allocation, ``rho1 = 1 / (1 + h1 / |h1 - h2|)``.

    Equal gains take the limiting value 0.
    """
    _check_pair(pair)
    diff = abs(pair.h1 - pair.h2)
    if diff == 0.0:
        return AllocationDecision(0.0)
    return AllocationDecision(1.0 / (1.0 + pair.h1 / diff))


def tdma_eval(pair: ChannelPair, cfg: LinkConfig, rng: np.random.Generator,
              n_symbols: int | None = None) -> LinkReport:
    """Two equal time slots, each user alone at full power in its slot."""
    sinr, ber, cap, tput = [], [], [], []
    for h in (pair.h1, pair.h2):
        s, b = single_user_link(h, cfg, rng, n_symbols)
        c = 0.5 * capacity(s, cfg.bandwidth_hz)
        sinr.append(s)
        ber.append(b)
        cap.append(c)
        tput.append(throughput(c, b))
    return LinkReport(float("nan"), tuple(sinr), tuple(cap), tuple(ber), tuple(tput),
                      jain_index(tput), float(sum(tput)))


def apply_policy(policy_id: str, pair: ChannelPair, agent=None) -> AllocationDecision:
    if policy_id == "grpa":
        return grpa(pair)
    if policy_id == "ngdpa":
        return ngdpa(pair)
    if policy_id == "tdma":
        return AllocationDecision.tdma()
    if policy_id == "sac":
        if agent is None:
            raise ConfigurationError("policy 'sac' needs a trained agent")
        return AllocationDecision(agent.deterministic_action(pair.ratio))
    raise ConfigurationError(f"unknown policy {policy_id!r}; expected one of {POLICIES}")
