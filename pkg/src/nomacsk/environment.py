"""Power allocation as a contextual decision problem: state, reward and episodes.

The state is the channel ratio ``h2 / h1``; the action is the power fraction
of the stronger user.  Channels are drawn once per episode and stay fixed, so
the next state always equals the current one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import H_MAX, H_MIN, ChannelPair, sample_channel_pair
from .errors import DomainError
from .link import LinkConfig, LinkReport, evaluate_link


@dataclass(frozen=True)
class RewardConfig:
    sum_rate_weight: float = 0.3
    ber_threshold: float = 1e-3
    ber_penalty: float = -20.0
    fairness_target: float = 0.99
    fairness_bonus: float = 100.0
    fairness_penalty_coeff: float = 50.0
    power_scale: float = 10.0
    power_center: float = 0.25
    stability_band: tuple[float, float] = (0.01, 0.49)
    stability_bonus: float = 5.0
    stability_penalty: float = -10.0


@dataclass(frozen=True)
class EnvConfig:
    channel_bounds: tuple[float, float] = (H_MIN, H_MAX)
    max_steps_per_episode: int = 500
    fairness_target: float = 0.99
    success_bonus: float = 50.0
    failure_penalty: float = -100.0
    link: LinkConfig = field(default_factory=LinkConfig)

    def __post_init__(self):
        if not 0.0 < self.fairness_target <= 1.0:
            raise DomainError("fairness target must lie in (0, 1]")
        if self.max_steps_per_episode < 1:
            raise DomainError("episodes need at least one step")
        lo, hi = self.channel_bounds
        if not 0.0 < lo < hi:
            raise DomainError("channel bounds must satisfy 0 < lower < upper")


def reward_terms(report: LinkReport, rho: float, cfg: RewardConfig = RewardConfig()) -> dict:
    """The five reward components, keyed by name."""
    j = report.jain
    if j >= cfg.fairness_target:
        fair = cfg.fairness_bonus
    else:
        fair = -cfg.fairness_penalty_coeff * (cfg.fairness_target - j) ** 2
    lo, hi = cfg.stability_band
    return {
        "fairness": fair,
        "sum_rate": cfg.sum_rate_weight * sum(report.throughput) / 1e8,
        "ber": cfg.ber_penalty if max(report.ber) > cfg.ber_threshold else 0.0,
        "power": cfg.power_scale * (1.0 - abs(rho - cfg.power_center)),
        "stability": cfg.stability_bonus if lo <= rho <= hi else cfg.stability_penalty,
    }


def compute_reward(report: LinkReport, rho: float, cfg: RewardConfig = RewardConfig()) -> float:
    return float(sum(reward_terms(report, rho, cfg).values()))


@dataclass
class EnvState:
    """Channel of the running episode and how many steps it has taken."""

    ratio: float
    pair: ChannelPair
    steps: int = 0


@dataclass(frozen=True)
class StepInfo:
    report: LinkReport
    success: bool
    failure: bool


def env_reset(rng: np.random.Generator, cfg: EnvConfig = EnvConfig()) -> EnvState:
    # 1 - U[0, 1) lies in (0, 1], so the ratio is never zero
    r = 1.0 - rng.random()
    pair = sample_channel_pair(r, rng, cfg.channel_bounds)
    return EnvState(ratio=r, pair=pair)


def env_step(state: EnvState, rho: float, rng: np.random.Generator,
             cfg: EnvConfig = EnvConfig(), reward_cfg: RewardConfig = RewardConfig()):
    """Apply allocation ``rho`` for one step.

    Returns ``(next_state, reward, done, info)``; ``state.steps`` is advanced
    in place and ``next_state`` is the same object.
    """
    if not 0.0 <= rho <= 0.5:
        raise DomainError(f"allocation {rho} outside [0, 0.5]")
    report = evaluate_link(state.pair, rho, cfg.link, rng, n_symbols=cfg.link.mc_symbols_train)
    reward = compute_reward(report, rho, reward_cfg)
    state.steps += 1
    success = report.jain >= cfg.fairness_target
    failure = not success and state.steps >= cfg.max_steps_per_episode
    if success:
        reward += cfg.success_bonus
    elif failure:
        reward += cfg.failure_penalty
    return state, reward, success or failure, StepInfo(report, success, failure)
