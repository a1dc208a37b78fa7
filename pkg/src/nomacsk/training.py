"""Episode loop that trains a :class:`SacAgent` on the allocation environment.

All randomness comes from three generators derived from the seed (channels,
actions, learning) plus a fresh Monte Carlo stream per environment step keyed
by the global step count.  A run can therefore be checkpointed at any step
and resumed with bit-identical results.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import ChannelPair
from .environment import EnvConfig, EnvState, RewardConfig, env_reset, env_step
from .sac import AgentConfig, SacAgent, act, update

BER_STREAM_TAG = 0xBE5
_STREAMS = ("agent_init", "channel", "action", "learning")

# incremented by every call to train(); lets tests confirm nothing retrains
TRAINING_CALLS = 0


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    ret: float
    steps: int
    terminal_j: float
    rolling_avg_return: float


def _generators(seed: int) -> dict:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(_STREAMS, children)}


@dataclass
class TrainingRun:
    agent: SacAgent
    env_cfg: EnvConfig
    reward_cfg: RewardConfig
    seed: int
    rngs: dict
    global_step: int = 0
    env_state: EnvState | None = None
    episode_return: float = 0.0
    history: list[EpisodeRecord] = field(default_factory=list)

    @classmethod
    def start(cls, env_cfg: EnvConfig, agent_cfg: AgentConfig, reward_cfg: RewardConfig,
              seed: int) -> "TrainingRun":
        rngs = _generators(seed)
        agent = SacAgent.create(agent_cfg, rngs["agent_init"])
        return cls(agent, env_cfg, reward_cfg, seed, rngs)

    @property
    def returns(self) -> np.ndarray:
        return np.array([rec.ret for rec in self.history])

    def rolling_average(self) -> float:
        w = self.agent.cfg.score_window
        return float(np.mean(self.returns[-w:])) if self.history else float("nan")

    @property
    def finished(self) -> bool:
        cfg = self.agent.cfg
        if len(self.history) >= cfg.max_episodes:
            return True
        return len(self.history) >= cfg.score_window and self.rolling_average() >= cfg.stop_value

    def step(self) -> EpisodeRecord | None:
        """One environment step plus its learning updates.

        Returns the episode record when the step ends an episode.
        """
        agent, cfg = self.agent, self.agent.cfg
        if self.env_state is None:
            self.env_state = env_reset(self.rngs["channel"], self.env_cfg)
            self.episode_return = 0.0
        state = self.env_state
        s = state.ratio
        if self.global_step < cfg.warmup_steps:
            rho = float(self.rngs["action"].uniform(0.0, 0.5))
        else:
            rho = act(agent, s, "stochastic", self.rngs["action"])
        ber_rng = np.random.default_rng([self.seed, BER_STREAM_TAG, self.global_step])
        _, reward, done, info = env_step(state, rho, ber_rng, self.env_cfg, self.reward_cfg)
        agent.buffer.add(s, rho, reward, s, done)
        self.global_step += 1
        self.episode_return += reward
        if self.global_step > cfg.warmup_steps and len(agent.buffer) >= cfg.batch_size:
            for _ in range(cfg.updates_per_step):
                update(agent, self.rngs["learning"])
        if not done:
            return None
        record = EpisodeRecord(len(self.history) + 1, self.episode_return, state.steps,
                               info.report.jain, 0.0)
        self.history.append(record)
        record = EpisodeRecord(record.episode, record.ret, record.steps, record.terminal_j,
                               self.rolling_average())
        self.history[-1] = record
        self.env_state = None
        return record

    def run(self, max_steps: int | None = None, progress=None) -> "TrainingRun":
        """Train until the stop rule or episode cap, or for at most ``max_steps`` steps."""
        taken = 0
        while not self.finished and (max_steps is None or taken < max_steps):
            record = self.step()
            taken += 1
            if record is not None and progress is not None:
                progress(record)
        return self

    # plain-data views used by the checkpoint format
    def state_dict(self) -> dict:
        env = None
        if self.env_state is not None:
            env = {"ratio": self.env_state.ratio, "h1": self.env_state.pair.h1,
                   "h2": self.env_state.pair.h2, "steps": self.env_state.steps}
        return {
            "seed": self.seed,
            "global_step": self.global_step,
            "episode_return": self.episode_return,
            "env_state": env,
            "rngs": {k: g.bit_generator.state for k, g in self.rngs.items()},
            "history": [asdict(rec) for rec in self.history],
        }

    @classmethod
    def from_state_dict(cls, d: dict, agent: SacAgent, env_cfg: EnvConfig,
                        reward_cfg: RewardConfig) -> "TrainingRun":
        rngs = {}
        for name, st in d["rngs"].items():
            bg = np.random.PCG64()
            bg.state = st
            rngs[name] = np.random.Generator(bg)
        env = None
        if d["env_state"] is not None:
            e = d["env_state"]
            env = EnvState(e["ratio"], ChannelPair(e["h1"], e["h2"]), e["steps"])
        history = [EpisodeRecord(**rec) for rec in d["history"]]
        return cls(agent, env_cfg, reward_cfg, d["seed"], rngs, d["global_step"], env,
                   d["episode_return"], history)


def train(env_cfg: EnvConfig = EnvConfig(), agent_cfg: AgentConfig = AgentConfig(),
          reward_cfg: RewardConfig = RewardConfig(), seed: int = 0, progress=None):
    """Train from scratch; returns ``(agent, history)``."""
    global TRAINING_CALLS
    TRAINING_CALLS += 1
    run = TrainingRun.start(env_cfg, agent_cfg, reward_cfg, seed).run(progress=progress)
    return run.agent, run.history
