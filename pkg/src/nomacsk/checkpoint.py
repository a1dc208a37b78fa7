"""Binary checkpoints for agents and resumable training runs.

Layout::

    MAGIC (8 bytes) | version (uint32 LE) | header length (uint32 LE)
    | JSON header (utf-8) | float64 LE arrays in the order listed in the header

The header echoes the architecture and all configs.  Optimiser moments, the
replay buffer and the training loop state are included when saving a
:class:`TrainingRun`, which makes a reloaded run continue bit-identically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .environment import EnvConfig, RewardConfig
from .errors import FormatError
from .link import CskConstellation, LinkConfig
from .sac import Adam, AgentConfig, Mlp, ReplayBuffer, SacAgent
from .spectral import FilterBank, LedColorParams
from .training import TrainingRun

MAGIC = b"NOMACSK\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def _tuples(x):
    return tuple(_tuples(v) for v in x) if isinstance(x, list) else x


def _link_from_dict(d: dict) -> LinkConfig:
    d = dict(d)
    d["leds"] = tuple(LedColorParams(**p) for p in d["leds"])
    d["filters"] = FilterBank(**{k: _tuples(v) for k, v in d["filters"].items()})
    d["constellation"] = CskConstellation(**{k: _tuples(v) for k, v in d["constellation"].items()})
    return LinkConfig(**d)


def _env_from_dict(d: dict) -> EnvConfig:
    d = dict(d)
    d["channel_bounds"] = tuple(d["channel_bounds"])
    d["link"] = _link_from_dict(d["link"])
    return EnvConfig(**d)


def _from_dict(cls, d: dict):
    return cls(**{k: _tuples(v) for k, v in d.items()})


def _agent_arrays(agent: SacAgent, with_training: bool):
    arrays = []

    def add(prefix, items):
        arrays.extend((f"{prefix}.{i}", a) for i, a in enumerate(items))

    add("actor", agent.actor.params)
    for k in range(2):
        add(f"critic{k}", agent.critics[k].params)
        add(f"target{k}", agent.targets[k].params)
    if with_training:
        for name, opt in [("adam_actor", agent.actor_opt)] + [
                (f"adam_critic{k}", o) for k, o in enumerate(agent.critic_opts)]:
            add(f"{name}.m", opt.m)
            add(f"{name}.v", opt.v)
        arrays.append(("buffer", agent.buffer.contents()))
    return arrays


def save_agent(path, obj, env_cfg: EnvConfig | None = None,
               reward_cfg: RewardConfig | None = None) -> None:
    """Write an agent, or a whole :class:`TrainingRun`, to ``path``."""
    run = obj if isinstance(obj, TrainingRun) else None
    agent = run.agent if run else obj
    env_cfg = run.env_cfg if run else env_cfg
    reward_cfg = run.reward_cfg if run else reward_cfg
    arrays = _agent_arrays(agent, with_training=run is not None)
    header = {
        "actor_sizes": list(agent.actor.sizes),
        "critic_sizes": list(agent.critics[0].sizes),
        "agent_config": asdict(agent.cfg),
        "env_config": asdict(env_cfg) if env_cfg else None,
        "reward_config": asdict(reward_cfg) if reward_cfg else None,
        "update_steps": agent.update_steps,
        "training": None,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    if run is not None:
        header["training"] = run.state_dict()
        header["adam_t"] = [agent.actor_opt.t] + [o.t for o in agent.critic_opts]
    blob = json.dumps(header).encode("utf-8")
    with open(Path(path), "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read(path):
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise FormatError("file too short for a checkpoint header")
    magic, version, n = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}, expected {VERSION}")
    try:
        header = json.loads(raw[_PREFIX.size : _PREFIX.size + n].decode("utf-8"))
        specs = header["arrays"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"corrupted checkpoint header: {exc}") from None
    offset = _PREFIX.size + n
    arrays = {}
    for spec in specs:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(raw):
            raise FormatError("checkpoint truncated inside array data")
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count,
                                             offset=offset).reshape(shape).astype(float)
        offset = end
    if offset != len(raw):
        raise FormatError("trailing bytes after array data")
    return header, arrays


def _build_agent(header, arrays) -> SacAgent:
    try:
        cfg = _from_dict(AgentConfig, header["agent_config"])

        def net(prefix, sizes):
            m = Mlp(sizes)
            m.params = [arrays[f"{prefix}.{i}"] for i in range(len(m.params))]
            return m

        actor = net("actor", header["actor_sizes"])
        critics = [net(f"critic{k}", header["critic_sizes"]) for k in range(2)]
        targets = [net(f"target{k}", header["critic_sizes"]) for k in range(2)]
        adam = dict(lr=cfg.learning_rate, betas=cfg.adam_betas, eps=cfg.adam_eps)
        opts = [Adam(actor.params, **adam)] + [Adam(c.params, **adam) for c in critics]
        buffer = ReplayBuffer(cfg.buffer_capacity)
        if "buffer" in arrays:
            for name, opt, t in zip(["adam_actor", "adam_critic0", "adam_critic1"], opts,
                                    header["adam_t"]):
                opt.m = [arrays[f"{name}.m.{i}"] for i in range(len(opt.m))]
                opt.v = [arrays[f"{name}.v.{i}"] for i in range(len(opt.v))]
                opt.t = t
            rows = arrays["buffer"]
            buffer.data[: len(rows)] = rows
            buffer.size = len(rows)
            buffer.ptr = len(rows) % buffer.capacity
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"checkpoint does not match its declared layout: {exc}") from None
    return SacAgent(cfg, actor, critics, targets, opts[0], opts[1:], buffer,
                    header.get("update_steps", 0))


def load_agent(path) -> SacAgent:
    header, arrays = _read(path)
    return _build_agent(header, arrays)


def load_run(path) -> TrainingRun:
    """Reload a checkpoint saved from a :class:`TrainingRun` to continue training."""
    header, arrays = _read(path)
    if header.get("training") is None:
        raise FormatError("checkpoint holds an agent only, not a resumable run")
    agent = _build_agent(header, arrays)
    try:
        env_cfg = _env_from_dict(header["env_config"])
        reward_cfg = _from_dict(RewardConfig, header["reward_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad config in checkpoint: {exc}") from None
    return TrainingRun.from_state_dict(header["training"], agent, env_cfg, reward_cfg)
