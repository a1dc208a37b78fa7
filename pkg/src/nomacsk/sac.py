"""Soft actor-critic in plain numpy with hand-written backpropagation.

The actor maps the channel ratio to a Gaussian over a pre-squash variable
``u``; the allocation is ``rho = 0.25 * (tanh(u) + 1)``, which keeps every
action inside [0, 0.5].  Two critics score (state, action) pairs, each with
a slowly tracking target copy.  Everything runs in float64 so that seeded
runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
ACTION_SCALE = 0.25
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    alpha: float = 1.0
    tau: float = 1e-3
    learning_rate: float = 3e-4
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    buffer_capacity: int = 10_000
    batch_size: int = 64
    max_episodes: int = 1000
    score_window: int = 100
    stop_value: float = 163.0
    hidden_sizes: tuple[int, ...] = (64, 64)
    warmup_steps: int = 1000
    updates_per_step: int = 20

    def __post_init__(self):
        positive = (self.learning_rate, self.buffer_capacity, self.batch_size, self.max_episodes,
                    self.score_window, self.updates_per_step)
        if any(v <= 0 for v in positive) or not self.hidden_sizes or min(self.hidden_sizes) <= 0:
            raise DomainError("agent sizes and rates must be positive")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.tau <= 1.0 or self.alpha < 0:
            raise DomainError("need gamma, tau in [0, 1] and alpha >= 0")
        if self.warmup_steps < 0:
            raise DomainError("warmup steps must be nonnegative")


class Mlp:
    """Fully connected network, tanh on hidden layers and a linear output."""

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = 1.0 / math.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params += [w, np.zeros(fan_out)]

    def copy(self) -> "Mlp":
        other = Mlp(self.sizes)
        other.params = [p.copy() for p in self.params]
        return other

    def forward(self, x: np.ndarray):
        """Output and the activations needed by :meth:`backward`."""
        acts = [x]
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            z = acts[-1] @ self.params[2 * k] + self.params[2 * k + 1]
            acts.append(np.tanh(z) if k < n_layers - 1 else z)
        return acts[-1], acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts, grad_out: np.ndarray):
        """Parameter gradients and the gradient with respect to the input."""
        grads = [None] * len(self.params)
        g = grad_out
        for k in reversed(range(len(self.params) // 2)):
            grads[2 * k] = acts[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.params[2 * k].T
            if k > 0:
                g = g * (1.0 - acts[k] ** 2)
        return grads, g


class Adam:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        """Descend along ``grads``, updating ``params`` in place."""
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class ReplayBuffer:
    """Fixed-capacity FIFO store of (s, a, r, s', done) transitions."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.data = np.zeros((self.capacity, 5))
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s_next, done):
        if not (0.0 <= s <= 1.0 and 0.0 <= s_next <= 1.0 and 0.0 <= a <= 0.5):
            raise DomainError("transition outside the state or action space")
        self.data[self.ptr] = (s, a, r, s_next, float(done))
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def contents(self) -> np.ndarray:
        """Stored transitions, oldest first."""
        if self.size < self.capacity:
            return self.data[: self.size].copy()
        return np.roll(self.data, -self.ptr, axis=0)

    def sample(self, n: int, rng: np.random.Generator) -> "Batch":
        if self.size == 0:
            raise PreconditionError("cannot sample from an empty replay buffer")
        return Batch.from_array(self.data[rng.integers(0, self.size, size=n)])


@dataclass(frozen=True)
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    @classmethod
    def from_array(cls, rows: np.ndarray) -> "Batch":
        rows = np.asarray(rows, dtype=float)
        return cls(*(rows[:, k : k + 1] for k in range(5)))

    def __len__(self) -> int:
        return self.s.shape[0]


def squash(u):
    return ACTION_SCALE * (np.tanh(u) + 1.0)


def log_one_minus_tanh2(u):
    """``log(1 - tanh(u)**2)`` without cancellation for large ``|u|``."""
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def squashed_log_prob(eps, log_std, u):
    """Log density of ``rho = squash(u)`` where ``u = mu + exp(log_std) * eps``."""
    return (-0.5 * eps**2 - log_std - HALF_LOG_2PI
            - math.log(ACTION_SCALE) - log_one_minus_tanh2(u))


@dataclass
class SacAgent:
    cfg: AgentConfig
    actor: Mlp
    critics: list[Mlp]
    targets: list[Mlp]
    actor_opt: Adam
    critic_opts: list[Adam]
    buffer: ReplayBuffer
    update_steps: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(cls, cfg: AgentConfig, rng: np.random.Generator) -> "SacAgent":
        hidden = tuple(cfg.hidden_sizes)
        actor = Mlp((1, *hidden, 2), rng)
        critics = [Mlp((2, *hidden, 1), rng) for _ in range(2)]
        targets = [c.copy() for c in critics]
        adam = dict(lr=cfg.learning_rate, betas=cfg.adam_betas, eps=cfg.adam_eps)
        return cls(cfg, actor, critics, targets, Adam(actor.params, **adam),
                   [Adam(c.params, **adam) for c in critics], ReplayBuffer(cfg.buffer_capacity))

    def policy(self, s: np.ndarray):
        """Mean, clamped log-std and the actor activations for states ``s``."""
        out, acts = self.actor.forward(np.asarray(s, dtype=float).reshape(-1, 1))
        return out[:, :1], np.clip(out[:, 1:], LOG_STD_MIN, LOG_STD_MAX), acts, out

    def deterministic_action(self, state: float) -> float:
        mu = self.policy(np.array([state]))[0]
        return float(squash(mu[0, 0]))


def act(agent: SacAgent, state: float, mode: str = "stochastic",
        rng: np.random.Generator | None = None) -> float:
    if mode == "deterministic":
        return agent.deterministic_action(state)
    if mode != "stochastic":
        raise DomainError(f"unknown action mode {mode!r}")
    if rng is None:
        raise PreconditionError("stochastic actions need a random generator")
    mu, log_std, _, _ = agent.policy(np.array([state]))
    u = mu[0, 0] + math.exp(log_std[0, 0]) * rng.standard_normal()
    return float(np.clip(squash(u), 0.0, 0.5))


def _q(net: Mlp, s: np.ndarray, a: np.ndarray):
    return net.forward(np.hstack([s, a]))


def critic_targets(agent: SacAgent, batch: Batch, eps: np.ndarray) -> np.ndarray:
    """``y = r + gamma * (1 - done) * (min Q'(s', a') - alpha * log pi(a'|s'))``."""
    cfg = agent.cfg
    mu, log_std, _, _ = agent.policy(batch.s_next)
    u = mu + np.exp(log_std) * eps
    a_next = squash(u)
    logp = squashed_log_prob(eps, log_std, u)
    q_next = np.minimum(agent.targets[0](np.hstack([batch.s_next, a_next])),
                        agent.targets[1](np.hstack([batch.s_next, a_next])))
    return batch.r + cfg.gamma * (1.0 - batch.done) * (q_next - cfg.alpha * logp)


def critic_loss_and_grads(agent: SacAgent, batch: Batch, eps: np.ndarray):
    """Mean squared TD errors of both critics and their parameter gradients."""
    y = critic_targets(agent, batch, eps)
    losses, grads = [], []
    for net in agent.critics:
        q, acts = _q(net, batch.s, batch.a)
        diff = q - y
        losses.append(float(np.mean(diff**2)))
        grads.append(net.backward(acts, 2.0 * diff / len(batch))[0])
    return losses, grads


def critic_update(agent: SacAgent, batch: Batch, rng: np.random.Generator):
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    eps = rng.standard_normal((len(batch), 1))
    losses, grads = critic_loss_and_grads(agent, batch, eps)
    for net, opt, g in zip(agent.critics, agent.critic_opts, grads):
        opt.step(net.params, g)
    return losses


def actor_loss_and_grads(agent: SacAgent, batch: Batch, eps: np.ndarray):
    """Reparameterised loss ``mean(alpha * log pi - min_j Q_j)`` and its gradient."""
    cfg = agent.cfg
    n = len(batch)
    mu, log_std, acts, raw = agent.policy(batch.s)
    std = np.exp(log_std)
    u = mu + std * eps
    t = np.tanh(u)
    a = ACTION_SCALE * (t + 1.0)
    logp = squashed_log_prob(eps, log_std, u)

    q_vals, q_grads_a = [], []
    for net in agent.critics:
        q, q_acts = _q(net, batch.s, a)
        _, g_in = net.backward(q_acts, np.ones_like(q))
        q_vals.append(q)
        q_grads_a.append(g_in[:, 1:2])
    pick = q_vals[0] <= q_vals[1]
    q_min = np.where(pick, q_vals[0], q_vals[1])
    dq_da = np.where(pick, q_grads_a[0], q_grads_a[1])
    loss = float(np.mean(cfg.alpha * logp - q_min))

    da_du = ACTION_SCALE * (1.0 - t**2)
    d_mu = (cfg.alpha * 2.0 * t - dq_da * da_du) / n
    d_logstd = (cfg.alpha * (-1.0 + 2.0 * t * std * eps) - dq_da * da_du * std * eps) / n
    inside = (raw[:, 1:] >= LOG_STD_MIN) & (raw[:, 1:] <= LOG_STD_MAX)
    grad_out = np.hstack([d_mu, d_logstd * inside])
    grads, _ = agent.actor.backward(acts, grad_out)
    return loss, grads


def actor_update(agent: SacAgent, batch: Batch, rng: np.random.Generator) -> float:
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    eps = rng.standard_normal((len(batch), 1))
    loss, grads = actor_loss_and_grads(agent, batch, eps)
    agent.actor_opt.step(agent.actor.params, grads)
    return loss


def soft_update(targets, critics, tau: float):
    """``target <- tau * critic + (1 - tau) * target`` for every parameter, in place."""
    for tnet, net in zip(targets, critics):
        for tp, p in zip(tnet.params, net.params):
            if tp.shape != p.shape:
                raise ValueError("target and critic shapes differ")
            tp *= 1.0 - tau
            tp += tau * p
    return targets


def update(agent: SacAgent, rng: np.random.Generator):
    """One full learning step: critics, actor, then the targets."""
    batch = agent.buffer.sample(agent.cfg.batch_size, rng)
    c_losses = critic_update(agent, batch, rng)
    a_loss = actor_update(agent, batch, rng)
    soft_update(agent.targets, agent.critics, agent.cfg.tau)
    agent.update_steps += 1
    return c_losses, a_loss
