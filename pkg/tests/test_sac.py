import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nomacsk.errors import DomainError, PreconditionError
from nomacsk.sac import (
    AgentConfig, Batch, Mlp, ReplayBuffer, SacAgent, act, actor_loss_and_grads, actor_update,
    critic_loss_and_grads, critic_targets, critic_update, soft_update, squash,
    squashed_log_prob, update,
)


def agent(seed=0, **kw):
    return SacAgent.create(AgentConfig(**kw), np.random.default_rng(seed))


def fixed_batch(n=8, seed=1):
    rng = np.random.default_rng(seed)
    rows = np.column_stack([rng.random(n), rng.random(n) * 0.5, rng.normal(size=n) * 10,
                            rng.random(n), rng.random(n) < 0.3])
    return Batch.from_array(rows)


def rel_grad_error(loss_fn, params, grads, h=1e-6):
    num, ana = [], []
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss_fn()
            p[idx] = old - h
            down = loss_fn()
            p[idx] = old
            num.append((up - down) / (2 * h))
            ana.append(g[idx])
    num, ana = np.array(num), np.array(ana)
    return np.linalg.norm(num - ana) / np.linalg.norm(num)


def constant_net(sizes, value):
    net = Mlp(sizes)
    net.params[-1][:] = value
    return net


def test_config_validation():
    with pytest.raises(DomainError):
        AgentConfig(batch_size=0)
    with pytest.raises(DomainError):
        AgentConfig(tau=2.0)
    cfg = AgentConfig()
    assert (cfg.gamma, cfg.alpha, cfg.tau, cfg.learning_rate) == (0.99, 1.0, 1e-3, 3e-4)
    assert (cfg.buffer_capacity, cfg.batch_size, cfg.stop_value) == (10_000, 64, 163.0)


def test_targets_start_equal_to_critics():
    a = agent()
    for t, c in zip(a.targets, a.critics):
        for tp, cp in zip(t.params, c.params):
            np.testing.assert_array_equal(tp, cp)
            assert tp is not cp


@given(st.floats(0, 1), st.floats(0.1, 30), st.integers(0, 100))
def test_actions_always_in_range(s, scale, seed):
    a = agent(seed)
    for p in a.actor.params:
        p *= scale
    rng = np.random.default_rng(seed)
    assert 0.0 <= act(a, s, "stochastic", rng) <= 0.5
    assert 0.0 <= act(a, s, "deterministic") <= 0.5


def test_deterministic_is_repeatable_and_centred():
    a = agent()
    assert act(a, 0.3, "deterministic") == act(a, 0.3, "deterministic")
    for p in a.actor.params:
        p[:] = 0.0
    assert act(a, 0.7, "deterministic") == 0.25
    with pytest.raises(PreconditionError):
        act(a, 0.7, "stochastic")
    with pytest.raises(DomainError):
        act(a, 0.7, "greedy")


def test_critic_gradient_matches_finite_differences():
    a = agent(3)
    batch, eps = fixed_batch(), np.random.default_rng(4).standard_normal((8, 1))
    _, grads = critic_loss_and_grads(a, batch, eps)
    for k in range(2):
        err = rel_grad_error(lambda: critic_loss_and_grads(a, batch, eps)[0][k],
                             a.critics[k].params, grads[k])
        assert err < 1e-4


def test_actor_gradient_matches_finite_differences():
    a = agent(5)
    batch, eps = fixed_batch(seed=6), np.random.default_rng(7).standard_normal((8, 1))
    _, grads = actor_loss_and_grads(a, batch, eps)
    err = rel_grad_error(lambda: actor_loss_and_grads(a, batch, eps)[0], a.actor.params, grads)
    assert err < 1e-4


def test_targets_without_discount_or_after_terminal():
    batch, eps = fixed_batch(), np.zeros((8, 1))
    a = agent(gamma=0.0)
    np.testing.assert_array_equal(critic_targets(a, batch, eps), batch.r)
    done = Batch(batch.s, batch.a, batch.r, batch.s_next, np.ones_like(batch.done))
    np.testing.assert_array_equal(critic_targets(agent(), done, eps), batch.r)


def test_targets_use_minimum_critic():
    a = agent()
    a.targets = [constant_net((2, 64, 64, 1), 1.0), constant_net((2, 64, 64, 1), 2.0)]
    b = fixed_batch()
    live = Batch(b.s, b.a, b.r, b.s_next, np.zeros_like(b.done))
    eps = np.random.default_rng(0).standard_normal((8, 1))
    mu, log_std, _, _ = a.policy(live.s_next)
    logp = squashed_log_prob(eps, log_std, mu + np.exp(log_std) * eps)
    expected = live.r + a.cfg.gamma * (1.0 - a.cfg.alpha * logp)
    np.testing.assert_allclose(critic_targets(a, live, eps), expected, rtol=1e-12)


def test_actor_loss_without_entropy_is_negative_min_q():
    a = agent(alpha=0.0)
    a.critics = [constant_net((2, 64, 64, 1), 3.0), constant_net((2, 64, 64, 1), -1.0)]
    loss, grads = actor_loss_and_grads(a, fixed_batch(), np.ones((8, 1)))
    assert loss == pytest.approx(1.0)
    assert all(np.all(g == 0) for g in grads)


@pytest.mark.parametrize("mu,log_std", [(0.0, 0.0), (0.7, -0.5), (-1.2, 0.4), (0.3, -2.0)])
def test_squashed_density_integrates_to_one(mu, log_std):
    def density(rho):
        u = math.atanh(4.0 * rho - 1.0)
        eps = (u - mu) / math.exp(log_std)
        return math.exp(squashed_log_prob(eps, log_std, u))

    total, _ = quad(density, 0.0, 0.5, limit=400, points=[float(squash(mu))])
    assert total == pytest.approx(1.0, abs=1e-3)


def test_log_prob_stable_for_large_u():
    u = np.array([-40.0, 40.0])
    assert np.all(np.isfinite(squashed_log_prob(np.zeros(2), np.zeros(2), u)))


def test_soft_update_extremes():
    a = agent()
    for p in a.critics[0].params:
        p[:] = 1.0
    for p in a.targets[0].params:
        p[:] = 0.0
    soft_update(a.targets[:1], a.critics[:1], 1e-3)
    assert all(np.allclose(p, 0.001) for p in a.targets[0].params)
    before = [p.copy() for p in a.targets[0].params]
    soft_update(a.targets[:1], a.critics[:1], 0.0)
    assert all(np.array_equal(p, q) for p, q in zip(a.targets[0].params, before))
    soft_update(a.targets[:1], a.critics[:1], 1.0)
    assert all(np.array_equal(p, q) for p, q in zip(a.targets[0].params, a.critics[0].params))


def test_soft_update_shape_mismatch():
    with pytest.raises(ValueError):
        soft_update([Mlp((2, 3, 1))], [Mlp((2, 4, 1))], 0.5)


def test_soft_update_converges_geometrically():
    a = agent()
    tau = 0.05
    gaps = []
    for _ in range(50):
        soft_update(a.targets, a.critics, tau)
    for p in a.critics[0].params:
        p += 1.0
    for _ in range(20):
        soft_update(a.targets, a.critics, tau)
        gaps.append(sum(np.abs(t - c).sum() for t, c in zip(a.targets[0].params,
                                                           a.critics[0].params)))
    ratios = np.array(gaps[1:]) / np.array(gaps[:-1])
    np.testing.assert_allclose(ratios, 1 - tau, rtol=1e-9)


def test_buffer_is_fifo():
    buf = ReplayBuffer(5)
    for k in range(8):
        buf.add(0.5, 0.1, float(k), 0.5, False)
    assert len(buf) == 5
    np.testing.assert_array_equal(buf.contents()[:, 2], [3, 4, 5, 6, 7])


def test_buffer_rejects_bad_transitions():
    buf = ReplayBuffer(3)
    with pytest.raises(DomainError):
        buf.add(1.5, 0.1, 0.0, 0.5, False)
    with pytest.raises(DomainError):
        buf.add(0.5, 0.7, 0.0, 0.5, False)


def test_empty_buffer_and_batch():
    a = agent()
    with pytest.raises(PreconditionError):
        a.buffer.sample(4, np.random.default_rng(0))
    empty = Batch.from_array(np.zeros((0, 5)))
    with pytest.raises(PreconditionError):
        critic_update(a, empty, np.random.default_rng(0))
    with pytest.raises(PreconditionError):
        actor_update(a, empty, np.random.default_rng(0))


def test_critic_update_reduces_loss_on_fixed_batch():
    a = agent(gamma=0.0, learning_rate=1e-2)
    batch = fixed_batch(64)
    eps = np.zeros((64, 1))
    start = critic_loss_and_grads(a, batch, eps)[0]
    rng = np.random.default_rng(0)
    for _ in range(50):
        critic_update(a, batch, rng)
    end = critic_loss_and_grads(a, batch, eps)[0]
    assert end[0] < start[0] and end[1] < start[1]


def test_bandit_converges_to_best_action():
    rng = np.random.default_rng(0)
    a = agent(gamma=0.0, alpha=0.0, learning_rate=1e-3)
    for _ in range(2000):
        s, x = rng.random(), rng.uniform(0, 0.5)
        a.buffer.add(s, x, -(x - 0.3) ** 2, s, True)
    for _ in range(3000):
        critic_update(a, a.buffer.sample(64, rng), rng)
    for _ in range(200):
        update(a, rng)
    for s in (0.1, 0.5, 0.9):
        assert a.deterministic_action(s) == pytest.approx(0.3, abs=0.02)
