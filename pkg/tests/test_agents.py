import json
import math

import numpy as np
import pytest
from sklearn.base import clone

from portfolio_drl import ndcore as nd
from portfolio_drl.agents import (
    BufferUnderfilled,
    DDPGAgent,
    OUProcess,
    PGAgent,
    PPOAgent,
    ReplayBuffer,
    TargetPair,
    Transition,
    advantages,
    clipped_surrogate,
    critic_step,
    discounted_returns,
    gaussian_kl,
    load_agent,
    ou_step,
    pg_objective,
    rollout_rewards,
    soft_update,
    vanilla_surrogate,
)
from portfolio_drl.agents import pg as pg_module
from portfolio_drl.env import EnvConfig, PortfolioEnv, asset_variances
from portfolio_drl.market_data import gen_synthetic, relatives_stack, window_stack
from portfolio_drl.policies import Architecture, GaussianPolicy, IIEActor, QCritic

from helpers import central_diff, global_rel_err

TINY = Architecture(channels=2, n_residual=1, critic_hidden=4)


def _panel(days=60, seed=0):
    return gen_synthetic([0.003, -0.001, 0.0], [0.01, 0.02, 0.015], days, rng=seed)


def _tr(i, shape=(1, 1, 3)):
    return Transition(np.full(shape, float(i)), np.array([0.5, 0.5]), float(i), np.full(shape, float(i)), False)


# replay buffer ------------------------------------------------------------------

def test_fifo_eviction():
    buf = ReplayBuffer(2)
    for i in range(3):
        buf.push(_tr(i))
    assert len(buf) == 2
    assert [t.reward for t in buf.contents()] == [1.0, 2.0]


def test_full_sample_is_permutation():
    buf = ReplayBuffer(10)
    for i in range(7):
        buf.push(_tr(i))
    batch = buf.sample(7, np.random.default_rng(0))
    assert sorted(batch.reward.tolist()) == list(map(float, range(7)))
    assert batch.state.shape == (7, 1, 1, 3) and batch.done.dtype == bool


def test_underfilled_sample_signals():
    buf = ReplayBuffer(10)
    buf.push(_tr(0))
    with pytest.raises(BufferUnderfilled):
        buf.sample(2, np.random.default_rng(0))


def test_sampling_reproducible():
    buf = ReplayBuffer(50)
    for i in range(50):
        buf.push(_tr(i))
    a = buf.sample(10, np.random.default_rng(3)).reward
    b = buf.sample(10, np.random.default_rng(3)).reward
    assert a.tolist() == b.tolist()


def test_sampling_is_uniform_chi_square():
    k, draws = 20, 100_000
    buf = ReplayBuffer(k)
    for i in range(k):
        buf.push(_tr(i))
    rng = np.random.default_rng(11)
    counts = np.zeros(k)
    for _ in range(draws // 5):
        np.add.at(counts, buf.sample_indices(5, rng), 1)
    expected = draws / k
    chi2 = np.sum((counts - expected) ** 2 / expected)
    df = k - 1
    assert chi2 <= df + 3 * math.sqrt(2 * df)


# OU process -------------------------------------------------------------------------

def test_ou_deterministic_decay():
    p = OUProcess(3, theta=1.0, sigma=0.0, dt=1.0, x0=1.0)
    assert ou_step(p, np.random.default_rng(0)).tolist() == [0.0, 0.0, 0.0]


def test_ou_fixed_point():
    p = OUProcess(2, theta=0.5, sigma=0.0, x0=0.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert p.step(rng).tolist() == [0.0, 0.0]


def test_ou_stationary_variance():
    # exact stationary variance of the Euler chain x' = (1 - theta dt) x + sigma sqrt(dt) z
    theta, sigma, dt = 0.15, 0.2, 0.1
    p = OUProcess(1, theta=theta, sigma=sigma, dt=dt)
    rng = np.random.default_rng(0)
    xs = np.array([p.step(rng)[0] for _ in range(1_000_000)])
    exact = sigma ** 2 * dt / (1 - (1 - theta * dt) ** 2)
    assert abs(xs.var() / exact - 1) <= 0.05


def test_ou_reproducible():
    a, b = OUProcess(4), OUProcess(4)
    ra, rb = np.random.default_rng(5), np.random.default_rng(5)
    assert all(np.array_equal(a.step(ra), b.step(rb)) for _ in range(20))


# soft updates ----------------------------------------------------------------------

def test_soft_update_table_example():
    target = {"w": np.array([0.0])}
    soft_update(target, {"w": np.array([1.0])}, 0.01)
    assert target["w"][0] == pytest.approx(0.01, abs=1e-15)


def test_soft_update_fixed_point_and_full_copy():
    online = {"w": np.array([0.3, -2.0])}
    target = {"w": online["w"].copy()}
    soft_update(target, online, 0.01)
    assert np.array_equal(target["w"], online["w"])
    target = {"w": np.array([5.0, 5.0])}
    soft_update(target, online, 1.0)
    assert np.array_equal(target["w"], online["w"])


def test_soft_update_closed_form():
    rng = np.random.default_rng(0)
    online = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=5)}
    pair = TargetPair(online, tau=0.01)
    start = {k: rng.normal(size=v.shape) for k, v in online.items()}
    for k in pair.target:
        pair.target[k][...] = start[k]
    for step in range(1, 501):
        pair.update()
        for k in online:
            expected = online[k] + (1 - 0.01) ** step * (start[k] - online[k])
            assert np.max(np.abs(pair.target[k] - expected)) <= 1e-12


def test_soft_update_rejects_bad_tau():
    with pytest.raises(ValueError):
        soft_update({"w": np.zeros(1)}, {"w": np.zeros(1)}, 0.0)


# DDPG --------------------------------------------------------------------------------

def _critic_batch(seed=0, b=16, m=3):
    rng = np.random.default_rng(seed)
    states = rng.uniform(0.9, 1.1, size=(b, m, 1, 5))
    actions = rng.dirichlet(np.ones(m + 1), size=b)
    rewards = rng.normal(0.0, 0.02, size=b)
    return Transition(states, actions, rewards, states, np.zeros(b, dtype=bool))


def test_critic_loss_strictly_decreases_under_gradient_descent():
    critic = QCritic(1, 5, rng=0)
    batch = _critic_batch()
    opt = nd.SGD(1e-3)
    losses = [critic_step(critic, batch, batch.reward, opt) for _ in range(101)]
    assert losses[0] == pytest.approx(np.mean(batch.reward ** 2), abs=1e-15)  # Q = 0 at zero init
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_critic_loss_falls_under_adam():
    # Adam's fixed-size steps oscillate near the optimum, so only the trend is checked
    critic = QCritic(1, 5, rng=0)
    batch = _critic_batch()
    opt = nd.Adam(1e-3)
    losses = [critic_step(critic, batch, batch.reward, opt) for _ in range(101)]
    assert losses[-1] < 0.5 * losses[0]


def test_ddpg_full_tau_keeps_targets_equal():
    agent = DDPGAgent(env=EnvConfig(window=5), arch=TINY, episodes=1, tau=1.0, batch_size=4,
                      random_state=0).fit(_panel(30))
    for k, v in agent.actor_.params.items():
        assert np.array_equal(agent.actor_target_[k], v)
    for k, v in agent.critic_.params.items():
        assert np.array_equal(agent.critic_target_[k], v)


def test_ddpg_warmup_skips_updates():
    agent = DDPGAgent(env=EnvConfig(window=5), arch=TINY, episodes=1, batch_size=64,
                      random_state=0)
    fresh = agent._build_network(np.random.default_rng(0))
    agent.fit(_panel(30))
    assert agent.history_[0]["critic_loss"] is None
    assert np.array_equal(agent.actor_.params["actor/head.w"], fresh.params["actor/head.w"])


def test_ddpg_reproducible_and_learns_something():
    # the default critic rate of 1e-1 can silence every hidden unit on a run this short
    kw = dict(env=EnvConfig(window=5), arch=TINY, episodes=2, batch_size=8, critic_lr=1e-3,
              random_state=4)
    a, b = DDPGAgent(**kw).fit(_panel(40)), DDPGAgent(**kw).fit(_panel(40))
    for k in a.actor_.params:
        assert a.actor_.params[k].tobytes() == b.actor_.params[k].tobytes()
    assert np.any(a.actor_.params["actor/head.w"] != 0)
    assert a.history_ == b.history_


def test_ddpg_rejects_batch_above_capacity():
    with pytest.raises(ValueError, match="batch_size"):
        DDPGAgent(buffer_size=8, batch_size=16).fit(_panel())


# PPO ---------------------------------------------------------------------------------

def test_discounted_returns_hand():
    np.testing.assert_allclose(discounted_returns([1.0, 2.0, 3.0], 0.5), [2.75, 3.5, 3.0], rtol=0, atol=1e-15)


def test_advantage_recurrence():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t, gamma = int(rng.integers(2, 60)), float(rng.uniform(0.5, 0.999))
        r, v = rng.normal(size=t), rng.normal(size=t)
        adv, _ = advantages(r, v, gamma)
        lhs = adv[:-1]
        rhs = r[:-1] + gamma * adv[1:] + gamma * v[1:] - v[:-1]
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_zero_advantage_when_value_exact():
    r = np.full(10, 0.01)
    g = discounted_returns(r, 0.9)
    adv, _ = advantages(r, g, 0.9)
    assert np.all(adv == 0.0)
    logp = nd.Tensor(np.random.default_rng(0).normal(size=10), requires_grad=True)
    (g_lp,) = nd.grad(clipped_surrogate(logp, logp.data, adv), [logp])
    assert np.all(g_lp == 0.0)


def test_ratio_one_at_old_policy_matches_vanilla_gradient():
    rng = np.random.default_rng(1)
    pol = GaussianPolicy(1, 5, TINY, rng=1)
    for v in pol.params.values():
        v[...] = rng.normal(0, 0.3, v.shape)
    states = rng.uniform(0.9, 1.1, size=(12, 3, 1, 5))
    mean, std = pol.mean_std(states)
    actions = mean + std * rng.standard_normal(mean.shape)
    old = GaussianPolicy.log_prob(nd.Tensor(mean), nd.Tensor(std), actions).data
    adv = rng.normal(size=12)
    keys = sorted(k for k in pol.params if k.startswith("policy/"))

    def grads(fn):
        p = {k: nd.Tensor(v, requires_grad=k in keys) for k, v in pol.params.items()}
        lp = GaussianPolicy.log_prob(*pol.dist(p, states), actions)
        ratio = np.exp(lp.data - old)
        return ratio, fn(lp), nd.grad(fn(lp), [p[k] for k in keys])

    ratio, clipped, g_clip = grads(lambda lp: clipped_surrogate(lp, old, adv, 0.2))
    _, vanilla, g_van = grads(lambda lp: vanilla_surrogate(lp, old, adv))
    assert np.all(ratio == 1.0)
    assert clipped.data == vanilla.data
    for a, b in zip(g_clip, g_van):
        assert np.max(np.abs(a - b)) <= 1e-10
    # and the vanilla form is mean(A * grad log pi) at the old policy
    p = {k: nd.Tensor(v, requires_grad=k in keys) for k, v in pol.params.items()}
    lp = GaussianPolicy.log_prob(*pol.dist(p, states), actions)
    g_pg = nd.grad((lp * adv).mean(), [p[k] for k in keys])
    for a, b in zip(g_clip, g_pg):
        assert np.max(np.abs(a - b)) <= 1e-10


@pytest.mark.parametrize("adv,log_ratio", [(1.5, math.log(1.4)), (-0.7, math.log(0.6))])
def test_clipped_samples_have_zero_gradient(adv, log_ratio):
    eps = 0.2
    old = np.zeros(3)
    # sample 0 is clipped out, samples 1-2 sit inside the interval
    lp = nd.Tensor(np.array([log_ratio, 0.05, -0.05]), requires_grad=True)
    (g,) = nd.grad(clipped_surrogate(lp, old, np.array([adv, 1.0, -1.0]), eps), [lp])
    assert g[0] == 0.0
    assert np.all(g[1:] != 0.0)


def test_clipped_surrogate_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    x = rng.normal(0.0, 0.4, size=30)
    old, adv = rng.normal(0.0, 0.1, 30), rng.normal(size=30)
    # stay clear of the clip kinks so the difference quotient is valid
    keep = np.abs(np.abs(np.exp(x - old) - 1) - 0.2) > 1e-3
    x, old, adv = x[keep], old[keep], adv[keep]
    t = nd.Tensor(x, requires_grad=True)
    (g,) = nd.grad(clipped_surrogate(t, old, adv), [t])
    num = central_diff(lambda d: float(clipped_surrogate(nd.Tensor(d["x"]), old, adv).data), {"x": x.copy()}, h=1e-7)
    assert global_rel_err({"x": g}, num) <= 1e-4


def test_gaussian_kl_hand_values():
    assert gaussian_kl([0.3], [0.5], [0.3], [0.5]) == 0.0
    expected = math.log(2.0 / 1.0) + (1.0 + 1.0) / (2 * 4.0) - 0.5
    assert gaussian_kl([0.0], [1.0], [1.0], [2.0]) == pytest.approx(expected, abs=1e-15)


def test_rollout_rewards_match_env():
    panel = _panel(40)
    env = PortfolioEnv(panel, EnvConfig(window=5), 10, 20)
    w = np.random.default_rng(0).dirichlet(np.ones(4), size=10)
    env.reset()
    direct = [env.step(a)[1] for a in w]
    assert rollout_rewards(w, relatives_stack(panel, np.arange(11, 21)), 0.0025).tolist() == direct


def test_ppo_runs_and_reports_diagnostics(tmp_path):
    log = tmp_path / "log.jsonl"
    agent = PPOAgent(env=EnvConfig(window=5), arch=TINY, iterations=3, random_state=0,
                     log_path=log).fit(_panel(40))
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert len(lines) == 3 and lines == agent.history_
    for rec in lines:
        assert {"epoch", "objective", "train_apv", "mean_ratio", "kl", "value_loss"} <= set(rec)
        assert rec["kl"] >= 0
    w = agent.predict(_panel(40), [10, 20])
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_ppo_horizon_and_reduction_options():
    kw = dict(env=EnvConfig(window=5), arch=TINY, iterations=2, random_state=0)
    PPOAgent(horizon=10, reduction="sum", **kw).fit(_panel(40))
    with pytest.raises(ValueError, match="reduction"):
        PPOAgent(reduction="max", **kw).fit(_panel(40))


# PG ----------------------------------------------------------------------------------

def _pg_setup(seed=0, days=5):
    arch = Architecture(channels=2, n_residual=1)
    actor = IIEActor(1, 6, arch, rng=seed)
    rng = np.random.default_rng(seed)
    for v in actor.params.values():
        v[...] = rng.normal(0.0, 0.5, v.shape)
    panel = _panel(40, seed)
    days_ = np.arange(12, 12 + days)
    return actor, window_stack(panel, days_, 6), relatives_stack(panel, days_ + 1), asset_variances(panel, days_, 10)


@pytest.mark.parametrize("beta", [0.0, 2.0])
def test_pg_objective_gradient_matches_finite_differences(beta):
    actor, states, rel, var = _pg_setup()
    assert actor.n_params() <= 50

    def f(params):
        return float(pg_objective(actor, {k: nd.Tensor(v) for k, v in params.items()}, states, rel,
                                  0.0025, var, beta)[0].data)

    p = {k: nd.Tensor(v, requires_grad=True) for k, v in actor.params.items()}
    j, _ = pg_objective(actor, p, states, rel, 0.0025, var, beta)
    g = dict(zip(p, nd.grad(j, list(p.values()))))
    assert global_rel_err(g, central_diff(f, actor.params)) <= 1e-4


def test_pg_objective_matches_env_rewards():
    actor, states, rel, _ = _pg_setup(days=8)
    j, lr = pg_objective(actor, {k: nd.Tensor(v) for k, v in actor.params.items()}, states, rel, 0.0025)
    expected = rollout_rewards(actor(states), rel, 0.0025)
    np.testing.assert_allclose(lr.data, expected, rtol=0, atol=1e-14)
    assert j.data == pytest.approx(expected.mean(), abs=1e-15)


def test_pg_zero_learning_rate_changes_nothing():
    panel = _panel(50)
    agent = PGAgent(env=EnvConfig(window=5), arch=TINY, epochs=5, learning_rate=0.0, random_state=3).fit(panel)
    fresh = agent._build_network(np.random.default_rng(0))
    init = PGAgent(env=EnvConfig(window=5), arch=TINY, epochs=0, random_state=3).fit(panel)
    for k in fresh.params:
        assert np.array_equal(agent.actor_.params[k], init.actor_.params[k])
    assert len({h["train_apv"] for h in agent.history_}) == 1


def test_pg_without_noise_equals_plain_loop():
    panel, env = _panel(50), EnvConfig(window=5)
    agent = PGAgent(env=env, arch=TINY, epochs=6, learning_rate=1e-2, random_state=8).fit(panel)
    plain = PGAgent(env=env, arch=TINY, epochs=0, random_state=8).fit(panel).actor_
    days = np.arange(4, 49)
    states, rel = window_stack(panel, days, 5), relatives_stack(panel, days + 1)
    opt = nd.Adam(1e-2)
    for _ in range(6):
        p = {k: nd.Tensor(v, requires_grad=True) for k, v in plain.params.items()}
        j, _ = pg_objective(plain, p, states, rel, env.cost_rate)
        opt.step(plain.params, dict(zip(p, nd.grad(j, list(p.values())))), maximize=True)
    for k in plain.params:
        assert agent.actor_.params[k].tobytes() == plain.params[k].tobytes()


def test_pg_noise_changes_trajectory_but_is_reproducible():
    panel = _panel(50)
    kw = dict(arch=TINY, epochs=4, learning_rate=1e-2, random_state=8)
    clean = PGAgent(env=EnvConfig(window=5), **kw).fit(panel)
    noisy = PGAgent(env=EnvConfig(window=5, noise_sigma=0.002), **kw).fit(panel)
    again = PGAgent(env=EnvConfig(window=5, noise_sigma=0.002), **kw).fit(panel)
    assert noisy.history_ != clean.history_
    assert noisy.history_ == again.history_


def test_pg_infeasible_epoch_is_logged_and_skipped(monkeypatch):
    real = pg_module.pg_objective
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise FloatingPointError("log: non-positive argument")
        return real(*args, **kwargs)

    monkeypatch.setattr(pg_module, "pg_objective", flaky)
    agent = PGAgent(env=EnvConfig(window=5), arch=TINY, epochs=2, random_state=0).fit(_panel())
    assert "aborted" in agent.history_[0] and "objective" in agent.history_[1]


# estimator plumbing ---------------------------------------------------------------------

def test_get_params_and_clone():
    agent = PGAgent(env=EnvConfig(window=5), epochs=3, learning_rate=0.1)
    params = agent.get_params()
    assert params["epochs"] == 3 and params["learning_rate"] == 0.1
    twin = clone(agent).set_params(epochs=4)
    assert twin.epochs == 4 and agent.epochs == 3


def test_predict_before_fit_fails():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        PGAgent().predict(_panel())


@pytest.mark.parametrize("cls", [PGAgent, PPOAgent])
def test_checkpoint_round_trip(tmp_path, cls):
    panel = _panel()
    budget = {"epochs": 2} if cls is PGAgent else {"iterations": 2}
    agent = cls(env=EnvConfig(window=5), arch=TINY, random_state=0, **budget).fit(panel)
    agent.save(tmp_path / "ck.json")
    back, meta = load_agent(tmp_path / "ck.json")
    assert meta["agent"] == cls.kind
    assert back.predict(panel).tobytes() == agent.predict(panel).tobytes()


def test_checkpoint_architecture_mismatch_names_shapes(tmp_path):
    agent = PGAgent(env=EnvConfig(window=5), arch=TINY, epochs=1, random_state=0).fit(_panel())
    agent.save(tmp_path / "ck.json")
    params, meta = nd.load_params(tmp_path / "ck.json")
    meta["config"]["arch"]["channels"] = 3
    nd.save_params(tmp_path / "bad.json", params, meta)
    with pytest.raises(ValueError, match=r"actor/conv0.w: checkpoint shape \(2, 1, 3\)"):
        load_agent(tmp_path / "bad.json")
