"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion. The slowest tests (learning equivalence and separation) stay
within their stated runtime budgets on commodity hardware.
"""

from __future__ import annotations

import dataclasses
import math
import time

import numpy as np
import pytest

import acdsim
from acdsim import evalharness, netsim, rlcore
from acdsim.evalharness import confidence_interval, run_episodes
from acdsim.netsim import Event, advance_until, build_network, derive_rng, serialize_state
from acdsim.protocol import Session
from acdsim.taskmodel import Env, env_reset
from scenario_gen import random_scenario


def _report(criterion: int, text: str) -> None:
    print(f"\nACCEPTANCE {criterion} PASS: {text}")


def _random_walk_action(env: Env, rng) -> int:
    mask = env.legal_action_mask()
    choices = np.flatnonzero(mask)
    return int(choices[rng.integers(len(choices))])


# ---------------------------------------------------------------------------
# 1. Reward scheme reproduction against a hand-simulated trace


def test_criterion_1_reward_scheme_hand_trace(mvp_config):
    """Hand simulation of the shipped fixture under a scripted blue policy.

    Red walks the 10s kill chain (scan@10, exploit ws@20, escalate ws@30, ...).
    Blue: pass, pass, restore ws, pass, quarantine ws, pass, restore srv, pass.
    Window-end accounting with the -2/-1/+0.1 scheme gives, step by step:
      1: pass, nothing compromised           -> +0.1
      2: pass, ws user at window end         -> -2
      3: restore ws (escalate@30 voids)      -> -1
      4: pass, ws re-exploited at t=40       -> -2
      5: quarantine ws (escalate@50 voids);
         ws still user-compromised           -> -2
      6: pass, red moves to srv, exploit@60;
         ws and srv both compromised         -> -4
      7: restore srv (escalate@70 voids);
         ws still compromised                -> -3
      8: pass, srv re-exploited at t=80      -> -4
    """
    start = time.monotonic()
    env, _ = env_reset(mvp_config, 42)
    script = ["pass", "pass", "restore:ws", "pass", "quarantine:ws",
              "pass", "restore:srv", "pass"]
    expected = [0.1, -2.0, -1.0, -2.0, -2.0, -4.0, -3.0, -4.0]
    rewards = []
    for name in script:
        _, reward, terminated, truncated, _ = env.step(env.action_names.index(name))
        rewards.append(reward)
        assert not terminated and not truncated
    for got, want in zip(rewards, expected):
        assert got == pytest.approx(want, abs=1e-9)
    assert rlcore.discounted_return(rewards, 1.0) == pytest.approx(math.fsum(expected), abs=1e-9)
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    _report(1, f"per-step rewards match the hand trace to 1e-9 ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. Oracle equivalence (shared training artifacts reused by criterion 3)


@pytest.fixture(scope="module")
def oracle_solution(oracle_config):
    model = rlcore.extract_mdp(oracle_config)
    q_vi = rlcore.value_iteration(model, tol=1e-8)
    residual = np.abs(
        rlcore.bellman_backup(model, np.nan_to_num(q_vi)) - np.nan_to_num(q_vi)
    )[model.legal].max()
    assert residual <= 1e-8
    return model, q_vi


@pytest.fixture(scope="module")
def trained_tables(oracle_config):
    env = Env(oracle_config, 0)
    start = time.monotonic()
    tables = [
        rlcore.train_q_learning(env, rlcore.QLearningParams(episodes=20_000, seed=seed))
        for seed in (0, 1, 2)
    ]
    return tables, time.monotonic() - start


def test_criterion_2_oracle_equivalence(oracle_solution, trained_tables):
    model, q_vi = oracle_solution
    tables, elapsed = trained_tables
    assert elapsed < 120.0
    worst = 0.0
    for table in tables:
        for idx, key in enumerate(model.state_keys):
            if key not in table.visits:
                continue
            for action in range(model.n_actions):
                if table.visits[key][action] > 0 and model.legal[idx, action]:
                    worst = max(worst, abs(float(table.q[key][action]) - q_vi[idx, action]))
    assert worst <= 0.05
    _report(2, f"3 seeds x 20k episodes reach max|Q - Q_VI| = {worst:.2e} <= 0.05 "
               f"({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# 3. Learnability separation


def test_criterion_3_learnability_separation(oracle_config, trained_tables):
    start = time.monotonic()
    tables, _ = trained_tables
    greedy = rlcore.make_greedy_policy(tables[0])
    baseline = rlcore.make_random_policy()
    seeds = list(range(10))
    summary_q = run_episodes(greedy, oracle_config, seeds, 20, max_steps=100)
    summary_r = run_episodes(baseline, oracle_config, seeds, 20, max_steps=100)
    assert summary_q.mean_return > summary_r.mean_return
    assert summary_q.ci_low > summary_r.ci_high  # non-overlapping 95% t-intervals
    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    _report(3, f"greedy-Q mean {summary_q.mean_return:.2f} vs random "
               f"{summary_r.mean_return:.2f}, disjoint CIs ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 4. No-magic sensor suite


def test_criterion_4_no_magic_sensors(mvp_config):
    blind_sensor = dataclasses.replace(
        mvp_config.pomdp.sensor, detection_prob=0.0, false_positive_prob=0.0)
    blind = dataclasses.replace(
        mvp_config, pomdp=dataclasses.replace(mvp_config.pomdp, sensor=blind_sensor))
    for seed in range(100):
        env, obs0 = env_reset(blind, seed)
        baseline = obs0.flat.copy()
        walk = derive_rng(seed, "blind-walk")
        for _ in range(8):
            obs, *_ = env.step(_random_walk_action(env, walk))
            assert np.array_equal(obs.flat, baseline), "observation leaked without sensors"
        truth = env.truth()
        assert any(t.compromise != "none" for t in truth.hosts.values())

    # Perfect sensing: every exploit/escalate flags its host within the step.
    rng = np.random.default_rng(99)
    checked = 0
    for case in range(10):
        config = random_scenario(rng, pomdp={
            "sensor": {"mode": "realistic", "detection_prob": 1.0,
                       "false_positive_prob": 0.0, "report_delay": 0.0},
        })
        if config.red.stealth != 0.0:
            config = dataclasses.replace(
                config, red=dataclasses.replace(config.red, stealth=0.0))
        env = Env(config, case)
        seen = 0
        for _ in range(20):
            if env.done:
                break
            obs, *_ = env.step(0)
            for event in env.state.trace:
                if (event.source == "red" and event.kind in ("exploit", "escalate")
                        and not event.void and event.timestamp <= env.state.clock):
                    layout = env.obs_layout()
                    assert obs.flat[layout[f"{event.subject}.detected"]] == 1.0
                    seen += 1
        checked += seen
    assert checked > 0
    _report(4, "blind sensors leak nothing over 100 seeds; perfect sensors flag "
               "every exploit/escalate in-step")


# ---------------------------------------------------------------------------
# 5. Mask soundness


def test_criterion_5_mask_soundness():
    rng = np.random.default_rng(7)
    total_steps = 0
    scenario_count = 0
    while total_steps < 100_000:
        config = random_scenario(rng)
        scenario_count += 1
        env = Env(config, scenario_count)
        walk = derive_rng(scenario_count, "mask-walk")
        episode_seed = 0
        while total_steps < 100_000:
            if env.done:
                episode_seed += 1
                if episode_seed > 40:
                    break
                env.reset(netsim.derive_seed(scenario_count, f"ep{episode_seed}"))
            env.step(_random_walk_action(env, walk))  # must never raise
            total_steps += 1
            if total_steps % 20_000 == 0 and episode_seed > 20:
                break

    lenient_rng = np.random.default_rng(8)
    noop_checks = 0
    while noop_checks < 1_000:
        config = random_scenario(lenient_rng, pomdp={"lenient_mask": True})
        env = Env(config, noop_checks)
        walk = derive_rng(noop_checks, "lenient-walk")
        for _ in range(50):
            if noop_checks >= 1_000:
                break
            mask = env.legal_action_mask()
            masked = np.flatnonzero(~mask)
            if len(masked) == 0:
                if env.done:
                    break
                env.step(_random_walk_action(env, walk))
                continue
            before = serialize_state(env.state)
            step_before = env.step_index
            obs, reward, terminated, truncated, info = env.step(
                int(masked[walk.integers(len(masked))]))
            assert info.get("masked_noop") is True
            assert reward == 0.0 and not terminated and not truncated
            assert serialize_state(env.state) == before
            assert env.step_index == step_before
            noop_checks += 1
            if env.done:
                break
    _report(5, f"{total_steps} unmasked random steps with zero InvalidAction errors; "
               f"{noop_checks} lenient masked actions with zero state deltas")


# ---------------------------------------------------------------------------
# 6. Determinism


def test_criterion_6_determinism(mvp_config):
    def one_trace() -> str:
        env, obs = env_reset(mvp_config, 42)
        walk = derive_rng(9000, "det-walk")
        for _ in range(30):
            if env.done:
                break
            env.step(_random_walk_action(env, walk))
        return "\n".join(netsim.trace_lines(env.episode_trace()))

    def one_transcript() -> str:
        session = Session(mvp_config)
        lines = [session.handle_line('{"op":"hello"}'),
                 session.handle_line('{"op":"reset","seed":42}')]
        for _ in range(15):
            lines.append(session.handle_line('{"op":"step","action":0}'))
        lines.append(session.handle_line('{"op":"close"}'))
        return "\n".join(lines)

    traces = {one_trace() for _ in range(100)}
    transcripts = {one_transcript() for _ in range(100)}
    assert len(traces) == 1
    assert len(transcripts) == 1
    _report(6, "100 runs produced byte-identical event traces and protocol transcripts")


# ---------------------------------------------------------------------------
# 7. Event-order property


def test_criterion_7_event_order(no_red_config):
    state = build_network(no_red_config, 0)
    state.on_applied = []
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        base = state.clock
        n = int(rng.integers(2, 12))
        for _ in range(n):
            ts = base + float(rng.uniform(0, 50))
            state.calendar.push(Event(ts, 0, "system", "connect", "ws"))
        _, applied = advance_until(state, base + 50.0)
        keys = [(e.timestamp, e.seq) for e in applied]
        assert keys == sorted(keys)
    _report(7, "10^4 random event sets all applied in (timestamp, seq) order")


# ---------------------------------------------------------------------------
# 8. Horizon and stopping contracts


def test_criterion_8_horizon_and_stopping(stopping_config, sparse_config):
    rng = np.random.default_rng(11)
    for episode in range(100):
        config = random_scenario(rng, pomdp={
            "horizon": {"kind": "fixed", "steps": int(rng.integers(3, 15))},
            "reward": {"kind": "dense_default"},
        })
        env = Env(config, episode)
        walk = derive_rng(episode, "fixed-walk")
        steps = 0
        while True:
            _, _, terminated, truncated, _ = env.step(_random_walk_action(env, walk))
            steps += 1
            assert not terminated, "fixed horizon must never terminate"
            if truncated:
                break
        assert steps == config.pomdp.horizon.steps

    stop_id = None
    for episode in range(100):
        env = Env(stopping_config, episode)
        stop_id = env.action_names.index("stop")
        walk = derive_rng(episode, "stop-walk")
        stop_at = int(walk.integers(1, 12))
        for step in range(1, stop_at + 1):
            action = stop_id if step == stop_at else 0
            _, _, terminated, truncated, _ = env.step(action)
            assert not truncated
            assert terminated == (step == stop_at)

    for episode in range(100):
        env = Env(sparse_config, episode)
        walk = derive_rng(episode, "sparse-walk")
        for _ in range(50):
            _, reward, terminated, truncated, _ = env.step(_random_walk_action(env, walk))
            assert not truncated
            if terminated:
                assert reward == sparse_config.pomdp.reward.terminal_penalty
                break
            assert reward == 0.0
    _report(8, "fixed horizons truncate exactly at n; stop terminates exactly when "
               "taken; sparse rewards are nonzero only on terminal transitions")


# ---------------------------------------------------------------------------
# 9. Statistics oracle


def test_criterion_9_statistics_oracle():
    lo, hi = confidence_interval([1, 2, 3, 4, 5], 0.95, "t")
    # Independent computation: t_{4,0.975}=2.776445105198 (standard table),
    # mean 3, s = sqrt(2.5), margin = t * s / sqrt(5).
    margin = 2.776445105198 * math.sqrt(2.5) / math.sqrt(5)
    assert lo == pytest.approx(3.0 - margin, abs=1e-3)
    assert hi == pytest.approx(3.0 + margin, abs=1e-3)
    assert confidence_interval([4.2] * 8, 0.95, "t") == (4.2, 4.2)
    lo_b, hi_b = confidence_interval([4.2] * 8, 0.95, "bootstrap", seed=0)
    assert lo_b == hi_b == 4.2
    _report(9, "t-interval matches the textbook formula within 1e-3; "
               "identical samples give zero-width intervals")
