"""Adapter acceptance: protocol fidelity against a native in-process run."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

import acdsim
from acdsim import rlcore
from acdsim.protocol import Session
from acdsim_adapter import RemoteEnvClient, StdioTransport

SCENARIO = str(Path(__file__).resolve().parents[2] / "src" / "acdsim"
               / "scenarios" / "mvp_2host.yaml")

SEED = 42
# Scripted blue episode: mirrors the reward-scheme fixture trace.
SCRIPT = ["pass", "pass", "restore:ws", "pass", "quarantine:ws",
          "pass", "restore:srv", "pass"]


def _native_episode():
    config = acdsim.load_bundled("mvp-2host")
    env, obs = acdsim.env_reset(config, SEED)
    steps = []
    for name in SCRIPT:
        obs, reward, terminated, truncated, info = env.step(env.action_names.index(name))
        steps.append({
            "obs": [float(v) for v in obs.flat],
            "reward": float(reward),
            "terminated": terminated,
            "truncated": truncated,
            "mask": [bool(b) for b in env.legal_action_mask()],
        })
    return env.action_names, steps


def test_criterion_10_adapter_reproduces_native_run():
    action_names, native_steps = _native_episode()
    with RemoteEnvClient(StdioTransport(SCENARIO)) as client:
        client.reset(seed=SEED)
        assert client.action_names == action_names
        remote_steps = []
        for name in SCRIPT:
            obs, reward, terminated, truncated, info = client.step(
                action_names.index(name))
            remote_steps.append({
                "obs": obs,
                "reward": reward,
                "terminated": terminated,
                "truncated": truncated,
                "mask": info["mask"],
            })
    assert remote_steps == native_steps
    # The scheme's pass bonus crosses the wire unchanged.
    assert remote_steps[0]["reward"] == 0.1
    # gamma=1 return agrees with the native discounted-return computation
    remote_return = rlcore.discounted_return([s["reward"] for s in remote_steps], 1.0)
    native_return = rlcore.discounted_return([s["reward"] for s in native_steps], 1.0)
    assert remote_return == native_return
    print("\nACCEPTANCE 10 PASS: adapter reproduces the native run field-for-field; "
          "pass reward +0.1 unchanged through the protocol")


def test_adapter_transcript_is_byte_identical_to_direct_drive():
    """Driving the transport directly must give the identical byte transcript."""
    config = acdsim.load_bundled("mvp-2host")
    requests = [{"op": "hello"}, {"op": "reset", "seed": SEED}]
    requests += [{"op": "step", "action": 0} for _ in range(5)]
    requests += [{"op": "close"}]
    session = Session(config)
    direct = []
    for message in requests:
        line = json.dumps(message, separators=(",", ":"))
        direct.append(">" + line)
        direct.append("<" + session.handle_line(line))

    with RemoteEnvClient(StdioTransport(SCENARIO)) as client:
        client.reset(seed=SEED)
        for _ in range(5):
            client.step(0)
    # client.close() appends its own exchange inside the context manager
    assert client.transcript == direct


def test_adapter_episode_return_cross_check():
    config = acdsim.load_bundled("mvp-2host")
    env, _ = acdsim.env_reset(config, 7)
    native_rewards = []
    while True:
        _, reward, terminated, truncated, _ = env.step(0)
        native_rewards.append(reward)
        if terminated or truncated:
            break
    with RemoteEnvClient(StdioTransport(SCENARIO)) as client:
        client.reset(seed=7)
        remote_rewards = []
        while True:
            _, reward, terminated, truncated, _ = client.step(0)
            remote_rewards.append(reward)
            if terminated or truncated:
                break
    assert remote_rewards == native_rewards
    assert rlcore.discounted_return(remote_rewards, 1.0) == \
        rlcore.discounted_return(native_rewards, 1.0)
