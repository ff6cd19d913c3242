"""
The agent interface: observations, masked actions, rewards
===========================================================

One episode of the mvp-2host task, played by a scripted defender. The
observation is built purely from sensor alerts (never ground truth), the
action mask tracks what is operationally meaningful right now, and the
reward follows the classic scheme: -2 per compromised host per step,
-1 for a restore, +0.1 for waiting while the network is clean.
"""

import acdsim

config = acdsim.load_bundled("mvp-2host")
env, obs = acdsim.env_reset(config, seed=42)

print("actions:", ", ".join(env.action_names))
print("flat observation layout:")
for name, idx in env.obs_layout().items():
    print(f"  [{idx:2d}] {name}")

print("\ninitial observation (nothing detected yet):", obs.flat.astype(int).tolist())
mask = env.legal_action_mask()
print("initially legal:", [n for n, ok in zip(env.action_names, mask) if ok])

script = ["pass", "pass", "restore:ws", "pass", "quarantine:ws",
          "pass", "restore:srv", "pass"]
print("\nscripted episode:")
total = 0.0
for name in script:
    obs, reward, terminated, truncated, info = env.step(env.action_names.index(name))
    total += reward
    detected = [n for n in config.host_ids()
                if obs.flat[env.obs_layout()[f"{n}.detected"]] > 0]
    print(f"  t={info['clock']:5.1f} {name:14s} reward={reward:+5.1f} "
          f"feedback={info['feedback']:10s} detected={detected or '-'}")
print(f"undiscounted return: {total:+.1f}")

# The mask reflects evidence, not truth: restore only opens up once a
# compromise has been detected, quarantine/release are complementary.
mask = env.legal_action_mask()
print("\nlegal now:", [n for n, ok in zip(env.action_names, mask) if ok])

# Strict masking turns trainer bugs into loud errors instead of silent no-ops.
try:
    env.step(env.action_names.index("release:srv"))
except acdsim.InvalidActionError as err:
    print(f"masked action correctly rejected: {err}")
