"""
Statistically careful evaluation, and the wire protocol for trainers
====================================================================

Episodic return alone says little: two policies can score identically while
behaving completely differently, and single-seed numbers are noise. The
harness runs seed batteries, reports confidence intervals, and measures
behaviour at the system level (who got attacked, what the defender actually
did, how available the services stayed) from ground-truth traces that are
structurally separate from the reward the agent optimised.

External trainers never import the simulator: they speak newline-delimited
JSON over stdio or TCP, and the bundled client adapter shows the full loop.
"""

import acdsim
from acdsim import evalharness, rlcore
from acdsim.taskmodel import Env

config = acdsim.load_bundled("mvp-2host-oracle")

# Train briefly, then evaluate trained vs random over a seed battery.
table = rlcore.train_q_learning(
    Env(config, 0), rlcore.QLearningParams(episodes=3000, seed=0))
trained = rlcore.make_greedy_policy(table)
random_policy = rlcore.make_random_policy()
seeds = list(range(10))

summary_t = evalharness.run_episodes(trained, config, seeds, episodes_per_seed=20)
summary_r = evalharness.run_episodes(random_policy, config, seeds, episodes_per_seed=20)
report = evalharness.compare_policies(summary_t, summary_r, "trained", "random")
print(report.to_text())

# Confidence intervals both ways: Student t and a seeded bootstrap.
per_seed = [sum(r) / len(r) for r in summary_r.returns_by_seed.values()]
print("\nrandom policy per-seed means:", [round(v, 1) for v in per_seed])
print("t interval:        ", evalharness.confidence_interval(per_seed, 0.95, "t"))
print("bootstrap interval:", evalharness.confidence_interval(per_seed, 0.95, "bootstrap", seed=0))

# The wire protocol, driven in-process: the same messages a remote trainer
# would exchange over stdio or TCP.
from acdsim.protocol import Session

session = Session(acdsim.load_bundled("mvp-2host"))
for request in ('{"op":"hello"}', '{"op":"reset","seed":42}',
                '{"op":"step","action":0}', '{"op":"close"}'):
    print("\n>", request)
    print("<", session.handle_line(request))
