"""
Exact oracles and tabular learning: is the task specified correctly?
====================================================================

Small, fully observed variants of a scenario can be enumerated exactly:
every reachable state, every transition probability, every reward, by
replaying the real environment with forced outcomes (no sampling, no second
implementation of the rules). Value iteration on that model is the ground
truth that tabular Q-learning on the live environment must converge to.

The exercise also surfaces a classic reward-modelling trap, worth seeing
once in a small enough world to understand completely.
"""

import numpy as np

import acdsim
from acdsim import rlcore
from acdsim.taskmodel import Env

config = acdsim.load_bundled("mvp-2host-oracle")
model = rlcore.extract_mdp(config)
print(f"enumerated {model.n_states} states x {model.n_actions} actions "
      f"({len(model.t_prob)} transition branches)")

q_star = rlcore.value_iteration(model, tol=1e-8)
stage = {0: "unk", 1: "disc", 2: "user", 3: "root", 4: "imp"}
print("\noptimal values and actions:")
for i, key in enumerate(model.state_keys):
    label = "(" + ", ".join(stage[v] for v in key) + ")"
    best = model.action_names[int(np.nanargmax(q_star[i]))]
    print(f"  {label:14s} V*={np.nanmax(q_star[i]):8.3f}  best={best}")

# The trap: with dense negative rewards and a terminal horizon, the optimal
# policy at (root, root) is to restore the *workstation* -- deliberately
# letting the impact land, because ending the episode stops the bleeding.
# Average episodic reward alone would never reveal this; the exact oracle
# and the system-level metrics do.
rr = model.state_keys.index((3, 3))
print("\nat (root, root):")
for a, name in enumerate(model.action_names):
    if model.legal[rr, a]:
        print(f"  Q({name}) = {q_star[rr, a]:.3f}")
print("ending the episode beats defending it: a reward-design insight the")
print("oracle makes obvious (and sparse rewards are one way out).")

# Q-learning on the live environment, three seeds, must match the oracle.
env = Env(config, 0)
for seed in (0, 1, 2):
    table = rlcore.train_q_learning(
        env, rlcore.QLearningParams(episodes=4000, seed=seed))
    worst = 0.0
    for idx, key in enumerate(model.state_keys):
        if key not in table.visits:
            continue
        for a in range(model.n_actions):
            if table.visits[key][a] > 0 and model.legal[idx, a]:
                worst = max(worst, abs(float(table.q[key][a]) - q_star[idx, a]))
    print(f"seed {seed}: max |Q_learned - Q*| over visited pairs = {worst:.2e}")
