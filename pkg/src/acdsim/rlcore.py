"""Baseline RL machinery used to validate the environment is learnable.

An exact value-iteration oracle over an exhaustively enumerated MDP (small,
fully observed scenarios only), tabular Q-learning, discounted returns, and
the scripted/heuristic/random policies evaluation is built on. Deliberately
tabular: exactness matters more here than scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netsim import derive_rng, derive_seed
from .scenario_io import ScenarioConfig
from .taskmodel import Env, Observation


class OracleExtractionError(Exception):
    """Scenario is not oracle-enumerable (or the state cap was exceeded)."""


class ConvergenceError(Exception):
    """Value iteration failed to reach the residual tolerance."""


class ScriptExhaustedError(Exception):
    """A scripted policy ran out of actions."""


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^k * r_k over the given reward sequence."""
    total = 0.0
    weight = 1.0
    for r in rewards:
        total += weight * r
        weight *= gamma
    return total


# ---------------------------------------------------------------------------
# Exact MDP extraction


@dataclass
class MdpModel:
    """Enumerated MDP with sparse transitions and per-state action legality."""

    state_keys: list[tuple]
    action_names: list[str]
    gamma: float
    legal: np.ndarray           # (S, A) bool
    terminal: np.ndarray        # (S,) bool
    t_src: np.ndarray           # transition arrays, one entry per branch
    t_act: np.ndarray
    t_prob: np.ndarray
    t_rew: np.ndarray
    t_dst: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.state_keys)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    def index(self, key: tuple) -> int:
        return self.state_keys.index(key)

    def transition_matrix(self, action: int) -> np.ndarray:
        """Dense P(s'|s, a) rows for one action (legal rows sum to 1)."""
        mat = np.zeros((self.n_states, self.n_states))
        sel = self.t_act == action
        np.add.at(mat, (self.t_src[sel], self.t_dst[sel]), self.t_prob[sel])
        return mat


class _ForcedDraws:
    """Serves a planned prefix of Bernoulli outcomes, then defaults to True.

    Records every (prob, outcome) actually drawn so the caller can enumerate
    the sibling branches of the outcome tree and compute exact probabilities.
    """

    def __init__(self, plan: tuple[bool, ...]):
        self.plan = plan
        self.drawn: list[tuple[float, bool]] = []

    def __call__(self, stream: str, p: float) -> bool:
        i = len(self.drawn)
        outcome = self.plan[i] if i < len(self.plan) else True
        self.drawn.append((p, outcome))
        return outcome

    def probability(self) -> float:
        prob = 1.0
        for p, outcome in self.drawn:
            prob *= p if outcome else 1.0 - p
        return prob


def _check_oracle_scenario(config: ScenarioConfig) -> None:
    problems: list[str] = []
    if config.pomdp.sensor.mode != "omniscient_oracle":
        problems.append("sensor mode must be omniscient_oracle")
    if config.pomdp.sequence.mode != "fixed_tick":
        problems.append("sequence mode must be fixed_tick")
    if config.pomdp.horizon.kind == "fixed":
        problems.append("fixed horizon makes values step-dependent; use terminal or continuing")
    if not 0.0 <= config.pomdp.gamma < 1.0:
        problems.append("gamma must be < 1 for the infinite-horizon solve")
    red = config.red
    if red.mode == "switching":
        problems.append("switching red mode draws targeting randomness")
    if red.targeting == "random_reachable":
        problems.append("random_reachable targeting draws outside the branch enumerator")
    if red.jitter != 0.0:
        problems.append("red jitter must be 0")
    if red.stealth not in (0.0, 1.0):
        problems.append("red stealth must be 0 or 1")
    if any(rate > 0 for rate in config.green.rates_per_hour.values()):
        problems.append("green rates must all be 0")
    dt = config.pomdp.sequence.dt
    for fam in config.pomdp.actions:
        if fam.name not in ("pass", "stop") and fam.duration > dt:
            problems.append(f"action '{fam.name}' duration exceeds dt (pending actions break the state key)")
    if problems:
        raise OracleExtractionError("scenario is not oracle-enumerable: " + "; ".join(problems))


def extract_mdp(config: ScenarioConfig, state_cap: int = 10_000) -> MdpModel:
    """Exhaustively enumerate reachable states and exact transition branches.

    Works by replaying the real environment with forced Bernoulli outcomes
    (never by sampling): every stochastic branch of a step is explored and
    its probability computed from the success parameters directly.
    """
    _check_oracle_scenario(config)
    env = Env(config, seed=0)
    n_actions = env.n_actions

    init_key = env.state_key()
    index: dict[tuple, int] = {init_key: 0}
    keys: list[tuple] = [init_key]
    # Witness path to each state: sequence of (action_id, forced outcome tuple).
    paths: dict[tuple, tuple] = {init_key: ()}
    legal_rows: list[np.ndarray] = [env.legal_action_mask()]
    terminal_flags: list[bool] = [False]

    t_src: list[int] = []
    t_act: list[int] = []
    t_prob: list[float] = []
    t_rew: list[float] = []
    t_dst: list[int] = []

    def goto(path: tuple) -> None:
        env.reset(0)
        for action_id, outcomes in path:
            env.state.draw_override = _ForcedDraws(outcomes)
            env.step(action_id)
        env.state.draw_override = None

    frontier = [init_key]
    while frontier:
        key = frontier.pop()
        s_idx = index[key]
        if terminal_flags[s_idx]:
            continue
        path = paths[key]
        for action_id in range(n_actions):
            if not legal_rows[s_idx][action_id]:
                continue
            # Explore the binary outcome tree of this (state, action).
            pending: list[tuple[bool, ...]] = [()]
            while pending:
                plan = pending.pop()
                goto(path)
                forcer = _ForcedDraws(plan)
                env.state.draw_override = forcer
                _, reward, terminated, truncated, _ = env.step(action_id)
                env.state.draw_override = None
                outcomes = tuple(o for _, o in forcer.drawn)
                for i in range(len(plan), len(outcomes)):
                    if outcomes[i]:  # a defaulted True; its False sibling is unexplored
                        pending.append(outcomes[:i] + (False,))
                next_key = env.state_key()
                if next_key not in index:
                    if len(keys) >= state_cap:
                        raise OracleExtractionError(
                            f"state cap exceeded ({state_cap}); scenario too large for exact enumeration"
                        )
                    index[next_key] = len(keys)
                    keys.append(next_key)
                    paths[next_key] = path + ((action_id, outcomes),)
                    legal_rows.append(env.legal_action_mask())
                    terminal_flags.append(bool(terminated or truncated))
                    frontier.append(next_key)
                d_idx = index[next_key]
                t_src.append(s_idx)
                t_act.append(action_id)
                t_prob.append(forcer.probability())
                t_rew.append(float(reward))
                t_dst.append(d_idx)

    # Terminal states become absorbing: every legal action self-loops, reward 0.
    for s_idx, is_terminal in enumerate(terminal_flags):
        if not is_terminal:
            continue
        for action_id in range(n_actions):
            if legal_rows[s_idx][action_id]:
                t_src.append(s_idx)
                t_act.append(action_id)
                t_prob.append(1.0)
                t_rew.append(0.0)
                t_dst.append(s_idx)

    return MdpModel(
        state_keys=keys,
        action_names=list(env.action_names),
        gamma=config.pomdp.gamma,
        legal=np.array(legal_rows, dtype=bool),
        terminal=np.array(terminal_flags, dtype=bool),
        t_src=np.array(t_src, dtype=np.int64),
        t_act=np.array(t_act, dtype=np.int64),
        t_prob=np.array(t_prob, dtype=np.float64),
        t_rew=np.array(t_rew, dtype=np.float64),
        t_dst=np.array(t_dst, dtype=np.int64),
    )


def bellman_backup(model: MdpModel, q: np.ndarray) -> np.ndarray:
    """One exact Bellman optimality backup of a Q-table."""
    v = np.where(model.legal, q, -np.inf).max(axis=1)
    v = np.where(np.isfinite(v), v, 0.0)
    out = np.zeros((model.n_states, model.n_actions))
    np.add.at(out, (model.t_src, model.t_act),
              model.t_prob * (model.t_rew + model.gamma * v[model.t_dst]))
    return out


def value_iteration(model: MdpModel, tol: float = 1e-8, max_iter: int = 100_000) -> np.ndarray:
    """Solve for Q* to sup-norm Bellman residual <= tol.

    Illegal state-action entries are NaN in the returned table.
    """
    q = np.zeros((model.n_states, model.n_actions))
    for _ in range(max_iter):
        q_next = bellman_backup(model, q)
        residual = np.abs(np.where(model.legal, q_next - q, 0.0)).max()
        q = q_next
        if residual <= tol:
            return np.where(model.legal, q, np.nan)
    raise ConvergenceError(f"value iteration did not reach tol={tol} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Tabular Q-learning


class QTable:
    """State-keyed action values with visit counts and a text serialization."""

    def __init__(self, n_actions: int, action_names: list[str] | None = None):
        self.n_actions = n_actions
        self.action_names = action_names or [str(i) for i in range(n_actions)]
        self.q: dict[tuple, np.ndarray] = {}
        self.visits: dict[tuple, np.ndarray] = {}

    def values(self, key: tuple) -> np.ndarray:
        row = self.q.get(key)
        if row is None:
            row = np.zeros(self.n_actions)
            self.q[key] = row
            self.visits[key] = np.zeros(self.n_actions, dtype=np.int64)
        return row

    def update(self, key: tuple, action: int, alpha: float, target: float) -> None:
        row = self.values(key)
        row[action] += alpha * (target - row[action])
        self.visits[key][action] += 1

    def greedy(self, key: tuple, mask) -> int:
        """Argmax over unmasked actions, lowest index winning ties."""
        row = self.q.get(key)
        best = -1
        best_value = -np.inf
        for i in range(self.n_actions):
            if not mask[i]:
                continue
            value = row[i] if row is not None else 0.0
            if value > best_value:
                best_value = value
                best = i
        return best

    def serialize(self) -> str:
        lines = ["# state\taction\tvalue"]
        for key in sorted(self.q):
            for a in range(self.n_actions):
                if self.visits[key][a] > 0:
                    state = ",".join(str(v) for v in key)
                    lines.append(f"{state}\t{a}\t{float(self.q[key][a])!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path, n_actions: int | None = None) -> QTable:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
        rows: list[tuple[tuple, int, float]] = []
        max_action = 0
        for line in lines:
            state_s, action_s, value_s = line.split("\t")
            key = tuple(int(v) for v in state_s.split(","))
            action = int(action_s)
            max_action = max(max_action, action)
            rows.append((key, action, float(value_s)))
        table = cls(n_actions or max_action + 1)
        for key, action, value in rows:
            table.values(key)[action] = value
            table.visits[key][action] = 1
        return table


@dataclass
class QLearningParams:
    """Documented schedules: alpha and epsilon decay linearly over episodes."""

    episodes: int = 20_000
    seed: int = 0
    alpha_start: float = 0.5
    alpha_end: float = 0.05
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    max_steps: int = 25
    gamma: float | None = None  # defaults to the scenario's gamma


def _lerp(a: float, b: float, frac: float) -> float:
    return a + (b - a) * frac


def train_q_learning(env: Env, params: QLearningParams) -> QTable:
    """One-step temporal-difference control with mask-respecting exploration.

    Fully seeded and bit-reproducible; episodes are truncated at max_steps
    with a bootstrapped target so the estimate stays the infinite-horizon
    discounted value.
    """
    gamma = params.gamma if params.gamma is not None else env.gamma
    rng = derive_rng(params.seed, "explore")
    table = QTable(env.n_actions, list(env.action_names))
    denom = max(params.episodes - 1, 1)
    for episode in range(params.episodes):
        frac = episode / denom
        alpha = _lerp(params.alpha_start, params.alpha_end, frac)
        epsilon = _lerp(params.epsilon_start, params.epsilon_end, frac)
        env.reset(derive_seed(params.seed, f"episode{episode}"))
        key = env.state_key()
        for _ in range(params.max_steps):
            mask = env.legal_action_mask()
            if epsilon > 0.0 and rng.random() < epsilon:
                candidates = np.flatnonzero(mask)
                action = int(candidates[rng.integers(len(candidates))])
            else:
                action = table.greedy(key, mask)
            _, reward, terminated, truncated, _ = env.step(action)
            next_key = env.state_key()
            if terminated:
                target = reward
            else:
                next_mask = env.legal_action_mask()
                next_row = table.values(next_key)
                target = reward + gamma * max(
                    next_row[i] for i in range(env.n_actions) if next_mask[i]
                )
            table.update(key, action, alpha, target)
            key = next_key
            if terminated or truncated:
                break
    return table


# ---------------------------------------------------------------------------
# Policies


@dataclass
class PolicyContext:
    """Env metadata a policy may need: layouts and per-host action indices."""

    action_names: list[str]
    host_order: list[str]
    flag_indices: dict[str, tuple[int, float]] = field(default_factory=dict)
    restore_indices: dict[str, int] = field(default_factory=dict)


@dataclass
class Policy:
    kind: str  # random | heuristic | greedy_q | scripted
    table: QTable | None = None
    sequence: list[int] | None = None
    ctx: PolicyContext | None = None
    cursor: int = 0

    def restart(self) -> None:
        self.cursor = 0


def build_context(env: Env) -> PolicyContext:
    layout = env.obs_layout()
    ctx = PolicyContext(list(env.action_names), list(env._host_order))
    for host in ctx.host_order:
        # The evidence feature for "this host needs attention", by sensor mode.
        for name, threshold in ((f"{host}.detected", 1.0),
                                (f"{host}.compromise", 1.0),
                                (f"{host}.red_stage", 2.0)):
            if name in layout:
                ctx.flag_indices[host] = (layout[name], threshold)
                break
        try:
            ctx.restore_indices[host] = ctx.action_names.index(f"restore:{host}")
        except ValueError:
            pass
    return ctx


def make_random_policy() -> Policy:
    return Policy("random")

def make_heuristic_policy(env: Env) -> Policy:
    return Policy("heuristic", ctx=build_context(env))

def make_greedy_policy(table: QTable) -> Policy:
    return Policy("greedy_q", table=table)

def make_scripted_policy(sequence: list[int]) -> Policy:
    return Policy("scripted", sequence=list(sequence))


def _obs_key(observation: Observation) -> tuple:
    return tuple(int(v) for v in observation.flat)


def policy_action(policy: Policy, observation: Observation, mask, rng) -> int:
    """Select an action id; always drawn from the unmasked set.

    random: uniform over unmasked. heuristic: restore the first host whose
    evidence flag is set, else pass. greedy_q: table argmax with lowest-index
    tie-break. scripted: next in sequence (error when exhausted).
    """
    if policy.kind == "random":
        candidates = np.flatnonzero(mask)
        return int(candidates[rng.integers(len(candidates))])
    if policy.kind == "heuristic":
        ctx = policy.ctx
        for host in ctx.host_order:
            flag = ctx.flag_indices.get(host)
            restore = ctx.restore_indices.get(host)
            if flag is None or restore is None:
                continue
            idx, threshold = flag
            if observation.flat[idx] >= threshold and mask[restore]:
                return restore
        return 0  # pass
    if policy.kind == "greedy_q":
        return policy.table.greedy(_obs_key(observation), mask)
    if policy.kind == "scripted":
        if policy.sequence is None or policy.cursor >= len(policy.sequence):
            raise ScriptExhaustedError(f"scripted policy exhausted after {policy.cursor} actions")
        action = policy.sequence[policy.cursor]
        policy.cursor += 1
        return int(action)
    raise ValueError(f"unknown policy kind {policy.kind!r}")
