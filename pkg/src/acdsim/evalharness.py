"""Multi-seed evaluation: returns, confidence intervals, system-level metrics.

Behaviour metrics (attack counts, action distribution, availability,
compromised-step fraction) are computed from ground-truth traces, which is
legitimate on the evaluation side and keeps them structurally disjoint from
the reward pathway the agent optimises.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rlcore
from .netsim import derive_rng, derive_seed
from .scenario_io import ScenarioConfig, scenario_hash
from .taskmodel import Env

CSV_COLUMNS = (
    "seed", "episode", "env_seed", "return", "discounted_return", "length",
    "terminated", "truncated", "compromised_step_fraction", "availability_mean",
    "red_events",
)


@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    env_seed: int
    ret: float
    discounted: float
    length: int
    terminated: bool
    truncated: bool
    compromised_step_fraction: float
    availability_mean: float
    red_events: int


@dataclass
class RunSummary:
    scenario_name: str
    scenario_hash: str
    seeds: list[int]
    episodes_per_seed: int
    records: list[EpisodeRecord]
    returns_by_seed: dict[int, list[float]]
    mean_return: float
    std_return: float
    ci_low: float
    ci_high: float
    ci_method: str
    degenerate_ci: bool
    action_distribution: dict[str, float]
    attack_counts: dict[str, dict[str, int]]  # host -> event kind -> count
    void_red_events: int
    compromised_step_fraction: float
    availability_mean: float
    episode_length_mean: float
    episode_length_min: int
    episode_length_max: int

    def to_json(self) -> str:
        doc = {
            "scenario_name": self.scenario_name,
            "scenario_hash": self.scenario_hash,
            "seeds": self.seeds,
            "episodes_per_seed": self.episodes_per_seed,
            "mean_return": self.mean_return,
            "std_return": self.std_return,
            "ci": [self.ci_low, self.ci_high],
            "ci_method": self.ci_method,
            "degenerate_ci": self.degenerate_ci,
            "action_distribution": self.action_distribution,
            "attack_counts": self.attack_counts,
            "void_red_events": self.void_red_events,
            "compromised_step_fraction": self.compromised_step_fraction,
            "availability_mean": self.availability_mean,
            "episode_length": {
                "mean": self.episode_length_mean,
                "min": self.episode_length_min,
                "max": self.episode_length_max,
            },
            "returns_by_seed": {str(s): r for s, r in self.returns_by_seed.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def confidence_interval(samples, level: float = 0.95, method: str = "t",
                        n_resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """CI of the mean: Student t, or a seeded bootstrap percentile interval."""
    data = np.asarray(list(samples), dtype=float)
    n = len(data)
    if method == "t":
        if n < 2:
            raise ValueError("t interval requires at least 2 samples")
        mean = data.mean()
        sem = data.std(ddof=1) / math.sqrt(n)
        if sem == 0.0:
            return (float(mean), float(mean))
        margin = stats.t.ppf(0.5 + level / 2.0, n - 1) * sem
        return (float(mean - margin), float(mean + margin))
    if method == "bootstrap":
        if n < 1:
            raise ValueError("bootstrap requires at least 1 sample")
        rng = derive_rng(seed, "bootstrap")
        idx = rng.integers(0, n, size=(n_resamples, n))
        means = data[idx].mean(axis=1)
        lo, hi = np.quantile(means, [0.5 - level / 2.0, 0.5 + level / 2.0])
        return (float(lo), float(hi))
    raise ValueError(f"unknown CI method {method!r}")


def run_episodes(policy: rlcore.Policy, config: ScenarioConfig, seeds: list[int],
                 episodes_per_seed: int = 1, max_steps: int | None = None,
                 ci_method: str = "t") -> RunSummary:
    """Evaluate a policy over seeds x episodes; deterministic given its inputs.

    max_steps is a harness-level safety cap for terminal/continuing horizons;
    it never sets the environment's truncated flag. Continuing horizons
    default the cap to the scenario's eval_window.
    """
    if not seeds:
        raise ValueError("at least one seed required")
    if max_steps is None:
        horizon = config.pomdp.horizon
        if horizon.kind == "fixed":
            max_steps = horizon.steps
        else:
            max_steps = horizon.eval_window

    env = Env(config)
    records: list[EpisodeRecord] = []
    action_counts = {name: 0 for name in env.action_names}
    attack_counts: dict[str, dict[str, int]] = {h: {} for h in config.host_ids()}
    void_red = 0
    gamma = config.pomdp.gamma

    for seed in seeds:
        for episode in range(episodes_per_seed):
            env_seed = derive_seed(seed, f"episode{episode}")
            policy_rng = derive_rng(env_seed, "policy")
            if policy.kind == "scripted":
                policy.restart()
            obs = env.reset(env_seed)
            rewards: list[float] = []
            compromised_steps = 0
            availability: list[float] = []
            terminated = truncated = False
            for _ in range(max_steps):
                mask = env.legal_action_mask()
                action = rlcore.policy_action(policy, obs, mask, policy_rng)
                action_counts[env.action_names[action]] += 1
                obs, reward, terminated, truncated, _ = env.step(action)
                rewards.append(reward)
                truth = env.truth()
                if any(t.compromise != "none" for t in truth.hosts.values()):
                    compromised_steps += 1
                availability.append(
                    sum(t.availability for t in truth.hosts.values()) / len(truth.hosts)
                )
                if terminated or truncated:
                    break
            for event in env.episode_trace():
                if event.source == "red" and event.kind != "service_tick":
                    if event.void:
                        void_red += 1
                    else:
                        host_counts = attack_counts[event.subject]
                        host_counts[event.kind] = host_counts.get(event.kind, 0) + 1
            length = len(rewards)
            records.append(EpisodeRecord(
                seed=seed,
                episode=episode,
                env_seed=env_seed,
                ret=float(sum(rewards)),
                discounted=rlcore.discounted_return(rewards, gamma),
                length=length,
                terminated=terminated,
                truncated=truncated,
                compromised_step_fraction=compromised_steps / length if length else 0.0,
                availability_mean=float(np.mean(availability)) if availability else 1.0,
                red_events=sum(
                    1 for e in env.episode_trace()
                    if e.source == "red" and e.kind != "service_tick" and not e.void
                ),
            ))

    returns_by_seed: dict[int, list[float]] = {s: [] for s in seeds}
    for rec in records:
        returns_by_seed[rec.seed].append(rec.ret)
    per_seed_means = [float(np.mean(returns_by_seed[s])) for s in seeds]
    all_returns = [rec.ret for rec in records]
    mean_return = float(np.mean(all_returns))
    std_return = float(np.std(all_returns, ddof=1)) if len(all_returns) > 1 else 0.0

    degenerate = len(per_seed_means) < 2
    if degenerate:
        ci_low = ci_high = mean_return
    elif ci_method == "t":
        ci_low, ci_high = confidence_interval(per_seed_means, 0.95, "t")
    else:
        ci_low, ci_high = confidence_interval(per_seed_means, 0.95, "bootstrap", seed=seeds[0])

    total_actions = sum(action_counts.values())
    action_distribution = {
        name: count / total_actions for name, count in action_counts.items()
    } if total_actions else {name: 0.0 for name in action_counts}

    lengths = [rec.length for rec in records]
    return RunSummary(
        scenario_name=config.metadata.name,
        scenario_hash=scenario_hash(config),
        seeds=list(seeds),
        episodes_per_seed=episodes_per_seed,
        records=records,
        returns_by_seed=returns_by_seed,
        mean_return=mean_return,
        std_return=std_return,
        ci_low=ci_low,
        ci_high=ci_high,
        ci_method=ci_method,
        degenerate_ci=degenerate,
        action_distribution=action_distribution,
        attack_counts=attack_counts,
        void_red_events=void_red,
        compromised_step_fraction=float(np.mean([r.compromised_step_fraction for r in records])),
        availability_mean=float(np.mean([r.availability_mean for r in records])),
        episode_length_mean=float(np.mean(lengths)),
        episode_length_min=min(lengths),
        episode_length_max=max(lengths),
    )


def summary_csv(summary: RunSummary) -> str:
    """One row per (seed, episode); column names are fixed and documented."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_COLUMNS)
    for rec in summary.records:
        writer.writerow([
            rec.seed, rec.episode, rec.env_seed, repr(rec.ret), repr(rec.discounted),
            rec.length, int(rec.terminated), int(rec.truncated),
            repr(rec.compromised_step_fraction), repr(rec.availability_mean),
            rec.red_events,
        ])
    return out.getvalue()


def write_csv(summary: RunSummary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_csv(summary))


@dataclass
class ComparisonReport:
    name_a: str
    name_b: str
    mean_a: float
    mean_b: float
    mean_difference: float
    ci_a: tuple[float, float]
    ci_b: tuple[float, float]
    ci_overlap: bool
    behavioural_divergence: bool
    action_distribution_distance: float
    action_rows: list[tuple[str, float, float]]
    attack_rows: list[tuple[str, str, int, int]]
    availability: tuple[float, float]

    def to_text(self) -> str:
        lines = [
            f"policy comparison: {self.name_a} vs {self.name_b}",
            f"  mean return       {self.mean_a:>12.4f} {self.mean_b:>12.4f}   diff {self.mean_difference:+.4f}",
            f"  95% CI            [{self.ci_a[0]:.4f}, {self.ci_a[1]:.4f}]  [{self.ci_b[0]:.4f}, {self.ci_b[1]:.4f}]"
            f"   overlap={'yes' if self.ci_overlap else 'no'}",
            f"  availability      {self.availability[0]:>12.4f} {self.availability[1]:>12.4f}",
            f"  behavioural divergence: {'yes' if self.behavioural_divergence else 'no'}"
            f" (action distribution L1 distance {self.action_distribution_distance:.4f})",
            "",
            f"  {'action':<20} {'freq_a':>8} {'freq_b':>8}",
        ]
        for name, fa, fb in self.action_rows:
            lines.append(f"  {name:<20} {fa:>8.4f} {fb:>8.4f}")
        lines.append("")
        lines.append(f"  {'host':<12} {'attack':<16} {'count_a':>8} {'count_b':>8}")
        for host, kind, ca, cb in self.attack_rows:
            lines.append(f"  {host:<12} {kind:<16} {ca:>8} {cb:>8}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["metric", "key", self.name_a, self.name_b])
        writer.writerow(["mean_return", "", repr(self.mean_a), repr(self.mean_b)])
        writer.writerow(["ci_low", "", repr(self.ci_a[0]), repr(self.ci_b[0])])
        writer.writerow(["ci_high", "", repr(self.ci_a[1]), repr(self.ci_b[1])])
        writer.writerow(["ci_overlap", "", int(self.ci_overlap), int(self.ci_overlap)])
        writer.writerow(["availability", "", repr(self.availability[0]), repr(self.availability[1])])
        for name, fa, fb in self.action_rows:
            writer.writerow(["action_frequency", name, repr(fa), repr(fb)])
        for host, kind, ca, cb in self.attack_rows:
            writer.writerow(["attack_count", f"{host}/{kind}", ca, cb])
        return out.getvalue()


def compare_policies(summary_a: RunSummary, summary_b: RunSummary,
                     name_a: str = "a", name_b: str = "b") -> ComparisonReport:
    """Side-by-side report; requires the same scenario and seed protocol."""
    if summary_a.scenario_hash != summary_b.scenario_hash:
        raise ValueError("summaries come from different scenarios (hash mismatch)")
    if summary_a.seeds != summary_b.seeds or summary_a.episodes_per_seed != summary_b.episodes_per_seed:
        raise ValueError("summaries use different seed protocols")
    overlap = not (summary_a.ci_low > summary_b.ci_high or summary_b.ci_low > summary_a.ci_high)
    names = sorted(set(summary_a.action_distribution) | set(summary_b.action_distribution))
    action_rows = [
        (n, summary_a.action_distribution.get(n, 0.0), summary_b.action_distribution.get(n, 0.0))
        for n in names
    ]
    l1 = sum(abs(fa - fb) for _, fa, fb in action_rows)
    attack_rows: list[tuple[str, str, int, int]] = []
    hosts = sorted(set(summary_a.attack_counts) | set(summary_b.attack_counts))
    for host in hosts:
        kinds = sorted(set(summary_a.attack_counts.get(host, {}))
                       | set(summary_b.attack_counts.get(host, {})))
        for kind in kinds:
            attack_rows.append((
                host, kind,
                summary_a.attack_counts.get(host, {}).get(kind, 0),
                summary_b.attack_counts.get(host, {}).get(kind, 0),
            ))
    return ComparisonReport(
        name_a=name_a,
        name_b=name_b,
        mean_a=summary_a.mean_return,
        mean_b=summary_b.mean_return,
        mean_difference=summary_a.mean_return - summary_b.mean_return,
        ci_a=(summary_a.ci_low, summary_a.ci_high),
        ci_b=(summary_b.ci_low, summary_b.ci_high),
        ci_overlap=overlap,
        behavioural_divergence=l1 > 0.01,
        action_distribution_distance=l1,
        action_rows=action_rows,
        attack_rows=attack_rows,
        availability=(summary_a.availability_mean, summary_b.availability_mean),
    )
