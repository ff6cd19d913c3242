"""Command line: validate, run, train, eval, serve.

Every subcommand exits nonzero on any error. The ACDSIM_LOG environment
variable sets log verbosity (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import evalharness, rlcore
from .protocol import OracleRefusedError, protocol_serve
from .scenario_io import ScenarioError, load_scenario
from .taskmodel import Env

log = logging.getLogger("acdsim.cli")


def _parse_seeds(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part != ""]


def _load(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    from .scenario_io import parse_scenario
    return parse_scenario(text)


def _build_policy(spec: str, config) -> rlcore.Policy:
    if spec == "random":
        return rlcore.make_random_policy()
    if spec == "heuristic":
        return rlcore.make_heuristic_policy(Env(config))
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        with open(path, "r", encoding="utf-8") as fh:
            actions = json.load(fh)
        if not isinstance(actions, list):
            raise ValueError("scripted policy file must hold a JSON list of action ids or names")
        names = Env(config).action_names
        ids = [a if isinstance(a, int) else names.index(a) for a in actions]
        return rlcore.make_scripted_policy(ids)
    raise ValueError(f"unknown policy {spec!r} (expected random, heuristic or scripted:<file>)")


def cmd_validate(args) -> int:
    try:
        config = _load(args.file)
    except ScenarioError as exc:
        print(f"{args.file}: {len(exc.issues)} problem(s)", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return 1
    print(f"{args.file}: OK ({config.metadata.name}, "
          f"{len(config.topology.hosts)} hosts, {len(config.pomdp.actions)} action families)")
    return 0


def cmd_run(args) -> int:
    config = _load(args.file)
    policy = _build_policy(args.policy, config)
    summary = evalharness.run_episodes(
        policy, config, _parse_seeds(args.seeds), args.episodes, max_steps=args.max_steps,
    )
    if args.out:
        evalharness.write_csv(summary, args.out)
        log.info("wrote %s", args.out)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(summary.to_json() + "\n")
    print(f"{summary.scenario_name}: mean return {summary.mean_return:.4f} "
          f"(95% CI [{summary.ci_low:.4f}, {summary.ci_high:.4f}]) over "
          f"{len(summary.seeds)} seeds x {summary.episodes_per_seed} episodes")
    return 0


def cmd_train(args) -> int:
    if args.algo != "q":
        raise ValueError(f"unknown algorithm {args.algo!r} (only 'q' is available)")
    config = _load(args.file)
    overrides = {}
    if args.params:
        for pair in args.params.split(","):
            key, _, value = pair.partition("=")
            overrides[key.strip()] = value.strip()
    params = rlcore.QLearningParams(
        episodes=int(overrides.get("episodes", 20_000)),
        seed=int(overrides.get("seed", 0)),
        alpha_start=float(overrides.get("alpha_start", 0.5)),
        alpha_end=float(overrides.get("alpha_end", 0.05)),
        epsilon_start=float(overrides.get("epsilon_start", 1.0)),
        epsilon_end=float(overrides.get("epsilon_end", 0.05)),
        max_steps=int(overrides.get("max_steps", 25)),
    )
    env = Env(config)
    table = rlcore.train_q_learning(env, params)
    table.save(args.out)
    print(f"trained {params.episodes} episodes (seed {params.seed}); "
          f"{len(table.q)} states visited; table written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    config = _load(args.file)
    table = rlcore.QTable.load(args.qtable, n_actions=len(Env(config).action_names))
    trained = rlcore.make_greedy_policy(table)
    baseline = _build_policy(args.baseline, config)
    seeds = _parse_seeds(args.seeds)
    summary_t = evalharness.run_episodes(trained, config, seeds, args.episodes, max_steps=args.max_steps)
    summary_b = evalharness.run_episodes(baseline, config, seeds, args.episodes, max_steps=args.max_steps)
    report = evalharness.compare_policies(summary_t, summary_b, "trained", args.baseline)
    print(report.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    return 0


def cmd_serve(args) -> int:
    config = _load(args.file)
    protocol_serve(config, args.transport, allow_oracle=args.allow_oracle)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acdsim",
        description="Discrete-event network-defence simulator with a POMDP interface.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file against the schema")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="evaluate a policy over seeds and episodes")
    p.add_argument("file")
    p.add_argument("--policy", default="random",
                   help="random | heuristic | scripted:<json file>")
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--episodes", type=int, default=1, help="episodes per seed")
    p.add_argument("--max-steps", type=int, default=None, help="harness step cap")
    p.add_argument("--out", default=None, help="per-episode CSV path")
    p.add_argument("--summary", default=None, help="summary JSON path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="train a tabular Q-learning policy")
    p.add_argument("file")
    p.add_argument("--algo", default="q")
    p.add_argument("--params", default="", help="comma-separated key=value overrides")
    p.add_argument("--out", required=True, help="Q-table output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare a trained Q-table against a baseline")
    p.add_argument("file")
    p.add_argument("--qtable", required=True)
    p.add_argument("--baseline", default="random")
    p.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--out", default=None, help="comparison CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="serve the wire protocol for external trainers")
    p.add_argument("file")
    p.add_argument("--transport", default="stdio", help="stdio or tcp:<port>")
    p.add_argument("--allow-oracle", action="store_true",
                   help="permit omniscient_oracle sensor scenarios (test profiles only)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("ACDSIM_LOG", "WARNING").upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("scenario error:", file=sys.stderr)
        for issue in exc.issues:
            print(f"  {issue}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, OracleRefusedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
