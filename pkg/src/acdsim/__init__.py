"""acdsim: a discrete-event network-defence simulator with a POMDP interface.

The package is organised by layer: `netsim` owns ground truth and the event
calendar, `actors` the red/green behaviour models, `taskmodel` the agent
interface (observations, actions, rewards, episodes), `rlcore` the baseline
learners and exact oracles, `evalharness` multi-seed evaluation statistics,
and `scenario_io`/`protocol`/`cli` the declarative configuration, wire
protocol and command line.
"""

from __future__ import annotations

from importlib import resources

from .scenario_io import (
    ScenarioConfig,
    ScenarioError,
    load_scenario,
    parse_scenario,
    scenario_hash,
    serialize_scenario,
)
from .netsim import (
    ConstructionError,
    Event,
    EventCalendar,
    Host,
    NetworkState,
    SchedulingError,
    TruthRecord,
    advance_until,
    build_network,
    derive_rng,
    derive_seed,
    schedule_event,
    snapshot_truth,
    trace_lines,
)
from .taskmodel import (
    Env,
    EpisodeOverError,
    InvalidActionError,
    Observation,
    compute_reward,
    encode_observation,
    env_reset,
    env_step,
    legal_action_mask,
    resolve_action,
)

__version__ = "0.1.0"

BUNDLED_SCENARIOS = (
    "mvp-2host",
    "mvp-2host-oracle",
    "mvp-2host-stopping",
    "mvp-2host-sparse",
    "no-red",
    "two-subnet-noisy",
)


def scenario_text(name: str) -> str:
    """Raw YAML text of a bundled scenario, by its metadata name."""
    filename = name.replace("-", "_") + ".yaml"
    return resources.files("acdsim.scenarios").joinpath(filename).read_text("utf-8")


def load_bundled(name: str) -> ScenarioConfig:
    """Parse one of the scenarios shipped with the package."""
    return parse_scenario(scenario_text(name))
