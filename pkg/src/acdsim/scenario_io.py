"""Declarative scenario configuration: schema, validation, serialization.

Scenario files are YAML documents with a strict schema: unknown fields are
rejected, cross-references must resolve, and validation collects *all*
problems (with field paths and source lines where available) instead of
failing on the first one.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields as dc_fields

import yaml

SCHEMA_VERSION = 1

ROLES = ("workstation", "server", "critical_server")
RED_MODES = ("deterministic", "stochastic", "switching")
TARGETINGS = ("fixed_path", "random_reachable", "prefer_critical")
STAGES = ("discover", "exploit", "escalate", "impact")
SENSOR_MODES = ("realistic", "omniscient_oracle")
REALISTIC_FIELDS = ("role", "detected", "alert_count", "quarantined")
OMNISCIENT_FIELDS = ("role", "compromise", "quarantined", "red_stage")
ACTION_FAMILIES = ("pass", "scan", "restore", "quarantine", "release", "stop")
PRECONDITION_NAMES = ("always", "detected", "not_detected", "quarantined", "not_quarantined")
REWARD_KINDS = ("dense_default", "sparse", "optimal_stopping")
HORIZON_KINDS = ("fixed", "terminal", "continuing")
SEQUENCE_MODES = ("fixed_tick", "action_duration")
INTERLEAVINGS = ("turn_based", "concurrent")
ACTOR_ORDER_NAMES = ("red", "green")

# Default precondition lists per action family, over observation-visible facts.
DEFAULT_PRECONDITIONS = {
    "pass": ("always",),
    "scan": ("always",),
    "restore": ("detected",),
    "quarantine": ("detected", "not_quarantined"),
    "release": ("quarantined",),
    "stop": ("always",),
}


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        loc = f"{self.path}" + (f" (line {self.line})" if self.line else "")
        return f"{loc}: {self.message}"


class ScenarioError(Exception):
    """Raised when a scenario document fails validation.

    Carries the full list of issues found, not just the first.
    """

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


@dataclass(frozen=True)
class HostConfig:
    id: str
    subnet: str
    role: str
    services: tuple[str, ...]


@dataclass(frozen=True)
class TopologyConfig:
    subnets: tuple[str, ...]
    services: tuple[str, ...]
    hosts: tuple[HostConfig, ...]
    adjacency: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class RedStrategyConfig:
    mode: str = "deterministic"
    targeting: str = "fixed_path"
    stage_delays: dict[str, float] = field(
        default_factory=lambda: {s: 10.0 for s in STAGES}
    )
    jitter: float = 0.0
    success_probs: dict[str, float] = field(
        default_factory=lambda: {s: 1.0 for s in STAGES}
    )
    switch_prob: float = 0.0
    stealth: float = 0.0
    entry_subnet: str | None = None


@dataclass(frozen=True)
class GreenProfileConfig:
    rates_per_hour: dict[str, float] = field(default_factory=dict)
    service_weights: dict[str, float] = field(default_factory=dict)
    anomaly_prob: float = 0.0


@dataclass(frozen=True)
class SensorConfig:
    mode: str = "realistic"
    detection_prob: float = 1.0
    false_positive_prob: float = 0.0
    report_delay: float = 0.0
    fields: tuple[str, ...] = REALISTIC_FIELDS


@dataclass(frozen=True)
class ActionFamilyConfig:
    name: str
    duration: float = 5.0
    success_prob: float = 1.0
    cost: float = 0.0
    preconditions: tuple[str, ...] | None = None

    def effective_preconditions(self) -> tuple[str, ...]:
        if self.preconditions is not None:
            return self.preconditions
        return DEFAULT_PRECONDITIONS[self.name]


@dataclass(frozen=True)
class RewardConfig:
    kind: str = "dense_default"
    compromised_penalty: float = -2.0
    restore_cost: float = -1.0
    pass_bonus: float = 0.1
    role_weights: dict[str, float] = field(
        default_factory=lambda: {r: 1.0 for r in ROLES}
    )
    terminal_penalty: float = -100.0
    false_stop_cost: float = -10.0
    missed_step_cost: float = -1.0


@dataclass(frozen=True)
class HorizonConfig:
    kind: str = "fixed"
    steps: int = 30
    eval_window: int = 100


@dataclass(frozen=True)
class SequenceConfig:
    mode: str = "fixed_tick"
    dt: float = 10.0


@dataclass(frozen=True)
class InterleavingConfig:
    kind: str = "concurrent"
    order: tuple[str, ...] = ("red", "green")


@dataclass(frozen=True)
class PomdpSpecConfig:
    gamma: float = 0.9
    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    interleaving: InterleavingConfig = field(default_factory=InterleavingConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    actions: tuple[ActionFamilyConfig, ...] = ()
    reward: RewardConfig = field(default_factory=RewardConfig)
    default_seed: int = 0
    # Strict masking raises on a masked action; the lenient flag downgrades
    # it to a flagged no-op for trainers that cannot consume masks.
    lenient_mask: bool = False


@dataclass(frozen=True)
class MetadataConfig:
    name: str
    problem: str
    description: str = ""


@dataclass(frozen=True)
class ScenarioConfig:
    schema_version: int
    metadata: MetadataConfig
    topology: TopologyConfig
    red: RedStrategyConfig
    green: GreenProfileConfig
    pomdp: PomdpSpecConfig

    def host_ids(self) -> list[str]:
        return [h.id for h in self.topology.hosts]


# ---------------------------------------------------------------------------
# YAML line tracking


def _line_map(text: str) -> dict[str, int]:
    """Map dotted field paths to 1-based source lines."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[str, int] = {}

    def walk(node, path: str) -> None:
        if node is None:
            return
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = str(k.value)
                walk(v, f"{path}.{key}" if path else key)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{path}[{i}]")

    walk(root, "")
    return lines


class _Checker:
    """Accumulates validation issues while walking the raw document."""

    def __init__(self, lines: dict[str, int]):
        self.lines = lines
        self.issues: list[ValidationIssue] = []

    def add(self, path: str, message: str) -> None:
        line = self.lines.get(path) or self.lines.get(path.rsplit(".", 1)[0])
        self.issues.append(ValidationIssue(path, message, line))

    def section(self, raw: dict, path: str, allowed: set[str]) -> None:
        for key in raw:
            if key not in allowed:
                self.add(f"{path}.{key}" if path else key, "unknown field")

    def number(self, raw, path, lo=None, hi=None, default=None):
        name = path.split(".")[-1]
        value = raw.get(name, default)
        if value is None:
            return default
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            self.add(path, "must be a number")
            return default
        if lo is not None and value < lo:
            self.add(path, f"must be >= {lo}")
        if hi is not None and value > hi:
            self.add(path, f"must be <= {hi}")
        return float(value)

    def string(self, raw, path, choices=None, default=None, required=False):
        name = path.split(".")[-1]
        value = raw.get(name)
        if value is None:
            if required:
                self.add(path, "required field missing")
            return default
        if not isinstance(value, str) or not value:
            self.add(path, "must be a non-empty string")
            return default
        if choices is not None and value not in choices:
            self.add(path, f"must be one of {sorted(choices)}")
            return default
        return value


def _parse_topology(raw, check: _Checker) -> TopologyConfig:
    path = "topology"
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        return TopologyConfig((), (), ())
    check.section(raw, path, {"subnets", "services", "hosts", "adjacency"})

    subnets = raw.get("subnets") or []
    if not isinstance(subnets, list) or not all(isinstance(s, str) and s for s in subnets):
        check.add(f"{path}.subnets", "must be a list of non-empty strings")
        subnets = []
    if len(set(subnets)) != len(subnets):
        check.add(f"{path}.subnets", "duplicate subnet id")

    services = raw.get("services") or []
    if not isinstance(services, list) or not all(isinstance(s, str) and s for s in services):
        check.add(f"{path}.services", "must be a list of non-empty strings")
        services = []
    if len(set(services)) != len(services):
        check.add(f"{path}.services", "duplicate service id")

    hosts_raw = raw.get("hosts")
    hosts: list[HostConfig] = []
    if not isinstance(hosts_raw, list) or not hosts_raw:
        check.add(f"{path}.hosts", "empty topology: at least one host required")
    else:
        seen: set[str] = set()
        for i, h in enumerate(hosts_raw):
            hp = f"{path}.hosts[{i}]"
            if not isinstance(h, dict):
                check.add(hp, "must be a mapping")
                continue
            check.section(h, hp, {"id", "subnet", "role", "services"})
            hid = check.string(h, f"{hp}.id", required=True)
            subnet = check.string(h, f"{hp}.subnet", required=True)
            role = check.string(h, f"{hp}.role", choices=set(ROLES), required=True)
            hsvcs = h.get("services") or []
            if not isinstance(hsvcs, list):
                check.add(f"{hp}.services", "must be a list")
                hsvcs = []
            for s in hsvcs:
                if s not in services:
                    check.add(f"{hp}.services", f"unknown service '{s}'")
            if hid is None:
                continue
            if hid in seen:
                check.add(f"{hp}.id", f"duplicate host id '{hid}'")
            seen.add(hid)
            if subnet is not None and subnet not in subnets:
                check.add(f"{hp}.subnet", f"unknown subnet '{subnet}'")
            hosts.append(HostConfig(hid, subnet or "", role or "workstation", tuple(hsvcs)))

    adjacency: list[tuple[str, str]] = []
    adj_raw = raw.get("adjacency") or []
    if not isinstance(adj_raw, list):
        check.add(f"{path}.adjacency", "must be a list of [subnet, subnet] pairs")
        adj_raw = []
    for i, pair in enumerate(adj_raw):
        ap = f"{path}.adjacency[{i}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            check.add(ap, "must be a [subnet, subnet] pair")
            continue
        a, b = pair
        for end in (a, b):
            if end not in subnets:
                check.add(ap, f"dangling reference: unknown subnet '{end}'")
        adjacency.append((str(a), str(b)))

    return TopologyConfig(tuple(subnets), tuple(services), tuple(hosts), tuple(adjacency))


def _parse_red(raw, check: _Checker, topology: TopologyConfig) -> RedStrategyConfig:
    path = "red"
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        raw = {}
    check.section(raw, path, {
        "mode", "targeting", "stage_delays", "jitter", "success_probs",
        "switch_prob", "stealth", "entry_subnet",
    })
    mode = check.string(raw, f"{path}.mode", choices=set(RED_MODES), default="deterministic")
    targeting = check.string(raw, f"{path}.targeting", choices=set(TARGETINGS), default="fixed_path")

    delays = dict(RedStrategyConfig().stage_delays)
    d_raw = raw.get("stage_delays") or {}
    if not isinstance(d_raw, dict):
        check.add(f"{path}.stage_delays", "must be a mapping of stage to seconds")
        d_raw = {}
    for k, v in d_raw.items():
        kp = f"{path}.stage_delays.{k}"
        if k not in STAGES:
            check.add(kp, f"unknown stage (expected one of {list(STAGES)})")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            check.add(kp, "must be a number > 0")
            continue
        delays[k] = float(v)

    probs = dict(RedStrategyConfig().success_probs)
    p_raw = raw.get("success_probs") or {}
    if not isinstance(p_raw, dict):
        check.add(f"{path}.success_probs", "must be a mapping of stage to probability")
        p_raw = {}
    for k, v in p_raw.items():
        kp = f"{path}.success_probs.{k}"
        if k not in STAGES:
            check.add(kp, f"unknown stage (expected one of {list(STAGES)})")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not (0.0 <= v <= 1.0):
            check.add(kp, "must be a probability in [0, 1]")
            continue
        probs[k] = float(v)

    jitter = check.number(raw, f"{path}.jitter", lo=0.0, hi=1.0, default=0.0)
    switch_prob = check.number(raw, f"{path}.switch_prob", lo=0.0, hi=1.0, default=0.0)
    stealth = check.number(raw, f"{path}.stealth", lo=0.0, hi=1.0, default=0.0)
    entry = check.string(raw, f"{path}.entry_subnet")
    if entry is not None and entry not in topology.subnets:
        check.add(f"{path}.entry_subnet", f"dangling reference: unknown subnet '{entry}'")

    if mode == "deterministic":
        if jitter:
            check.add(f"{path}.jitter", "deterministic mode requires jitter 0")
        if targeting == "random_reachable":
            check.add(f"{path}.targeting", "deterministic mode cannot use random_reachable")
        if stealth not in (0.0, 1.0):
            check.add(f"{path}.stealth", "deterministic mode requires stealth 0 or 1")
    if mode != "switching" and switch_prob:
        check.add(f"{path}.switch_prob", "only meaningful in switching mode; must be 0")

    return RedStrategyConfig(
        mode=mode or "deterministic",
        targeting=targeting or "fixed_path",
        stage_delays=delays,
        jitter=jitter or 0.0,
        success_probs=probs,
        switch_prob=switch_prob or 0.0,
        stealth=stealth or 0.0,
        entry_subnet=entry,
    )


def _parse_green(raw, check: _Checker, topology: TopologyConfig) -> GreenProfileConfig:
    path = "green"
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        raw = {}
    check.section(raw, path, {"rates_per_hour", "service_weights", "anomaly_prob"})
    rates: dict[str, float] = {}
    r_raw = raw.get("rates_per_hour") or {}
    if not isinstance(r_raw, dict):
        check.add(f"{path}.rates_per_hour", "must be a mapping of host id to rate")
        r_raw = {}
    host_ids = {h.id for h in topology.hosts}
    for k, v in r_raw.items():
        kp = f"{path}.rates_per_hour.{k}"
        if k not in host_ids:
            check.add(kp, f"dangling reference: unknown host '{k}'")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            check.add(kp, "must be a number >= 0")
            continue
        rates[k] = float(v)
    weights: dict[str, float] = {}
    w_raw = raw.get("service_weights") or {}
    if not isinstance(w_raw, dict):
        check.add(f"{path}.service_weights", "must be a mapping of service to weight")
        w_raw = {}
    for k, v in w_raw.items():
        kp = f"{path}.service_weights.{k}"
        if k not in topology.services:
            check.add(kp, f"dangling reference: unknown service '{k}'")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            check.add(kp, "must be a number >= 0")
            continue
        weights[k] = float(v)
    anomaly = check.number(raw, f"{path}.anomaly_prob", lo=0.0, hi=1.0, default=0.0)
    return GreenProfileConfig(rates, weights, anomaly or 0.0)


def _parse_pomdp(raw, check: _Checker) -> PomdpSpecConfig:
    path = "pomdp"
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        raw = {}
    check.section(raw, path, {
        "gamma", "horizon", "sequence", "interleaving", "sensor", "actions",
        "reward", "default_seed", "lenient_mask",
    })
    gamma = check.number(raw, f"{path}.gamma", lo=0.0, hi=1.0, default=0.9)

    h_raw = raw.get("horizon") or {}
    if not isinstance(h_raw, dict):
        check.add(f"{path}.horizon", "must be a mapping")
        h_raw = {}
    check.section(h_raw, f"{path}.horizon", {"kind", "steps", "eval_window"})
    h_kind = check.string(h_raw, f"{path}.horizon.kind", choices=set(HORIZON_KINDS), default="fixed")
    steps = h_raw.get("steps", 30)
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
        check.add(f"{path}.horizon.steps", "must be an integer >= 1")
        steps = 30
    eval_window = h_raw.get("eval_window", 100)
    if not isinstance(eval_window, int) or isinstance(eval_window, bool) or eval_window < 1:
        check.add(f"{path}.horizon.eval_window", "must be an integer >= 1")
        eval_window = 100
    horizon = HorizonConfig(h_kind or "fixed", steps, eval_window)

    s_raw = raw.get("sequence") or {}
    if not isinstance(s_raw, dict):
        check.add(f"{path}.sequence", "must be a mapping")
        s_raw = {}
    check.section(s_raw, f"{path}.sequence", {"mode", "dt"})
    s_mode = check.string(s_raw, f"{path}.sequence.mode", choices=set(SEQUENCE_MODES), default="fixed_tick")
    dt = check.number(s_raw, f"{path}.sequence.dt", default=10.0)
    if dt is not None and dt <= 0:
        check.add(f"{path}.sequence.dt", "must be > 0")
        dt = 10.0
    sequence = SequenceConfig(s_mode or "fixed_tick", dt or 10.0)

    i_raw = raw.get("interleaving") or {}
    if not isinstance(i_raw, dict):
        check.add(f"{path}.interleaving", "must be a mapping")
        i_raw = {}
    check.section(i_raw, f"{path}.interleaving", {"kind", "order"})
    i_kind = check.string(i_raw, f"{path}.interleaving.kind", choices=set(INTERLEAVINGS), default="concurrent")
    order = i_raw.get("order", ["red", "green"])
    if (not isinstance(order, list) or sorted(order) != sorted(ACTOR_ORDER_NAMES)):
        check.add(f"{path}.interleaving.order", "must be a permutation of ['red', 'green']")
        order = ["red", "green"]
    interleaving = InterleavingConfig(i_kind or "concurrent", tuple(order))
    if interleaving.kind == "turn_based" and sequence.mode != "fixed_tick":
        check.add(f"{path}.interleaving.kind", "turn_based requires sequence mode fixed_tick")

    sensor = _parse_sensor(raw.get("sensor"), check)
    reward = _parse_reward(raw.get("reward"), check)
    actions = _parse_actions(raw.get("actions"), check, reward, sequence)

    default_seed = raw.get("default_seed", 0)
    if not isinstance(default_seed, int) or isinstance(default_seed, bool):
        check.add(f"{path}.default_seed", "must be an integer")
        default_seed = 0
    lenient = raw.get("lenient_mask", False)
    if not isinstance(lenient, bool):
        check.add(f"{path}.lenient_mask", "must be a boolean")
        lenient = False

    return PomdpSpecConfig(
        gamma=gamma if gamma is not None else 0.9,
        horizon=horizon,
        sequence=sequence,
        interleaving=interleaving,
        sensor=sensor,
        actions=actions,
        reward=reward,
        default_seed=default_seed,
        lenient_mask=lenient,
    )


def _parse_sensor(raw, check: _Checker) -> SensorConfig:
    path = "pomdp.sensor"
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        raw = {}
    check.section(raw, path, {
        "mode", "detection_prob", "false_positive_prob", "report_delay", "fields",
    })
    mode = check.string(raw, f"{path}.mode", choices=set(SENSOR_MODES), default="realistic")
    detection = check.number(raw, f"{path}.detection_prob", lo=0.0, hi=1.0, default=1.0)
    fp = check.number(raw, f"{path}.false_positive_prob", lo=0.0, hi=1.0, default=0.0)
    delay = check.number(raw, f"{path}.report_delay", lo=0.0, default=0.0)
    allowed = OMNISCIENT_FIELDS if mode == "omniscient_oracle" else REALISTIC_FIELDS
    fields_raw = raw.get("fields")
    if fields_raw is None:
        fields_out = allowed
    elif not isinstance(fields_raw, list) or not fields_raw:
        check.add(f"{path}.fields", "must be a non-empty list of feature names")
        fields_out = allowed
    else:
        for f in fields_raw:
            if f not in allowed:
                check.add(f"{path}.fields", f"unknown feature '{f}' for {mode} mode (allowed: {list(allowed)})")
        fields_out = tuple(f for f in fields_raw if f in allowed) or allowed
    return SensorConfig(
        mode=mode or "realistic",
        detection_prob=detection if detection is not None else 1.0,
        false_positive_prob=fp or 0.0,
        report_delay=delay or 0.0,
        fields=fields_out,
    )


def _parse_reward(raw, check: _Checker) -> RewardConfig:
    path = "pomdp.reward"
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        check.add(path, "must be a mapping")
        raw = {}
    kind = check.string(raw, f"{path}.kind", choices=set(REWARD_KINDS), default="dense_default")
    params_by_kind = {
        "dense_default": {"compromised_penalty", "restore_cost", "pass_bonus", "role_weights"},
        "sparse": {"terminal_penalty"},
        "optimal_stopping": {"false_stop_cost", "missed_step_cost"},
    }
    allowed = {"kind"} | params_by_kind.get(kind or "dense_default", set())
    for key in raw:
        if key == "kind":
            continue
        if key not in allowed:
            # Exactly one reward kind is active; parameters of other kinds are rejected.
            known = any(key in p for p in params_by_kind.values())
            msg = f"parameter of a different reward kind than '{kind}'" if known else "unknown field"
            check.add(f"{path}.{key}", msg)
    defaults = RewardConfig()
    weights = dict(defaults.role_weights)
    w_raw = raw.get("role_weights") or {}
    if not isinstance(w_raw, dict):
        check.add(f"{path}.role_weights", "must be a mapping of role to weight")
        w_raw = {}
    for k, v in w_raw.items():
        if k not in ROLES:
            check.add(f"{path}.role_weights.{k}", f"unknown role (expected one of {list(ROLES)})")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            check.add(f"{path}.role_weights.{k}", "must be a number")
            continue
        weights[k] = float(v)
    return RewardConfig(
        kind=kind or "dense_default",
        compromised_penalty=check.number(raw, f"{path}.compromised_penalty", default=defaults.compromised_penalty),
        restore_cost=check.number(raw, f"{path}.restore_cost", default=defaults.restore_cost),
        pass_bonus=check.number(raw, f"{path}.pass_bonus", default=defaults.pass_bonus),
        role_weights=weights,
        terminal_penalty=check.number(raw, f"{path}.terminal_penalty", default=defaults.terminal_penalty),
        false_stop_cost=check.number(raw, f"{path}.false_stop_cost", default=defaults.false_stop_cost),
        missed_step_cost=check.number(raw, f"{path}.missed_step_cost", default=defaults.missed_step_cost),
    )


def _parse_actions(raw, check: _Checker, reward: RewardConfig, sequence: SequenceConfig) -> tuple[ActionFamilyConfig, ...]:
    path = "pomdp.actions"
    if raw is None:
        # Default action set: the full blue capability list, plus stop when
        # the reward formulation calls for it.
        names = ["pass", "scan", "restore", "quarantine", "release"]
        if reward.kind == "optimal_stopping":
            names.append("stop")
        raw = [{"name": n} for n in names]
    if not isinstance(raw, list) or not raw:
        check.add(path, "must be a non-empty list of action specs")
        raw = [{"name": "pass"}]
    out: list[ActionFamilyConfig] = []
    seen: set[str] = set()
    for i, a in enumerate(raw):
        ap = f"{path}[{i}]"
        if not isinstance(a, dict):
            check.add(ap, "must be a mapping")
            continue
        check.section(a, ap, {"name", "duration", "success_prob", "cost", "preconditions"})
        name = check.string(a, f"{ap}.name", choices=set(ACTION_FAMILIES), required=True)
        if name is None:
            continue
        if name in seen:
            check.add(f"{ap}.name", f"duplicate action family '{name}'")
            continue
        seen.add(name)
        default_duration = 0.0 if name in ("pass", "stop") else 5.0
        duration = check.number(a, f"{ap}.duration", lo=0.0, default=default_duration)
        if name not in ("pass", "stop") and duration is not None and duration <= 0:
            check.add(f"{ap}.duration", "must be > 0 for host-targeted actions")
        success = check.number(a, f"{ap}.success_prob", lo=0.0, hi=1.0, default=1.0)
        cost = check.number(a, f"{ap}.cost", hi=0.0, default=0.0)
        pre_raw = a.get("preconditions")
        pre: tuple[str, ...] | None = None
        if pre_raw is not None:
            if not isinstance(pre_raw, list):
                check.add(f"{ap}.preconditions", "must be a list of predicate names")
            else:
                for p in pre_raw:
                    if p not in PRECONDITION_NAMES:
                        check.add(f"{ap}.preconditions", f"unknown predicate '{p}' (allowed: {list(PRECONDITION_NAMES)})")
                pre = tuple(p for p in pre_raw if p in PRECONDITION_NAMES)
        out.append(ActionFamilyConfig(name, duration or 0.0, success, cost or 0.0, pre))
    if "pass" not in seen:
        check.add(path, "action set must include 'pass'")
    if "stop" in seen and reward.kind != "optimal_stopping":
        check.add(path, "'stop' is only available with the optimal_stopping reward kind")
    if reward.kind == "optimal_stopping" and "stop" not in seen:
        check.add(path, "optimal_stopping reward requires the 'stop' action")
    if sequence.mode == "action_duration":
        for a in out:
            if a.name == "pass" and a.duration <= 0:
                check.add(path, "action_duration mode requires pass duration > 0")
    return tuple(out)


def validate_dict(doc) -> ScenarioConfig:
    """Validate a raw scenario document (already-parsed mapping)."""
    return _validate(doc, lines={})


def _validate(doc, lines: dict[str, int]) -> ScenarioConfig:
    check = _Checker(lines)
    if not isinstance(doc, dict):
        raise ScenarioError([ValidationIssue("", "document must be a mapping")])
    check.section(doc, "", {"schema_version", "metadata", "topology", "red", "green", "pomdp"})

    version = doc.get("schema_version")
    if version is None:
        check.add("schema_version", "required field missing")
    elif version != SCHEMA_VERSION:
        check.add("schema_version", f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")

    m_raw = doc.get("metadata")
    if not isinstance(m_raw, dict):
        check.add("metadata", "required mapping missing")
        m_raw = {}
    check.section(m_raw, "metadata", {"name", "description", "problem"})
    name = check.string(m_raw, "metadata.name", required=True)
    problem = check.string(m_raw, "metadata.problem")
    if not problem:
        check.add("metadata.problem", "a problem statement block is mandatory")
    description = check.string(m_raw, "metadata.description", default="") or ""
    metadata = MetadataConfig(name or "unnamed", problem or "", description)

    topology = _parse_topology(doc.get("topology"), check)
    red = _parse_red(doc.get("red"), check, topology)
    green = _parse_green(doc.get("green"), check, topology)
    pomdp = _parse_pomdp(doc.get("pomdp"), check)

    if check.issues:
        raise ScenarioError(check.issues)
    return ScenarioConfig(SCHEMA_VERSION, metadata, topology, red, green, pomdp)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document from YAML text.

    Raises ScenarioError carrying every problem found, each with a field
    path and, where available, the source line.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        raise ScenarioError([ValidationIssue("", f"YAML syntax error: {exc}", line)]) from exc
    return _validate(doc, _line_map(text))


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# ---------------------------------------------------------------------------
# Serialization


_REWARD_PARAMS = {
    "dense_default": ("compromised_penalty", "restore_cost", "pass_bonus", "role_weights"),
    "sparse": ("terminal_penalty",),
    "optimal_stopping": ("false_stop_cost", "missed_step_cost"),
}


def _to_plain(obj):
    if isinstance(obj, RewardConfig):
        # Only the active kind's parameters round-trip; the validator rejects
        # parameters belonging to other kinds.
        out = {"kind": obj.kind}
        for name in _REWARD_PARAMS[obj.kind]:
            out[name] = _to_plain(getattr(obj, name))
        return out
    if isinstance(obj, (HostConfig, TopologyConfig, RedStrategyConfig, GreenProfileConfig,
                        SensorConfig, ActionFamilyConfig, HorizonConfig,
                        SequenceConfig, InterleavingConfig, PomdpSpecConfig, MetadataConfig,
                        ScenarioConfig)):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dc_fields(obj)}
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def serialize_scenario(config: ScenarioConfig) -> str:
    """Canonical YAML form; parse(serialize(c)) == c up to field defaults."""
    doc = _to_plain(config)
    # Serialized adjacency pairs come back as lists, which the parser expects.
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


def scenario_hash(config: ScenarioConfig) -> str:
    """Stable content hash of the resolved configuration."""
    return hashlib.sha256(serialize_scenario(config).encode("utf-8")).hexdigest()
