"""The POMDP layer: sensor pipeline, action masking, rewards, and episodes.

All partial observability lives here. In realistic sensor mode the
observation is a pure function of the alert stream and the agent's own
action feedback; ground truth never leaks through it. The omniscient mode
exists for oracle-enumerable test scenarios and is refused by the protocol
server outside test profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import actors, netsim
from .netsim import Event, NetworkState, TruthRecord
from .scenario_io import (
    ActionFamilyConfig,
    RewardConfig,
    ScenarioConfig,
)

COMPROMISE_LEVEL = {"none": 0, "user": 1, "root": 2}
FIELD_WIDTHS = {
    "role": 3, "detected": 1, "alert_count": 1, "quarantined": 1,
    "compromise": 1, "red_stage": 1,
}
ROLE_ONEHOT = {
    "workstation": (1.0, 0.0, 0.0),
    "server": (0.0, 1.0, 0.0),
    "critical_server": (0.0, 0.0, 1.0),
}

FEEDBACK_NONE = "none"
FEEDBACK_SUCCEEDED = "succeeded"
FEEDBACK_FAILED = "failed"
FEEDBACK_IN_PROGRESS = "in_progress"

HOST_ACTION_FAMILIES = ("scan", "restore", "quarantine", "release")


class InvalidActionError(Exception):
    """Raised on a masked or out-of-range action id (strict contract)."""

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason  # "masked" or "out_of_range"


class EpisodeOverError(Exception):
    """step() called after the episode terminated or truncated."""


@dataclass(frozen=True)
class ActionInstance:
    index: int
    name: str
    family: ActionFamilyConfig
    target: str | None


@dataclass(slots=True)
class NodeRecord:
    host_id: str
    fields: dict[str, tuple[float, ...]]


@dataclass(slots=True)
class Observation:
    flat: np.ndarray
    factored: list[NodeRecord]
    step_index: int
    last_action_feedback: str


@dataclass(slots=True)
class Alert:
    event_ts: float
    visible_at: float
    host: str
    kind: str
    indicates_compromise: bool
    false_positive: bool = False


def build_action_table(config: ScenarioConfig) -> list[ActionInstance]:
    """Canonical action ordering: pass, then per-host families, then stop."""
    families = {f.name: f for f in config.pomdp.actions}
    table: list[ActionInstance] = []
    table.append(ActionInstance(0, "pass", families["pass"], None))
    for host in config.host_ids():
        for fam_name in HOST_ACTION_FAMILIES:
            fam = families.get(fam_name)
            if fam is not None:
                table.append(ActionInstance(len(table), f"{fam_name}:{host}", fam, host))
    if "stop" in families:
        table.append(ActionInstance(len(table), "stop", families["stop"], None))
    return table


class Sensor:
    """Folds applied events into alerts, detection bits and the action view.

    Detection is per event: red kill-chain artifacts (unless stealth
    suppressed) and compromise findings from blue scans are each detected
    with detection_prob; anomalous green events false-alarm with
    false_positive_prob. Alerts become visible report_delay seconds after
    their event. The per-host detection bit is sticky until a successful
    restore; alert counts accumulate for the whole episode.
    """

    def __init__(self, config: ScenarioConfig, host_order: list[str]):
        cfg = config.pomdp.sensor
        self.detection_prob = cfg.detection_prob
        self.false_positive_prob = cfg.false_positive_prob
        self.report_delay = cfg.report_delay
        self.pending: list[Alert] = []
        self.alert_count = {h: 0 for h in host_order}
        self.detected = {h: False for h in host_order}
        self.quarantine_view = {h: False for h in host_order}
        self.last_restore = {h: -1.0 for h in host_order}
        self.visible: list[Alert] = []

    def process(self, events: list[Event], clock: float, state: NetworkState) -> None:
        for event in events:
            if event.void:
                continue
            if event.source == "red" and event.kind in ("scan", "exploit", "escalate", "impact"):
                if event.payload.get("suppressed"):
                    continue
                if state.bernoulli("sensor", self.detection_prob):
                    self._add(event, indicates=event.kind != "scan")
            elif event.source == "green" and event.payload.get("anomalous"):
                if state.bernoulli("sensor", self.false_positive_prob):
                    self._add(event, indicates=True, false_positive=True)
            elif event.source == "blue" and event.kind == "action_complete":
                self._fold_blue(event, state)
        self._promote(clock)

    def _add(self, event: Event, indicates: bool, false_positive: bool = False) -> None:
        self.pending.append(Alert(
            event_ts=event.timestamp,
            visible_at=event.timestamp + self.report_delay,
            host=event.subject,
            kind=event.kind,
            indicates_compromise=indicates,
            false_positive=false_positive,
        ))

    def _fold_blue(self, event: Event, state: NetworkState) -> None:
        action = event.payload.get("action")
        ok = event.payload.get("succeeded")
        host = event.subject
        if not ok:
            return
        if action == "quarantine":
            self.quarantine_view[host] = True
        elif action == "release":
            self.quarantine_view[host] = False
        elif action == "restore":
            self.last_restore[host] = event.timestamp
            self.detected[host] = any(
                a.indicates_compromise and a.event_ts > event.timestamp
                for a in self.visible if a.host == host
            )
        elif action == "scan" and event.payload.get("finding") == "compromise":
            if state.bernoulli("sensor", self.detection_prob):
                self._add(event, indicates=True)

    def _promote(self, clock: float) -> None:
        if not self.pending:
            return
        still: list[Alert] = []
        for alert in self.pending:
            if alert.visible_at <= clock:
                self.visible.append(alert)
                self.alert_count[alert.host] += 1
                if alert.indicates_compromise and alert.event_ts > self.last_restore[alert.host]:
                    self.detected[alert.host] = True
            else:
                still.append(alert)
        self.pending = still


def compute_reward(window_events: list[Event], state_before: TruthRecord,
                   state_after: TruthRecord, action: ActionInstance | None,
                   cfg: RewardConfig) -> float:
    """Scalar reward for one transition, assessed at window end."""
    if cfg.kind == "dense_default":
        reward = action.family.cost if action is not None else 0.0
        name = action.family.name if action is not None else ""
        if name == "restore":
            reward += cfg.restore_cost
        compromised = 0.0
        any_compromised = False
        for truth in state_after.hosts.values():
            if truth.compromise != "none":
                any_compromised = True
                compromised += cfg.role_weights.get(truth.role, 1.0)
        reward += cfg.compromised_penalty * compromised
        if name == "pass" and not any_compromised:
            reward += cfg.pass_bonus
        return reward
    if cfg.kind == "sparse":
        def impacted(rec: TruthRecord) -> bool:
            return any(t.role == "critical_server" and t.impacted for t in rec.hosts.values())
        return cfg.terminal_penalty if impacted(state_after) and not impacted(state_before) else 0.0
    if cfg.kind == "optimal_stopping":
        any_compromised = any(t.compromise != "none" for t in state_after.hosts.values())
        if action is not None and action.family.name == "stop":
            return cfg.false_stop_cost if not any_compromised else 0.0
        return cfg.missed_step_cost if any_compromised else 0.0
    raise ValueError(f"unknown reward kind {cfg.kind!r}")


def resolve_action(state: NetworkState, action: ActionInstance, rng=None) -> Event | None:
    """Draw success from the blue stream and schedule the completion event.

    Effects apply when the event does, at now + duration; failure schedules
    only the completion with the failed flag. pass and stop schedule nothing.
    """
    fam = action.family
    if fam.name in ("pass", "stop"):
        return None
    succeeded = state.bernoulli("blue", fam.success_prob)
    event = Event(
        timestamp=state.clock + fam.duration,
        seq=0,
        source="blue",
        kind="action_complete",
        subject=action.target or "",
        payload={"action": fam.name, "succeeded": succeeded},
    )
    netsim.schedule_event(state, event)
    return event


class Env:
    """Sequential single-caller POMDP episode over one NetworkState.

    Distinct instances are fully independent and safe to run in parallel.
    """

    def __init__(self, config: ScenarioConfig, seed: int | None = None):
        self.config = config
        self.actions = build_action_table(config)
        self.action_names = [a.name for a in self.actions]
        self.n_actions = len(self.actions)
        self.gamma = config.pomdp.gamma
        self._omniscient = config.pomdp.sensor.mode == "omniscient_oracle"
        self._fields = config.pomdp.sensor.fields
        self._lenient = config.pomdp.lenient_mask
        self._host_order = config.host_ids()
        self._roles = {h.id: h.role for h in config.topology.hosts}
        self._layout = self._build_layout()
        self.reset(seed)

    # -- lifecycle ----------------------------------------------------------

    def reset(self, seed: int | None = None) -> Observation:
        if seed is None:
            seed = self.config.pomdp.default_seed
        self.master_seed = seed
        self.state = netsim.build_network(self.config, seed)
        self.sensor = Sensor(self.config, self._host_order)
        self.step_index = 0
        self.done = False
        self._pending: tuple[ActionInstance, Event] | None = None
        self._feedback = FEEDBACK_NONE
        self._last_obs = self._encode()
        return self._last_obs

    def step(self, action_id: int) -> tuple[Observation, float, bool, bool, dict]:
        if self.done:
            raise EpisodeOverError("episode is over; call reset()")
        if not isinstance(action_id, (int, np.integer)) or not 0 <= action_id < self.n_actions:
            raise InvalidActionError(f"action id {action_id!r} out of range", "out_of_range")
        action = self.actions[action_id]
        if not self._action_legal(action):
            if self._lenient:
                info = {"step": self.step_index, "clock": self.state.clock,
                        "feedback": self._feedback, "void_events": 0, "masked_noop": True}
                return self._last_obs, 0.0, False, False, info
            raise InvalidActionError(f"action '{action.name}' is masked", "masked")

        if action.family.name == "stop":
            truth = netsim.snapshot_truth(self.state)
            reward = compute_reward([], truth, truth, action, self.config.pomdp.reward)
            self.step_index += 1
            self.done = True
            info = {"step": self.step_index, "clock": self.state.clock,
                    "feedback": FEEDBACK_NONE, "void_events": 0}
            self._last_obs = self._encode()
            return self._last_obs, reward, True, False, info

        truth_before = netsim.snapshot_truth(self.state)
        seq_cfg = self.config.pomdp.sequence
        if seq_cfg.mode == "fixed_tick":
            t_target = self.state.clock + seq_cfg.dt
        else:
            t_target = self.state.clock + action.family.duration
        if action.family.name != "pass":
            completion = resolve_action(self.state, action)
            self._pending = (action, completion)

        netsim.begin_window(self.state)
        _, applied = netsim.advance_until(self.state, t_target)
        netsim.finalize_window(self.state)

        if self._pending is not None:
            _, completion = self._pending
            if completion.timestamp <= self.state.clock:
                self._feedback = (FEEDBACK_SUCCEEDED if completion.payload.get("succeeded")
                                  else FEEDBACK_FAILED)
                self._pending = None
            else:
                self._feedback = FEEDBACK_IN_PROGRESS
        else:
            self._feedback = FEEDBACK_NONE

        if not self._omniscient:
            self.sensor.process(applied, self.state.clock, self.state)

        truth_after = netsim.snapshot_truth(self.state)
        reward = compute_reward(applied, truth_before, truth_after, action,
                                self.config.pomdp.reward)
        self.step_index += 1

        terminated = False
        truncated = False
        horizon = self.config.pomdp.horizon
        if horizon.kind == "fixed":
            truncated = self.step_index >= horizon.steps
        elif horizon.kind == "terminal":
            terminated = any(
                t.role == "critical_server" and t.impacted
                for t in truth_after.hosts.values()
            )
        self.done = terminated or truncated

        info = {
            "step": self.step_index,
            "clock": self.state.clock,
            "feedback": self._feedback,
            "void_events": sum(1 for e in applied if e.void),
        }
        self._last_obs = self._encode()
        return self._last_obs, reward, terminated, truncated, info

    # -- observation --------------------------------------------------------

    def _build_layout(self) -> dict[str, int]:
        layout: dict[str, int] = {}
        idx = 0
        for host in self._host_order:
            for f in self._fields:
                if f == "role":
                    for role in ROLE_ONEHOT:
                        layout[f"{host}.role.{role}"] = idx
                        idx += 1
                else:
                    layout[f"{host}.{f}"] = idx
                    idx += 1
        return layout

    def obs_layout(self) -> dict[str, int]:
        """Machine-readable flat-vector header: feature name to index."""
        return dict(self._layout)

    def _node_fields(self, host_id: str) -> dict[str, tuple[float, ...]]:
        host = self.state.hosts[host_id]
        out: dict[str, tuple[float, ...]] = {}
        for f in self._fields:
            if f == "role":
                out["role"] = ROLE_ONEHOT[host.role]
            elif f == "detected":
                out["detected"] = (1.0 if self.sensor.detected[host_id] else 0.0,)
            elif f == "alert_count":
                out["alert_count"] = (float(self.sensor.alert_count[host_id]),)
            elif f == "quarantined":
                if self._omniscient:
                    out["quarantined"] = (1.0 if host.quarantined else 0.0,)
                else:
                    out["quarantined"] = (1.0 if self.sensor.quarantine_view[host_id] else 0.0,)
            elif f == "compromise":
                out["compromise"] = (float(COMPROMISE_LEVEL[host.compromise]),)
            elif f == "red_stage":
                stage = self.state.red_campaign.stages[host_id]
                out["red_stage"] = (float(actors.STAGE_INDEX[stage]),)
        return out

    def encode_observation(self, mode: str = "flat"):
        """Deterministic encoding; 'flat' is the flattening of 'factored'."""
        factored = [NodeRecord(h, self._node_fields(h)) for h in self._host_order]
        if mode == "factored":
            return factored
        flat = np.array(
            [v for rec in factored for f in self._fields for v in rec.fields[f]],
            dtype=np.float64,
        )
        if mode == "flat":
            return flat
        raise ValueError(f"unknown observation mode {mode!r}")

    def _encode(self) -> Observation:
        factored = [NodeRecord(h, self._node_fields(h)) for h in self._host_order]
        flat = np.array(
            [v for rec in factored for f in self._fields for v in rec.fields[f]],
            dtype=np.float64,
        )
        return Observation(flat, factored, self.step_index, self._feedback)

    def state_key(self) -> tuple:
        """Hashable discrete key of the current observation (tabular methods)."""
        values: list[int] = []
        for rec_host in self._host_order:
            for f, vals in self._node_fields(rec_host).items():
                values.extend(int(v) for v in vals)
        return tuple(values)

    # -- masking ------------------------------------------------------------

    def _fact_detected(self, host_id: str) -> bool:
        if self._omniscient:
            return self.state.hosts[host_id].compromise != "none"
        return self.sensor.detected[host_id]

    def _fact_quarantined(self, host_id: str) -> bool:
        if self._omniscient:
            return self.state.hosts[host_id].quarantined
        return self.sensor.quarantine_view[host_id]

    def _action_legal(self, action: ActionInstance) -> bool:
        name = action.family.name
        if name == "pass":
            return True
        if self._pending is not None:
            return False  # an action is still in progress
        if name == "stop":
            return True
        host = action.target
        for predicate in action.family.effective_preconditions():
            if predicate == "always":
                continue
            if predicate == "detected" and not self._fact_detected(host):
                return False
            if predicate == "not_detected" and self._fact_detected(host):
                return False
            if predicate == "quarantined" and not self._fact_quarantined(host):
                return False
            if predicate == "not_quarantined" and self._fact_quarantined(host):
                return False
        return True

    def legal_action_mask(self) -> np.ndarray:
        """True where every precondition holds; pass is always true."""
        return np.array([self._action_legal(a) for a in self.actions], dtype=bool)

    # -- evaluation-side accessors -------------------------------------------

    def truth(self) -> TruthRecord:
        return netsim.snapshot_truth(self.state)

    def episode_trace(self) -> list[Event]:
        return list(self.state.trace)


def env_reset(config: ScenarioConfig, seed: int | None = None) -> tuple[Env, Observation]:
    """Fresh environment and its initial observation."""
    env = Env(config, seed)
    return env, env._last_obs


def env_step(env: Env, action_id: int):
    return env.step(action_id)


def legal_action_mask(env: Env) -> np.ndarray:
    return env.legal_action_mask()


def encode_observation(env: Env, mode: str = "flat"):
    return env.encode_observation(mode)
