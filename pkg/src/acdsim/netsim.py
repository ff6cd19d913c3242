"""Ground-truth network simulation: hosts, topology, and the event calendar.

The calendar is a continuous-time priority queue totally ordered by
(timestamp, seq) where seq is a monotone insertion counter; identical
(config, master seed) always yields the identical applied-event sequence.
All randomness flows through named streams derived from one master seed by
stable hashing, so adding an actor or sensor never perturbs the others.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scenario_io import ScenarioConfig

COMPROMISE_NONE = "none"
COMPROMISE_USER = "user"
COMPROMISE_ROOT = "root"

SOURCES = ("red", "green", "blue", "system")
EVENT_KINDS = (
    "connect", "scan", "exploit", "escalate", "impact",
    "benign_request", "service_tick", "action_complete",
)

STREAM_NAMES = ("red", "green", "blue", "sensor")


class ConstructionError(Exception):
    """Scenario cannot be instantiated (duplicate or dangling identifiers)."""


class SchedulingError(Exception):
    """Event violates calendar preconditions (e.g. timestamp in the past)."""


def derive_seed(master_seed: int, name: str) -> int:
    """Stable per-name seed derivation from a master seed."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "big")


def derive_rng(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, name))


@dataclass(slots=True)
class Host:
    id: str
    subnet: str
    role: str
    services: tuple[str, ...]
    compromise: str = COMPROMISE_NONE
    quarantined: bool = False
    availability: float = 1.0
    impacted: bool = False
    # Green requests served/failed within the current step window.
    served: int = 0
    failed: int = 0


@dataclass(slots=True)
class Event:
    timestamp: float
    seq: int
    source: str
    kind: str
    subject: str
    peer: str | None = None
    payload: dict = field(default_factory=dict)
    void: bool = False


class EventCalendar:
    """Priority queue of events ordered by (timestamp, seq)."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, event: Event) -> Event:
        event.seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (event.timestamp, event.seq, event))
        return event

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[2]

    def entries(self) -> list[Event]:
        return [e for _, _, e in sorted(self._heap)]


@dataclass(slots=True)
class HostTruth:
    compromise: str
    quarantined: bool
    availability: float
    impacted: bool
    role: str


@dataclass(slots=True)
class TruthRecord:
    clock: float
    hosts: dict[str, HostTruth]


class NetworkState:
    """Single-writer mutable simulation state for one episode."""

    def __init__(self, config: ScenarioConfig, master_seed: int):
        self.config = config
        self.master_seed = master_seed
        self.clock = 0.0
        self.hosts: dict[str, Host] = {}
        self.host_order: list[str] = []
        self.adjacency: dict[str, set[str]] = {s: {s} for s in config.topology.subnets}
        self.calendar = EventCalendar()
        self.rng_streams = {name: derive_rng(master_seed, name) for name in STREAM_NAMES}
        self.trace: list[Event] = []
        # Episode-level green accounting (includes requests blocked by quarantine,
        # which must not touch the quarantined host's own counters).
        self.green_served = 0
        self.green_failed = 0
        # Handlers invoked after each event application; used by the task layer
        # to drive actor decisions and campaign bookkeeping.
        self.on_applied: list = []
        # Optional timestamp transform for red/green scheduling (turn-based slots).
        self.wakeup_quantizer = None
        # Optional override for Bernoulli draws, used by the exact MDP extractor.
        self.draw_override = None
        self.red_campaign = None  # attached by build_network

    def bernoulli(self, stream: str, p: float) -> bool:
        """Draw success/failure; p at 0 or 1 consumes no randomness."""
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        if self.draw_override is not None:
            return self.draw_override(stream, p)
        return self.rng_streams[stream].random() < p

    def reachable_hosts(self, subnets: set[str]) -> list[str]:
        """Host ids reachable from the given subnets, in declaration order."""
        reach: set[str] = set()
        for s in subnets:
            reach |= self.adjacency.get(s, {s})
        return [h for h in self.host_order if self.hosts[h].subnet in reach]


def build_network(config: ScenarioConfig, master_seed: int | None = None) -> NetworkState:
    """Instantiate the ground-truth state and seed each actor's first wake-up."""
    if master_seed is None:
        master_seed = config.pomdp.default_seed
    topo = config.topology
    if not topo.hosts:
        raise ConstructionError("empty topology: no hosts declared")

    state = NetworkState(config, master_seed)
    if config.pomdp.interleaving.kind == "turn_based":
        # Red/green wake-ups snap up to step-boundary slots; exact boundaries
        # stay put so aligned delays reproduce the concurrent trace.
        dt = config.pomdp.sequence.dt
        state.wakeup_quantizer = lambda ts: dt * math.ceil(ts / dt - 1e-9)
    for h in topo.hosts:
        if h.id in state.hosts:
            raise ConstructionError(f"duplicate host id '{h.id}'")
        if h.subnet not in state.adjacency:
            raise ConstructionError(f"host '{h.id}' references unknown subnet '{h.subnet}'")
        for svc in h.services:
            if svc not in topo.services:
                raise ConstructionError(f"host '{h.id}' references unknown service '{svc}'")
        state.hosts[h.id] = Host(h.id, h.subnet, h.role, h.services)
        state.host_order.append(h.id)
    for a, b in topo.adjacency:
        if a not in state.adjacency or b not in state.adjacency:
            raise ConstructionError(f"adjacency references unknown subnet '{a if a not in state.adjacency else b}'")
        state.adjacency[a].add(b)
        state.adjacency[b].add(a)

    from . import actors  # deferred: actors builds Events defined here

    state.red_campaign = actors.new_campaign(config, state.host_order,
                                             {h.id: h for h in topo.hosts})
    state.on_applied = [
        lambda e: actors.drive_red(state, e),
        lambda e: actors.drive_green(state, e),
        lambda e: actors.drive_blue_bookkeeping(state, e),
    ]
    for actor in config.pomdp.interleaving.order:
        if actor == "red":
            actors.seed_red(state)
        else:
            actors.seed_green(state)
    return state


def schedule_event(state: NetworkState, event: Event) -> NetworkState:
    """Insert an event; rejects timestamps in the past (no silent clamping)."""
    if event.timestamp < state.clock:
        raise SchedulingError(
            f"event at t={event.timestamp} is before current clock t={state.clock}"
        )
    state.calendar.push(event)
    return state


def schedule_actor_event(state: NetworkState, event: Event) -> Event:
    """Schedule a red/green wake-up, applying the turn-based quantizer if set."""
    if state.wakeup_quantizer is not None:
        event.timestamp = state.wakeup_quantizer(event.timestamp)
    schedule_event(state, event)
    return event


def advance_until(state: NetworkState, t_stop: float) -> tuple[NetworkState, list[Event]]:
    """Apply every calendar event with timestamp <= t_stop, in (timestamp, seq) order.

    Actor callbacks run after each application and may schedule further events,
    which are also processed if due. Events whose preconditions vanished are
    voided (dropped with a trace record) rather than erroring.
    """
    if t_stop < state.clock:
        raise SchedulingError(f"cannot advance to t={t_stop} before clock t={state.clock}")
    applied: list[Event] = []
    cal = state.calendar
    while True:
        ts = cal.peek_time()
        if ts is None or ts > t_stop:
            break
        event = cal.pop()
        state.clock = event.timestamp
        _apply_event(state, event)
        state.trace.append(event)
        applied.append(event)
        for handler in state.on_applied:
            handler(event)
    state.clock = t_stop
    return state, applied


def _apply_event(state: NetworkState, event: Event) -> None:
    kind = event.kind
    host = state.hosts.get(event.subject)

    if kind == "benign_request":
        if host is None:
            event.void = True
            return
        if host.quarantined:
            # Blocked at the boundary: the quarantined host itself is untouched.
            state.green_failed += 1
            event.payload["served"] = False
        elif host.compromise == COMPROMISE_ROOT or host.impacted:
            host.failed += 1
            state.green_failed += 1
            event.payload["served"] = False
        else:
            host.served += 1
            state.green_served += 1
            event.payload["served"] = True
        return

    if kind in ("scan", "exploit", "escalate", "impact") and event.source == "red":
        if host is None or host.quarantined:
            event.void = True
            return
        if kind == "scan":
            event.payload["succeeded"] = True
            return
        prob = float(event.payload.get("success_prob", 1.0))
        if kind == "exploit":
            if host.compromise != COMPROMISE_NONE:
                event.void = True
                return
            ok = state.bernoulli("red", prob)
            event.payload["succeeded"] = ok
            if ok:
                host.compromise = COMPROMISE_USER
        elif kind == "escalate":
            if host.compromise != COMPROMISE_USER:
                event.void = True
                return
            ok = state.bernoulli("red", prob)
            event.payload["succeeded"] = ok
            if ok:
                host.compromise = COMPROMISE_ROOT
        elif kind == "impact":
            if host.compromise != COMPROMISE_ROOT or host.role != "critical_server" or host.impacted:
                event.void = True
                return
            ok = state.bernoulli("red", prob)
            event.payload["succeeded"] = ok
            if ok:
                host.impacted = True
        return

    if kind == "action_complete" and event.source == "blue":
        _apply_blue_completion(state, event)
        return

    # connect / service_tick / foreign-sourced kinds: no ground-truth effect.
    return


def _apply_blue_completion(state: NetworkState, event: Event) -> None:
    action = event.payload.get("action")
    succeeded = bool(event.payload.get("succeeded"))
    host = state.hosts.get(event.subject)
    if host is None:
        if action != "stop":
            event.void = True
        return
    if not succeeded:
        return
    if action == "restore":
        host.compromise = COMPROMISE_NONE
        host.impacted = False
        event.payload["restored_at"] = event.timestamp
    elif action == "quarantine":
        host.quarantined = True
    elif action == "release":
        host.quarantined = False
    elif action == "scan":
        event.payload["finding"] = (
            "compromise" if host.compromise != COMPROMISE_NONE else "clean"
        )


def begin_window(state: NetworkState) -> None:
    """Reset per-window availability counters before a step advance."""
    for h in state.hosts.values():
        h.served = 0
        h.failed = 0


def finalize_window(state: NetworkState) -> None:
    """Compute each host's availability for the window just elapsed."""
    for h in state.hosts.values():
        if h.impacted or h.quarantined:
            h.availability = 0.0
        elif h.served + h.failed > 0:
            h.availability = h.served / (h.served + h.failed)
        else:
            h.availability = 1.0


def snapshot_truth(state: NetworkState) -> TruthRecord:
    """Read-only copy of per-host ground truth for evaluation and oracles."""
    return TruthRecord(
        clock=state.clock,
        hosts={
            h.id: HostTruth(h.compromise, h.quarantined, h.availability, h.impacted, h.role)
            for h in state.hosts.values()
        },
    )


# ---------------------------------------------------------------------------
# Serialization for determinism checks


def trace_line(event: Event) -> str:
    base = f"{event.timestamp!r},{event.seq},{event.source},{event.kind},{event.subject}"
    if event.peer:
        base += f",{event.peer}"
    return base


def trace_lines(events: list[Event]) -> list[str]:
    """Golden trace format: timestamp,seq,source,kind,subject[,peer]."""
    return [trace_line(e) for e in events]


def serialize_state(state: NetworkState) -> str:
    """Canonical JSON of the full state, byte-stable for a fixed (config, seed)."""
    doc = {
        "clock": state.clock,
        "master_seed": state.master_seed,
        "hosts": [
            {
                "id": h.id,
                "subnet": h.subnet,
                "role": h.role,
                "services": list(h.services),
                "compromise": h.compromise,
                "quarantined": h.quarantined,
                "availability": h.availability,
                "impacted": h.impacted,
            }
            for hid in state.host_order
            for h in (state.hosts[hid],)
        ],
        "calendar": [
            {
                "timestamp": e.timestamp,
                "seq": e.seq,
                "source": e.source,
                "kind": e.kind,
                "subject": e.subject,
                "peer": e.peer,
                "payload": {k: v for k, v in sorted(e.payload.items())},
            }
            for e in state.calendar.entries()
        ],
        "rng_streams": {
            name: json.loads(json.dumps(rng.bit_generator.state, default=int))
            for name, rng in sorted(state.rng_streams.items())
        },
    }
    return json.dumps(doc, sort_keys=True)
