"""Scripted and stochastic red (threat) and green (benign user) actor models.

Red runs a four-stage kill chain per host (discover, exploit, escalate,
impact) and schedules its own next event when the previous one applies or
voids. Green emits per-host benign requests as a Poisson arrival process.
Each actor draws exclusively from its own named RNG stream, so changing one
actor's profile never perturbs the other's timeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import netsim
from .netsim import Event, NetworkState, TruthRecord
from .scenario_io import GreenProfileConfig, RedStrategyConfig, ScenarioConfig, TARGETINGS

STAGE_CHAIN = ("unknown", "discovered", "user", "root", "impacted")
STAGE_INDEX = {s: i for i, s in enumerate(STAGE_CHAIN)}

# Next kill-chain event kind given a host's current stage.
_NEXT_KIND = {"unknown": "scan", "discovered": "exploit", "user": "escalate", "root": "impact"}
# Delay table key per event kind.
_DELAY_STAGE = {"scan": "discover", "exploit": "exploit", "escalate": "escalate", "impact": "impact"}

_ROLE_PRIORITY = {"critical_server": 0, "server": 1, "workstation": 2}


@dataclass
class RedCampaignState:
    """Red's persistent knowledge: per-host stage, footholds, targeting mode."""

    cfg: RedStrategyConfig
    host_order: list[str]
    roles: dict[str, str]
    subnets: dict[str, str]
    entry_subnet: str
    stages: dict[str, str] = field(default_factory=dict)
    footholds: set[str] = field(default_factory=set)
    targeting_mode: str = "fixed_path"
    # Hosts reachable from red's position, refreshed by the calendar driver
    # before each decision (red_step itself never touches full truth).
    last_reachable: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.stages:
            self.stages = {h: "unknown" for h in self.host_order}
        self.targeting_mode = self.cfg.targeting

    def position_subnets(self) -> set[str]:
        subs = {self.entry_subnet}
        subs.update(self.subnets[h] for h in self.footholds)
        return subs

    def state_key(self) -> tuple:
        return tuple(STAGE_INDEX[self.stages[h]] for h in self.host_order)


def new_campaign(config: ScenarioConfig, host_order: list[str], host_cfgs: dict) -> RedCampaignState:
    entry = config.red.entry_subnet or host_cfgs[host_order[0]].subnet
    return RedCampaignState(
        cfg=config.red,
        host_order=list(host_order),
        roles={h: host_cfgs[h].role for h in host_order},
        subnets={h: host_cfgs[h].subnet for h in host_order},
        entry_subnet=entry,
    )


def _reachable(campaign: RedCampaignState, state: NetworkState) -> set[str]:
    return set(state.reachable_hosts(campaign.position_subnets()))


def _work_items(campaign: RedCampaignState, truth: TruthRecord, reachable: set[str]) -> list[tuple[str, str]]:
    """All (host, event kind) moves currently open to red."""
    items: list[tuple[str, str]] = []
    for h in campaign.host_order:
        stage = campaign.stages[h]
        if stage == "impacted":
            continue
        if truth.hosts[h].quarantined:
            continue
        if stage == "root" and campaign.roles[h] != "critical_server":
            continue  # nothing further to gain on this host
        kind = _NEXT_KIND[stage]
        if kind in ("scan", "exploit") and h not in reachable:
            continue
        items.append((h, kind))
    return items


def _choose(campaign: RedCampaignState, items: list[tuple[str, str]], rng) -> tuple[str, str]:
    mode = campaign.targeting_mode
    if mode == "random_reachable":
        return items[int(rng.integers(len(items)))]
    if mode == "prefer_critical":
        return min(items, key=lambda it: (_ROLE_PRIORITY[campaign.roles[it[0]]],
                                          campaign.host_order.index(it[0])))
    return items[0]  # fixed_path: declaration order


def red_step(campaign: RedCampaignState, truth: TruthRecord, rng) -> list[Event]:
    """Decide and emit red's next event, timestamped now + stage delay.

    Invoked when red's previous event applies (or voids). If no legal target
    exists the emission is empty apart from a rescheduled wake-up tick.
    """
    cfg = campaign.cfg
    now = truth.clock
    if cfg.mode == "switching" and cfg.switch_prob > 0.0:
        if rng.random() < cfg.switch_prob:
            others = [t for t in TARGETINGS if t != campaign.targeting_mode]
            campaign.targeting_mode = others[int(rng.integers(len(others)))]

    items = _work_items(campaign, truth, campaign.last_reachable)
    if not items:
        delay = _delay(cfg, "discover", rng)
        tick = Event(now + delay, 0, "red", "service_tick",
                     campaign.host_order[0], payload={"chain": True, "recheck": True})
        return [tick]

    host, kind = _choose(campaign, items, rng)
    delay = _delay(cfg, _DELAY_STAGE[kind], rng)
    payload: dict = {"chain": True}
    if kind != "scan":
        payload["success_prob"] = cfg.success_probs[_DELAY_STAGE[kind]]
    if _suppressed(cfg, rng):
        payload["suppressed"] = True
    return [Event(now + delay, 0, "red", kind, host, payload=payload)]


def _delay(cfg: RedStrategyConfig, stage: str, rng) -> float:
    mean = cfg.stage_delays[stage]
    if cfg.mode == "deterministic" or cfg.jitter <= 0.0:
        return mean
    return mean * (1.0 + cfg.jitter * (2.0 * rng.random() - 1.0))


def _suppressed(cfg: RedStrategyConfig, rng) -> bool:
    if cfg.stealth >= 1.0:
        return True
    if cfg.stealth <= 0.0:
        return False
    return rng.random() < cfg.stealth


def observe_red_event(campaign: RedCampaignState, event: Event, state: NetworkState) -> None:
    """Fold an applied red event's outcome back into campaign knowledge."""
    if event.void:
        return
    h = event.subject
    if event.kind == "scan":
        for target in state.reachable_hosts(campaign.position_subnets()):
            if campaign.stages[target] == "unknown" and not state.hosts[target].quarantined:
                campaign.stages[target] = "discovered"
        return
    if not event.payload.get("succeeded"):
        return
    if event.kind == "exploit":
        campaign.stages[h] = "user"
        campaign.footholds.add(h)
        # A fresh foothold reveals whatever is reachable from it.
        for target in state.reachable_hosts({campaign.subnets[h]}):
            if campaign.stages[target] == "unknown" and not state.hosts[target].quarantined:
                campaign.stages[target] = "discovered"
    elif event.kind == "escalate":
        campaign.stages[h] = "root"
    elif event.kind == "impact":
        campaign.stages[h] = "impacted"


def reset_host(campaign: RedCampaignState, host_id: str) -> None:
    """Blue restore: foothold lost, knowledge of the host's existence kept."""
    if STAGE_INDEX[campaign.stages[host_id]] >= STAGE_INDEX["user"]:
        campaign.stages[host_id] = "discovered"
    campaign.footholds.discard(host_id)


def drive_red(state: NetworkState, event: Event) -> None:
    """Calendar handler: bookkeeping plus the next decision for red's chain."""
    if event.source != "red" or not event.payload.get("chain"):
        return
    campaign = state.red_campaign
    observe_red_event(campaign, event, state)
    campaign.last_reachable = _reachable(campaign, state)
    for nxt in red_step(campaign, netsim.snapshot_truth(state), state.rng_streams["red"]):
        netsim.schedule_actor_event(state, nxt)


def seed_red(state: NetworkState) -> None:
    """Schedule red's first wake-up event at build time."""
    campaign = state.red_campaign
    campaign.last_reachable = _reachable(campaign, state)
    for nxt in red_step(campaign, netsim.snapshot_truth(state), state.rng_streams["red"]):
        netsim.schedule_actor_event(state, nxt)


# ---------------------------------------------------------------------------
# Green


def green_step(profile: GreenProfileConfig, truth: TruthRecord, rng, *,
               host_id: str, services: tuple[str, ...]) -> list[Event]:
    """Emit the next benign request for one host, drawn from the arrival rate.

    Draw order per arrival is fixed (inter-arrival, then service when more
    than one candidate, then anomaly when 0 < p < 1) so a standalone replay
    of the green stream reproduces the event sequence exactly.
    """
    rate = profile.rates_per_hour.get(host_id, 0.0)
    if rate <= 0.0:
        return []
    gap = rng.exponential(3600.0 / rate)
    candidates = _service_candidates(profile, services)
    if len(candidates) > 1:
        weights = [profile.service_weights.get(s, 1.0) for s in candidates]
        total = sum(weights)
        probs = [w / total for w in weights]
        service = candidates[int(rng.choice(len(candidates), p=probs))]
    elif candidates:
        service = candidates[0]
    else:
        service = ""
    payload: dict = {"green": True, "service": service}
    if profile.anomaly_prob >= 1.0:
        payload["anomalous"] = True
    elif profile.anomaly_prob > 0.0 and rng.random() < profile.anomaly_prob:
        payload["anomalous"] = True
    return [Event(truth.clock + gap, 0, "green", "benign_request", host_id, payload=payload)]


def _service_candidates(profile: GreenProfileConfig, services: tuple[str, ...]) -> list[str]:
    if profile.service_weights:
        weighted = [s for s in services if profile.service_weights.get(s, 0.0) > 0.0]
        if weighted:
            return weighted
    return list(services)


def drive_blue_bookkeeping(state: NetworkState, event: Event) -> None:
    """A successful blue restore resets red's campaign stage for that host."""
    if (event.source == "blue" and event.kind == "action_complete"
            and event.payload.get("action") == "restore"
            and event.payload.get("succeeded") and not event.void):
        reset_host(state.red_campaign, event.subject)


def drive_green(state: NetworkState, event: Event) -> None:
    """Calendar handler: each applied arrival schedules the host's next one."""
    if event.source != "green" or event.kind != "benign_request":
        return
    host = state.hosts[event.subject]
    for nxt in green_step(state.config.green, netsim.snapshot_truth(state),
                          state.rng_streams["green"],
                          host_id=event.subject, services=host.services):
        netsim.schedule_actor_event(state, nxt)


def seed_green(state: NetworkState) -> None:
    """Schedule the first arrival for every host with a nonzero request rate."""
    profile = state.config.green
    truth = netsim.snapshot_truth(state)
    for host_id in state.host_order:
        host = state.hosts[host_id]
        for nxt in green_step(profile, truth, state.rng_streams["green"],
                              host_id=host_id, services=host.services):
            netsim.schedule_actor_event(state, nxt)
