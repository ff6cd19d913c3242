"""
Ground-truth simulation: the event calendar and deterministic replay
=====================================================================

The simulator below the agent interface is a continuous-time discrete-event
system. Everything that happens (intruder moves, user requests, defensive
action completions) is an event on one calendar, totally ordered by
(timestamp, insertion sequence), and every random draw comes from a named
stream derived from one master seed. Same scenario + same seed = same world,
byte for byte.
"""

import acdsim
from acdsim.netsim import advance_until, build_network, serialize_state, trace_lines

config = acdsim.load_bundled("mvp-2host")
print("scenario:", config.metadata.name)
print("hosts:", ", ".join(f"{h.id} ({h.role})" for h in config.topology.hosts))

# Build the world. The calendar starts with each actor's first wake-up:
# the intruder's opening scan and the first benign user request.
state = build_network(config, master_seed=42)
print("\nseeded calendar:")
for event in state.calendar.entries():
    print(f"  t={event.timestamp:8.2f}  {event.source:5s} {event.kind:15s} -> {event.subject}")

# Advance simulated time. Applied events come back in order; actor callbacks
# fire along the way and schedule the next moves.
state, applied = advance_until(state, 60.0)
print("\nfirst 60 seconds of ground truth:")
for line in trace_lines(applied):
    print(" ", line)

print("\ntruth at t=60:")
for host in state.hosts.values():
    print(f"  {host.id}: compromise={host.compromise} impacted={host.impacted}")

# Determinism: rebuilding with the same seed replays the identical world.
replay = build_network(config, master_seed=42)
advance_until(replay, 60.0)
assert trace_lines(replay.trace) == trace_lines(state.trace)
print("\nreplay with the same seed is event-for-event identical")

# ... and the serialized state (hosts, calendar, RNG stream states) agrees too.
assert serialize_state(replay) == serialize_state(state)
print("serialized states are byte-identical")
