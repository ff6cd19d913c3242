"""
Sensors without magic: detection gaps, delays, stealth, false alarms
====================================================================

The observation pipeline only ever sees the alert stream. Turn the sensors
off and the defender is blind no matter how bad things get on the ground;
give the intruder perfect stealth and a perfect sensor stays silent too.
Noisy benign traffic produces false alarms that look exactly like the real
thing. This is where the partial observability lives, and nothing else
leaks through.
"""

import dataclasses

import acdsim

base = acdsim.load_bundled("mvp-2host")

def with_sensor(config, **changes):
    sensor = dataclasses.replace(config.pomdp.sensor, **changes)
    return dataclasses.replace(config, pomdp=dataclasses.replace(config.pomdp, sensor=sensor))

# 1. A blind sensor: the network burns while the observation stays at zero.
blind = with_sensor(base, detection_prob=0.0, false_positive_prob=0.0)
env, obs0 = acdsim.env_reset(blind, seed=0)
for _ in range(8):
    obs, *_ = env.step(0)
truth = env.truth()
print("blind sensor after 80s:")
print("  observation unchanged:", (obs.flat == obs0.flat).all())
print("  ground truth compromise:",
      {h: t.compromise for h, t in truth.hosts.items()})

# 2. A perfect sensor flags every intruder move in the step it happens.
env, _ = acdsim.env_reset(base, seed=0)
for _ in range(2):
    obs, *_ = env.step(0)
layout = env.obs_layout()
print("\nperfect sensor after the first exploit:")
print("  ws.detected =", int(obs.flat[layout['ws.detected']]))
print("  ws.alert_count =", int(obs.flat[layout['ws.alert_count']]))

# 3. Perfect stealth suppresses the artifacts the sensor would have seen.
ghost = dataclasses.replace(base, red=dataclasses.replace(base.red, stealth=1.0))
env, obs0 = acdsim.env_reset(ghost, seed=0)
for _ in range(6):
    obs, *_ = env.step(0)
print("\nstealthy intruder vs perfect sensor:")
print("  observation unchanged:", (obs.flat == obs0.flat).all())
print("  critical server impacted:", env.truth().hosts["srv"].impacted)

# 4. Report delay: evidence arrives late. The exploit at t=20 only becomes
#    visible at t=20+15; the defender acts on yesterday's news.
slow = with_sensor(base, report_delay=15.0)
env, _ = acdsim.env_reset(slow, seed=0)
for step in range(1, 5):
    obs, *_ = env.step(0)
    print(f"  t={step*10}: ws.detected={int(obs.flat[layout['ws.detected']])}")

# 5. Anomalous-but-benign activity false-alarms with the configured rate.
noisy = acdsim.load_bundled("two-subnet-noisy")
env, _ = acdsim.env_reset(noisy, seed=3)
alarms = 0
for _ in range(40):
    if env.done:
        break
    obs, *_ = env.step(0)
alerts = {h: int(obs.flat[env.obs_layout()[f"{h}.alert_count"]])
          for h in noisy.host_ids()}
print("\nnoisy enterprise scenario alert counts after 40 steps:", alerts)
print("(some of these are false positives from odd-looking benign traffic)")
