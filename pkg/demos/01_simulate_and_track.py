"""Simulate a bouncing ball as an event stream and follow it with the ROI tracker.

Prints the size of the event stream, the tracker output rate and how far the
tracked centre strays from the simulated ball centre.
"""

import numpy as np

from evtraj import SimConfig, centre_at, generate_events, random_throw, simulate_trajectory, track_stream

cfg = SimConfig(seed=7)
initial, duration = random_throw(np.random.default_rng(7), cfg)
print(f"throw from ({initial.x:.1f}, {initial.y:.1f}) px at ({initial.vx:.0f}, {initial.vy:.0f}) px/s "
      f"for {duration:.2f} s")

states = simulate_trajectory(cfg, initial, duration, dt=1e-3)
bounces = sum(1 for a, b in zip(states, states[1:]) if a.vy > 0 and b.vy <= 0)
print(f"{len(states)} ballistic states, {bounces} floor contacts")

events = generate_events(states, cfg)
print(f"{len(events)} events, {np.mean(events['p']):.2f} of them positive polarity")

track = track_stream(events, roi_size=40, accum_threshold=40, drop_init=True)
rate = 1e6 / np.mean(np.diff(track["t"]))
truth = centre_at(states, track["t"])
err = np.hypot(track["x"] - truth[:, 0], track["y"] - truth[:, 1])
print(f"{len(track)} track points at {rate:.0f} Hz; error to the true centre "
      f"mean {err.mean():.2f} px, max {err.max():.2f} px")

noisy = generate_events(states, SimConfig(seed=7, noise_rate=2000))
track_n = track_stream(noisy, drop_init=True)
truth_n = centre_at(states, track_n["t"])
err_n = np.hypot(track_n["x"] - truth_n[:, 0], track_n["y"] - truth_n[:, 1])
print(f"with 2000 noise events/s: mean error {err_n.mean():.2f} px")
