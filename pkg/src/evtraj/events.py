"""Bouncing-ball simulator and silhouette-based event generation.

Image coordinates follow the sensor convention: x is the column, y is the
row and grows downwards, so gravity is positive along y and the floor is a
row index near the bottom of the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

SENSOR_WIDTH = 304
SENSOR_HEIGHT = 240

EVENT_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<i8"), ("p", "u1")])

# below this rebound speed (px/s) the ball is put to rest on the floor
_REST_SPEED = 1.0
_MAX_BOUNCES_PER_STEP = 64


class BallState(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float
    time: float


class Event(NamedTuple):
    x: int
    y: int
    t: int
    p: int


@dataclass(frozen=True)
class SimConfig:
    """Physical and sensor parameters of the simulated recording.

    Units are pixels and seconds. ``event_rate_density`` is the number of
    events each pixel emits when the ball silhouette crosses it; fractional
    parts are realised as a seeded Bernoulli draw. ``jitter_us`` bounds the
    uniform timestamp jitter added to every motion event.
    """

    gravity: float = 1875.0
    restitution: float = 0.8
    floor_y: float = 220.0
    ball_radius: float = 8.0
    event_rate_density: float = 1.0
    noise_rate: float = 0.0
    seed: int = 0
    jitter_us: float = 20.0

    def __post_init__(self):
        if not 0.0 < self.restitution <= 1.0:
            raise ValueError(f"restitution must lie in (0, 1], got {self.restitution}")
        for name in ("gravity", "ball_radius", "event_rate_density", "noise_rate", "jitter_us"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if self.ball_radius == 0:
            raise ValueError("ball_radius must be positive")
        if not math.isfinite(self.floor_y):
            raise ValueError("floor_y must be finite")


def _time_to_floor(y: float, vy: float, gap: float, g: float) -> float:
    """Time until the ball's lower edge falls ``gap`` pixels, or inf."""
    if g > 0:
        s = math.sqrt(max(vy * vy + 2.0 * g * gap, 0.0))
        if vy >= 0:
            denom = vy + s
            return 2.0 * gap / denom if denom > 0 else math.inf
        return (s - vy) / g
    if vy > 0:
        return gap / vy
    return math.inf


def simulate_trajectory(
    config: SimConfig, initial: BallState, duration: float, dt: float
) -> list[BallState]:
    """Integrate ballistic flight with restitution bounces off ``floor_y``.

    Flight between bounces is integrated in closed form and contact times are
    solved exactly, so the returned states (spaced ``dt`` apart, starting
    with ``initial``) carry no integration error.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if not (math.isfinite(duration) and duration > 0):
        raise ValueError(f"duration must be positive, got {duration}")
    if not all(math.isfinite(v) for v in initial):
        raise ValueError(f"initial state must be finite, got {initial}")
    if initial.time < 0:
        raise ValueError("initial time must be non-negative")

    g = config.gravity
    e = config.restitution
    rest_y = config.floor_y - config.ball_radius
    if initial.y > rest_y + 1e-9:
        raise ValueError("ball starts below the floor")

    x, y, vx, vy = initial.x, min(initial.y, rest_y), initial.vx, initial.vy
    resting = y == rest_y and vy == 0.0
    n_steps = int(math.floor(duration / dt + 1e-9))
    states = [BallState(x, y, vx, vy, initial.time)]

    for k in range(1, n_steps + 1):
        remaining = dt
        for _ in range(_MAX_BOUNCES_PER_STEP):
            if resting:
                break
            tau = _time_to_floor(y, vy, rest_y - y, g)
            if tau > remaining:
                y += vy * remaining + 0.5 * g * remaining * remaining
                vy += g * remaining
                remaining = 0.0
                break
            impact = vy + g * tau
            remaining -= tau
            y = rest_y
            vy = -e * impact
            if abs(vy) < _REST_SPEED:
                vy = 0.0
                resting = True
        else:
            resting, vy, y = True, 0.0, rest_y
        x += vx * dt
        states.append(BallState(x, min(y, rest_y), vx, vy, initial.time + k * dt))
    return states


def _state_arrays(states: Sequence[BallState]):
    arr = np.asarray([(s.x, s.y, s.time) for s in states], dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _motion_events(cx, cy, t_us, radius, rng, density, jitter_us):
    """Silhouette-change events for every consecutive pair of centres."""
    n_pairs = len(cx) - 1
    dx = np.diff(cx)
    dy = np.diff(cy)
    reach = float(np.max(np.hypot(dx, dy))) if n_pairs else 0.0
    side = int(math.ceil(2 * radius + reach)) + 4
    r2 = radius * radius
    offs = np.arange(side)

    xs, ys, ps, crossings = [], [], [], []
    chunk = max(1, 2_000_000 // (side * side))
    for lo in range(0, n_pairs, chunk):
        hi = min(lo + chunk, n_pairs)
        x0, y0 = cx[lo:hi], cy[lo:hi]
        x1, y1 = cx[lo + 1 : hi + 1], cy[lo + 1 : hi + 1]
        ox = np.floor(np.minimum(x0, x1) - radius).astype(np.int64) - 1
        oy = np.floor(np.minimum(y0, y1) - radius).astype(np.int64) - 1
        px = ox[:, None, None] + offs[None, None, :]
        py = oy[:, None, None] + offs[None, :, None]
        rx0 = px - x0[:, None, None]
        ry0 = py - y0[:, None, None]
        rx1 = px - x1[:, None, None]
        ry1 = py - y1[:, None, None]
        in0 = rx0 * rx0 + ry0 * ry0 <= r2
        in1 = rx1 * rx1 + ry1 * ry1 <= r2
        valid = (px >= 0) & (px < SENSOR_WIDTH) & (py >= 0) & (py < SENSOR_HEIGHT)
        changed = (in0 != in1) & valid
        k, j, i = np.nonzero(changed)
        if len(k) == 0:
            continue
        pair = k + lo
        ex = px[k, 0, i]
        ey = py[k, j, 0]
        entering = in1[k, j, i]

        # fraction of the step at which the disc edge crosses the pixel centre
        ddx, ddy = dx[pair], dy[pair]
        qx, qy = ex - cx[pair], ey - cy[pair]
        a = ddx * ddx + ddy * ddy
        b = qx * ddx + qy * ddy
        c = qx * qx + qy * qy - r2
        root = np.sqrt(np.maximum(b * b - a * c, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(entering, (b - root) / a, (b + root) / a)
        s = np.clip(np.nan_to_num(s, nan=0.5), 0.0, 1.0)

        xs.append(ex)
        ys.append(ey)
        ps.append(entering.astype(np.uint8))
        crossings.append((pair, s))

    if not xs:
        return np.empty(0, dtype=EVENT_DTYPE)
    ex = np.concatenate(xs)
    ey = np.concatenate(ys)
    ep = np.concatenate(ps)
    pair = np.concatenate([p for p, _ in crossings])
    s = np.concatenate([f for _, f in crossings])

    if density != 1.0:
        whole = int(math.floor(density))
        extra = rng.random(len(ex)) < (density - whole)
        reps = whole + extra.astype(np.int64)
        ex, ey, ep = np.repeat(ex, reps), np.repeat(ey, reps), np.repeat(ep, reps)
        pair, s = np.repeat(pair, reps), np.repeat(s, reps)

    t0 = t_us[pair]
    t1 = t_us[pair + 1]
    t = t0 + s * (t1 - t0)
    if jitter_us > 0:
        t = t + rng.uniform(-jitter_us, jitter_us, size=len(t))
    t = np.clip(np.rint(t), t0, t1).astype(np.int64)

    out = np.empty(len(ex), dtype=EVENT_DTYPE)
    out["x"], out["y"], out["t"], out["p"] = ex, ey, t, ep
    return out


def generate_events(states: Sequence[BallState], config: SimConfig) -> np.ndarray:
    """Render a state sequence into an event stream.

    Every pixel whose centre changes membership of the ball disc between two
    consecutive states fires (polarity 1 on entering, 0 on leaving) at the
    moment the linearly interpolated disc edge crosses it, plus jitter.
    Uniform background noise is added at ``noise_rate`` events per second.
    Returns a structured array with fields ``x, y, t, p`` sorted by ``t``.
    """
    if len(states) < 2:
        raise ValueError("need at least two states")
    cx, cy, ts = _state_arrays(states)
    if not np.all(np.isfinite(cx)) or not np.all(np.isfinite(cy)):
        raise ValueError("states must be finite")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("states must be strictly ordered in time")

    rng = np.random.default_rng(config.seed)
    t_us = np.rint(ts * 1e6).astype(np.int64)
    motion = _motion_events(
        cx, cy, t_us.astype(np.float64), config.ball_radius, rng,
        config.event_rate_density, config.jitter_us,
    )

    span = (t_us[-1] - t_us[0]) / 1e6
    n_noise = int(rng.poisson(config.noise_rate * span)) if config.noise_rate > 0 else 0
    noise = np.empty(n_noise, dtype=EVENT_DTYPE)
    if n_noise:
        noise["x"] = rng.integers(0, SENSOR_WIDTH, n_noise)
        noise["y"] = rng.integers(0, SENSOR_HEIGHT, n_noise)
        noise["t"] = rng.integers(t_us[0], t_us[-1] + 1, n_noise)
        noise["p"] = rng.integers(0, 2, n_noise)

    events = np.concatenate([motion, noise])
    return events[np.argsort(events["t"], kind="stable")]


def random_throw(rng: np.random.Generator, config: SimConfig) -> tuple[BallState, float]:
    """Draw a left-to-right throw and a duration that keeps the ball in view.

    Durations cover roughly two to three bounces for the default geometry.
    """
    r = config.ball_radius
    x0 = rng.uniform(r + 4, 60.0)
    y0 = rng.uniform(25.0, 90.0)
    vx = rng.uniform(110.0, 170.0)
    vy = rng.uniform(-150.0, 150.0)
    exit_time = (SENSOR_WIDTH - 1 - r - x0) / vx
    duration = min(rng.uniform(1.3, 1.8), exit_time)
    return BallState(x0, y0, vx, vy, 0.0), duration


def centre_at(states: Sequence[BallState], t_us) -> np.ndarray:
    """Linearly interpolated ball centre at microsecond time(s) ``t_us``."""
    cx, cy, ts = _state_arrays(states)
    t = np.asarray(t_us, dtype=np.float64) / 1e6
    return np.stack([np.interp(t, ts, cx), np.interp(t, ts, cy)], axis=-1)


def as_event_array(events) -> np.ndarray:
    """Coerce a structured array or an iterable of ``Event`` to ``EVENT_DTYPE``."""
    if isinstance(events, np.ndarray) and events.dtype == EVENT_DTYPE:
        return events
    rows = [tuple(e) for e in events]
    return np.array(rows, dtype=EVENT_DTYPE) if rows else np.empty(0, dtype=EVENT_DTYPE)
