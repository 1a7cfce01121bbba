"""UE mobility: disk-sampled starts, bounded random walk, Q_I resampling.

Positions live in the room frame, a ``width`` x ``height`` rectangle with a
corner at the origin. The AP sits at ``RoomConfig.ap_position`` (by default
the midpoint of the x = 0 wall) with the array along the wall, so the array
boresight points along +x into the room. ``true_polar`` converts room-frame
positions into AP-frame polar coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, GeometryError, ParameterError

MAX_REDRAWS = 1000


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class RoomConfig:
    width: float = 5.0
    height: float = 5.0
    ap_position: Point2D | None = None

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError(f"room must have positive size, got {self.width}x{self.height}")
        if self.ap_position is None:
            object.__setattr__(self, "ap_position", Point2D(0.0, self.height / 2))
        else:
            object.__setattr__(self, "ap_position", Point2D(*map(float, self.ap_position)))

    @property
    def center(self) -> Point2D:
        return Point2D(self.width / 2, self.height / 2)

    def contains(self, p: Sequence[float]) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height


@dataclass(frozen=True)
class WalkParams:
    step_length: float = 1.0
    num_original_steps: int = 10
    q_i: int = 1
    start_disk_radius: float = 1.5
    rng_seed: int = 0

    def __post_init__(self):
        if not self.step_length > 0:
            raise ConfigurationError("step_length must be positive")
        if self.num_original_steps < 0:
            raise ConfigurationError("num_original_steps must be >= 0")
        if int(self.q_i) != self.q_i or self.q_i < 1:
            raise ConfigurationError(f"q_i must be a positive integer, got {self.q_i}")
        if self.start_disk_radius < 0:
            raise ConfigurationError("start_disk_radius must be >= 0")


@dataclass
class MotionPath:
    """Per-timeslot UE positions after resampling.

    ``start`` is timeslot 0 (where Phase 1 begins); ``positions[t - 1]`` is
    the UE position in timeslot t, for t = 1..timeslot_count.
    """

    start: Point2D
    positions: list[Point2D] = field(default_factory=list)

    @property
    def timeslot_count(self) -> int:
        return len(self.positions)


def sample_start_location(room: RoomConfig, params: WalkParams, rng: np.random.Generator) -> Point2D:
    """Draw a start point uniformly (over area) on the disk centred in the room."""
    cx, cy = room.center
    radius = params.start_disk_radius
    if radius > min(cx, cy):
        raise ConfigurationError(
            f"start disk radius {radius} m does not fit in a {room.width}x{room.height} m room"
        )
    # sqrt of a uniform gives the r^2/R^2 radial CDF
    r = radius * math.sqrt(rng.random())
    phi = rng.uniform(0.0, 2 * math.pi)
    return Point2D(cx + r * math.cos(phi), cy + r * math.sin(phi))


def generate_random_walk(
    start: Point2D, room: RoomConfig, params: WalkParams, rng: np.random.Generator
) -> list[Point2D]:
    """Fixed-length random walk; steps leaving the room are redrawn.

    After ``MAX_REDRAWS`` rejected headings the walker stays put for that step.
    """
    if not room.contains(start):
        raise GeometryError(f"start {start} is outside the room")
    walk = [Point2D(float(start[0]), float(start[1]))]
    step = params.step_length
    for _ in range(params.num_original_steps):
        x, y = walk[-1]
        nxt = walk[-1]
        for _ in range(MAX_REDRAWS):
            heading = rng.uniform(0.0, 2 * math.pi)
            cand = Point2D(x + step * math.cos(heading), y + step * math.sin(heading))
            if room.contains(cand):
                nxt = cand
                break
        walk.append(nxt)
    return walk


def resample_path(walk: Sequence[Point2D], q_i: int) -> MotionPath:
    """Linearly subdivide every walk segment into ``q_i`` equal sub-steps.

    Segment end points are copied exactly, so the last position equals the
    last walk point bit for bit.
    """
    if int(q_i) != q_i or q_i < 1:
        raise ParameterError(f"q_i must be an integer >= 1, got {q_i}")
    if len(walk) < 1:
        raise ParameterError("walk must contain at least the start point")
    q_i = int(q_i)
    positions: list[Point2D] = []
    for (x0, y0), (x1, y1) in zip(walk[:-1], walk[1:]):
        dx, dy = x1 - x0, y1 - y0
        for j in range(1, q_i):
            f = j / q_i
            positions.append(Point2D(x0 + f * dx, y0 + f * dy))
        positions.append(Point2D(x1, y1))
    return MotionPath(start=Point2D(*walk[0]), positions=positions)


def generate_motion(room: RoomConfig, params: WalkParams, rng: np.random.Generator) -> MotionPath:
    start = sample_start_location(room, params, rng)
    walk = generate_random_walk(start, room, params, rng)
    return resample_path(walk, params.q_i)


def true_polar(ue: Sequence[float], ap: Sequence[float]) -> tuple[float, float]:
    """Distance and angle off boresight (+x) of the AP->UE vector."""
    dx = ue[0] - ap[0]
    dy = ue[1] - ap[1]
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise GeometryError("UE coincides with the AP")
    return r, math.atan2(dy, dx)


def is_serviceable(theta: float) -> bool:
    """True when theta lies strictly inside the array's front half-plane."""
    return -math.pi / 2 < theta < math.pi / 2
