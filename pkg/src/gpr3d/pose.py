"""Antenna pose handling: per-trace position/heading, synthetic survey
trajectories and pose interpolation.

World frame convention used throughout the package: x/y horizontal in
meters, z is depth (positive down, surface at z = 0). Heading is the
antenna rotation angle about the vertical axis, normalized to [-pi, pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Pose:
    """Antenna position and heading at one A-scan trigger."""

    x: float
    y: float
    z: float = 0.0
    heading: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "heading", "timestamp"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"pose field {name} must be finite")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Trajectory:
    """Ordered pose sequence with strictly increasing timestamps."""

    poses: tuple[Pose, ...] = field(default_factory=tuple)

    def __post_init__(self):
        poses = tuple(self.poses)
        object.__setattr__(self, "poses", poses)
        if len(poses) < 2:
            raise ValueError(f"trajectory needs >= 2 poses, got {len(poses)}")
        ts = np.array([p.timestamp for p in poses])
        if not np.all(np.diff(ts) > 0):
            bad = int(np.argmin(np.diff(ts)))
            raise ValueError(
                f"timestamps must be strictly increasing (violated at pose {bad + 1})"
            )

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.poses])


def rotate_antenna(point, theta: float):
    """Rotate a 2D point by the antenna rotation angle theta.

    Applies [[cos t, -sin t], [sin t, cos t]] to (x, y).
    """
    x, y = float(point[0]), float(point[1])
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
        raise ValueError("rotate_antenna requires finite inputs")
    c, s = math.cos(theta), math.sin(theta)
    return (c * x - s * y, s * x + c * y)


def antenna_world_position(p: Pose, antenna_offset=(0.0, 0.0)) -> np.ndarray:
    """World (x, y, z) of the antenna given its lever arm in the cart frame.

    The offset rotates with the pose heading; z is unchanged.
    """
    ox, oy = rotate_antenna(antenna_offset, p.heading)
    return np.array([p.x + ox, p.y + oy, p.z])


def _line_poses(y, x_values, heading, t0, dt):
    return [
        Pose(x=float(x), y=float(y), heading=heading, timestamp=t0 + k * dt)
        for k, x in enumerate(x_values)
    ]


def synth_trajectory(
    pattern: str,
    extent: float,
    spacing: float,
    step: float,
    seed: int = 0,
    pose_interval: float = 1.0,
) -> Trajectory:
    """Generate a deterministic survey trajectory over a square area.

    pattern:
        "zigzag"          parallel x-lines spaced by `spacing` in y, direction
                          alternating (heading 0 then pi), like a survey cart
                          sweeping a grid.
        "straight-lines"  same line layout, all lines traversed in +x.
        "random-heading"  seeded random walk of headings inside the extent.

    `step` is the along-line pose spacing in meters; poses are stamped
    `pose_interval` seconds apart.
    """
    if extent <= 0 or spacing <= 0 or step <= 0:
        raise ValueError("extent, spacing and step must all be > 0")

    n_per_line = int(round(extent / step)) + 1
    n_lines = int(round(extent / spacing)) + 1
    if n_per_line < 1 or (pattern != "random-heading" and n_lines * n_per_line < 2):
        raise ValueError("degenerate extent/step combination")

    xs_fwd = np.arange(n_per_line) * step
    poses: list[Pose] = []

    if pattern == "zigzag":
        for li in range(n_lines):
            y = li * spacing
            if li % 2 == 0:
                poses += _line_poses(y, xs_fwd, 0.0, len(poses) * pose_interval, pose_interval)
            else:
                poses += _line_poses(y, xs_fwd[::-1], math.pi, len(poses) * pose_interval, pose_interval)
    elif pattern == "straight-lines":
        for li in range(n_lines):
            y = li * spacing
            poses += _line_poses(y, xs_fwd, 0.0, len(poses) * pose_interval, pose_interval)
    elif pattern == "random-heading":
        rng = np.random.default_rng(seed)
        n = max(2, n_lines * n_per_line)
        x, y = extent / 2.0, extent / 2.0
        for k in range(n):
            heading = float(rng.uniform(-math.pi, math.pi))
            poses.append(Pose(x=x, y=y, heading=heading, timestamp=k * pose_interval))
            x = float(np.clip(x + step * math.cos(heading), 0.0, extent))
            y = float(np.clip(y + step * math.sin(heading), 0.0, extent))
    else:
        raise ValueError(f"unknown trajectory pattern {pattern!r}")

    return Trajectory(tuple(poses))


def interpolate_pose(t: Trajectory, timestamp: float) -> Pose:
    """Pose at an arbitrary time inside the trajectory's time span.

    Position interpolates linearly, heading along the shortest arc.
    """
    ts = t.timestamps
    if timestamp < ts[0] or timestamp > ts[-1]:
        raise ValueError(
            f"timestamp {timestamp} outside trajectory range [{ts[0]}, {ts[-1]}]"
        )
    i = int(np.searchsorted(ts, timestamp, side="right") - 1)
    if i >= len(ts) - 1:
        return t.poses[-1]
    a, b = t.poses[i], t.poses[i + 1]
    if timestamp == a.timestamp:
        return a
    frac = (timestamp - a.timestamp) / (b.timestamp - a.timestamp)
    heading = a.heading + frac * wrap_angle(b.heading - a.heading)
    return Pose(
        x=a.x + frac * (b.x - a.x),
        y=a.y + frac * (b.y - a.y),
        z=a.z + frac * (b.z - a.z),
        heading=wrap_angle(heading),
        timestamp=timestamp,
    )
