"""Dielectric / wave-velocity / two-way-travel-time relations.

Everything else in the package (forward modeling, migration, depth
estimation) converts between depth and time through these functions, so
they are kept deliberately tiny and exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

#: Speed of light in vacuum, m/s (exact SI value).
SPEED_OF_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class MediumModel:
    """Homogeneous subsurface medium described by its relative permittivity.

    dielectric must be >= 1 (vacuum); wave velocity is C / sqrt(dielectric).
    """

    dielectric: float
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not math.isfinite(self.dielectric):
            raise ValueError(f"dielectric must be finite, got {self.dielectric}")
        if self.dielectric < 1.0:
            raise ValueError(f"dielectric must be >= 1, got {self.dielectric}")


@dataclass(frozen=True)
class TravelTime:
    """Two-way travel time (antenna -> target -> antenna), seconds."""

    twtt: float

    def __post_init__(self):
        if not math.isfinite(self.twtt) or self.twtt < 0.0:
            raise ValueError(f"twtt must be finite and >= 0, got {self.twtt}")


def velocity(m: MediumModel) -> float:
    """Wave velocity in the medium, m/s: C / sqrt(dielectric)."""
    return m.speed_of_light / math.sqrt(m.dielectric)


def depth_to_twtt(depth: float, m: MediumModel) -> TravelTime:
    """Two-way travel time for a target at `depth` meters below the antenna."""
    if not math.isfinite(depth) or depth < 0.0:
        raise ValueError(f"depth must be finite and >= 0, got {depth}")
    return TravelTime(2.0 * depth / velocity(m))


def twtt_to_depth(t: TravelTime | float, m: MediumModel) -> float:
    """Depth in meters corresponding to a two-way travel time.

    Exact inverse of depth_to_twtt. Accepts a TravelTime or a plain
    number of seconds.
    """
    seconds = t.twtt if isinstance(t, TravelTime) else float(t)
    if not math.isfinite(seconds) or seconds < 0.0:
        raise ValueError(f"travel time must be finite and >= 0, got {seconds}")
    return velocity(m) * seconds / 2.0
